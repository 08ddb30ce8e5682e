use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use marl_sim_cli::{cmd_oracle, cmd_run, cmd_sweep, CliError, CommonArgs, RunArgs, SweepArgs};
use marl_sim_core::ObjectiveKind;

/// Independent Q-learning UAV task partitioning simulator.
#[derive(Parser)]
#[command(name = "marl-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write metrics.csv, summary.json and effective.cfg.
    Run {
        #[command(flatten)]
        common: Common,
        /// Write every UAV's Q-table to qtables/uavN.json.
        #[arg(long)]
        dump_qtables: bool,
        /// Also write the oracle's per-partition table to oracle.csv.
        #[arg(long)]
        oracle: bool,
    },
    /// Enumerate all partitions and write oracle.csv.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Run consecutive seeds and write aggregate.json.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Number of seeds, starting at the resolved master seed.
        #[arg(long, default_value_t = 20)]
        seeds: usize,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Master seed; overrides MARL_SIM_SEED and the file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    objective: Option<Objective>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Objective {
    #[value(name = "sum_rate")]
    SumRate,
    Weighted,
}

impl From<Common> for CommonArgs {
    fn from(c: Common) -> Self {
        CommonArgs {
            scenario: c.scenario,
            out: c.out,
            seed: c.seed,
            objective: c.objective.map(|o| match o {
                Objective::SumRate => ObjectiveKind::SumRate,
                Objective::Weighted => ObjectiveKind::WeightedGainSteady,
            }),
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            common,
            dump_qtables,
            oracle,
        } => {
            let s = cmd_run(&RunArgs {
                common: common.into(),
                dump_qtables,
                oracle_table: oracle,
            })?;
            match s.converged_at {
                Some(t) => println!(
                    "final {} converged at slot {t}, oracle match: {}",
                    s.final_partition, s.oracle_match
                ),
                None => println!(
                    "final {} (no plateau), oracle match: {}",
                    s.final_partition, s.oracle_match
                ),
            }
        }
        Command::Oracle { common } => {
            let r = cmd_oracle(&common.into())?;
            let best: Vec<String> = r.best_partitions.iter().map(|p| p.bit_string()).collect();
            println!(
                "{} partitions, best {} = {}",
                r.evaluations,
                best.join(" "),
                r.best_objective
            );
        }
        Command::Sweep {
            common,
            seeds,
            jobs,
        } => {
            let a = cmd_sweep(&SweepArgs {
                common: common.into(),
                n_seeds: seeds,
                jobs,
            })?;
            println!(
                "{} runs, {} converged, match rate {:?}",
                a.completed, a.converged, a.match_rate
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("marl-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
