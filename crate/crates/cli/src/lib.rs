//! Scenario files, run orchestration and artifact writers behind `marl-sim`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use marl_sim_core::{
    build_topology, sample_channels_with_mode, Area, DrawMode, FixedNodes, GainWeights,
    LearnerParams, ObjectiveKind, Oracle, OracleError, OracleResult, Partition, Placement, Point,
    PowerProfile, RunConfig, RunOutput, RunSummary, SeedPlan, SimError, SlotRecord,
};

pub const SEED_ENV: &str = "MARL_SIM_SEED";

pub const METRICS_HEADER: &str =
    "slot,partition_bits,r_sf,r_pu,sum_rate,fairness,reward,n_switches";
pub const ORACLE_HEADER: &str = "partition_bits,r_sf,r_pu,fairness,objective,is_best";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig(_)
            | SimError::Topology(_)
            | SimError::Agent(_)
            | SimError::Rate(_)
            | SimError::Reward(_)
            | SimError::Oracle(OracleError::TooManyAgents(_)) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

// ---------------------------------------------------------------------------
// Scenario file

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub topology: TopologySection,
    #[serde(default)]
    pub powers: PowersSection,
    #[serde(default)]
    pub weights: WeightsSection,
    #[serde(default)]
    pub learner: LearnerSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub n_uavs: usize,
    #[serde(default = "default_side")]
    pub width: f64,
    #[serde(default = "default_side")]
    pub height: f64,
    #[serde(default = "default_source")]
    pub source: [f64; 2],
    #[serde(default = "default_fusion")]
    pub fusion: [f64; 2],
    #[serde(default = "default_pu_tx")]
    pub pu_tx: [f64; 2],
    #[serde(default = "default_pu_rx")]
    pub pu_rx: [f64; 2],
    /// Fixed UAV positions; drawn uniformly in the area when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uav_positions: Option<Vec<[f64; 2]>>,
}

fn default_side() -> f64 {
    100.0
}
fn pt(p: Point) -> [f64; 2] {
    [p.x, p.y]
}
fn default_source() -> [f64; 2] {
    pt(FixedNodes::default().source)
}
fn default_fusion() -> [f64; 2] {
    pt(FixedNodes::default().fusion)
}
fn default_pu_tx() -> [f64; 2] {
    pt(FixedNodes::default().pu_tx)
}
fn default_pu_rx() -> [f64; 2] {
    pt(FixedNodes::default().pu_rx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UavPower {
    Uniform(f64),
    PerUav(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PowersSection {
    pub source: f64,
    pub pu_tx: f64,
    pub uav: UavPower,
}

impl Default for PowersSection {
    fn default() -> Self {
        Self {
            source: PowerProfile::DEFAULT_SOURCE,
            pu_tx: PowerProfile::DEFAULT_PU_TX,
            uav: UavPower::Uniform(PowerProfile::DEFAULT_UAV),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WeightsSection {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        let w = GainWeights::default();
        Self {
            gamma1: w.gamma1,
            gamma2: w.gamma2,
            gamma3: w.gamma3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerSection {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
}

impl Default for LearnerSection {
    fn default() -> Self {
        let p = LearnerParams::default();
        Self {
            alpha: p.alpha,
            beta: p.beta,
            c: p.c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub iterations: u64,
    pub window: usize,
    pub draw_mode: DrawMode,
    pub seed: u64,
    pub objective: ObjectiveKind,
    /// Bit string, UAV 0 first; all-FUSION when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_partition: Option<String>,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunConfig::default_for(1);
        Self {
            iterations: d.n_iterations,
            window: d.convergence_window,
            draw_mode: d.draw_mode,
            seed: d.master_seed,
            objective: d.objective,
            initial_partition: None,
        }
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario is always representable")
    }

    pub fn to_run_config(&self) -> Result<RunConfig, CliError> {
        let t = &self.topology;
        let p = |a: [f64; 2]| Point::new(a[0], a[1]);
        let fixed = FixedNodes {
            source: p(t.source),
            fusion: p(t.fusion),
            pu_tx: p(t.pu_tx),
            pu_rx: p(t.pu_rx),
        };
        let placement = match &t.uav_positions {
            None => Placement::Random(fixed),
            Some(uavs) => {
                let mut all = vec![fixed.source, fixed.fusion, fixed.pu_tx, fixed.pu_rx];
                all.extend(uavs.iter().map(|&a| p(a)));
                Placement::Explicit(all)
            }
        };
        let uavs = match &self.powers.uav {
            UavPower::Uniform(u) => vec![*u; t.n_uavs],
            UavPower::PerUav(list) => list.clone(),
        };
        let initial_partition = self
            .run
            .initial_partition
            .as_deref()
            .map(Partition::parse_bits)
            .transpose()
            .map_err(|e| CliError::Config(e.to_string()))?;
        let cfg = RunConfig {
            n_uavs: t.n_uavs,
            n_iterations: self.run.iterations,
            area: Area {
                width: t.width,
                height: t.height,
            },
            placement,
            powers: PowerProfile {
                source: self.powers.source,
                pu_tx: self.powers.pu_tx,
                uavs,
            },
            weights: GainWeights {
                gamma1: self.weights.gamma1,
                gamma2: self.weights.gamma2,
                gamma3: self.weights.gamma3,
            },
            learner: LearnerParams {
                alpha: self.learner.alpha,
                beta: self.learner.beta,
                c: self.learner.c,
            },
            draw_mode: self.run.draw_mode,
            convergence_window: self.run.window,
            master_seed: self.run.seed,
            initial_partition,
            objective: self.run.objective,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

// ---------------------------------------------------------------------------
// Seeds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedSource {
    Cli,
    Env,
    File,
}

/// CLI beats the environment, which beats the file.
pub fn resolve_seed(
    cli: Option<u64>,
    env: Option<&str>,
    file: u64,
) -> Result<(u64, SeedSource), CliError> {
    if let Some(s) = cli {
        return Ok((s, SeedSource::Cli));
    }
    if let Some(raw) = env {
        let s = raw
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("{SEED_ENV}={raw:?} is not a u64")))?;
        return Ok((s, SeedSource::Env));
    }
    Ok((file, SeedSource::File))
}

fn env_seed() -> Option<String> {
    std::env::var(SEED_ENV).ok()
}

// ---------------------------------------------------------------------------
// Commands

#[derive(Debug, Clone, Default)]
pub struct CommonArgs {
    pub scenario: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub objective: Option<ObjectiveKind>,
}

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub common: CommonArgs,
    pub dump_qtables: bool,
    pub oracle_table: bool,
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub common: CommonArgs,
    pub n_seeds: usize,
    /// Worker count; available parallelism when unset.
    pub jobs: Option<usize>,
}

/// Scenario with seed and objective overrides applied.
pub fn effective_scenario(args: &CommonArgs) -> Result<ScenarioFile, CliError> {
    let mut file = ScenarioFile::load(&args.scenario)?;
    let (seed, _) = resolve_seed(args.seed, env_seed().as_deref(), file.run.seed)?;
    file.run.seed = seed;
    if let Some(o) = args.objective {
        file.run.objective = o;
    }
    Ok(file)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_err(path, e))
}

pub fn metrics_csv(records: &[SlotRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in records {
        // `{}` on f64 prints the shortest round-tripping form.
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.slot,
            r.partition_bits,
            r.r_sf,
            r.r_pu,
            r.sum_rate,
            r.fairness,
            r.reward,
            r.n_switches
        ));
    }
    out
}

pub fn oracle_csv(result: &OracleResult) -> String {
    let rows = result.rows.as_deref().unwrap_or_default();
    let mut out = String::from(ORACLE_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.partition.bit_string(),
            row.rates.r_sf,
            row.rates.r_pu,
            row.fairness,
            row.objective,
            result.is_best(&row.partition)
        ));
    }
    out
}

#[derive(Serialize)]
struct QTableDump {
    uav: usize,
    n_uavs: usize,
    /// `[q(s, FUSION), q(s, PRIMARY)]` per state index.
    values: Vec<[f64; 2]>,
    visits: Vec<u64>,
}

fn dump_qtables(output: &RunOutput, dir: &Path) -> Result<(), CliError> {
    let dir = dir.join("qtables");
    create_dir(&dir)?;
    for agent in &output.agents {
        let t = agent.table();
        let dump = QTableDump {
            uav: agent.index(),
            n_uavs: t.n_uavs(),
            values: (0..t.n_states()).map(|s| t.row(s)).collect(),
            visits: (0..t.n_states()).map(|s| t.visits(s)).collect(),
        };
        let json = serde_json::to_string_pretty(&dump).expect("plain data");
        write_file(&dir.join(format!("uav{}.json", agent.index())), &json)?;
    }
    Ok(())
}

fn summary_json(summary: &RunSummary) -> String {
    let mut s = serde_json::to_string_pretty(summary).expect("plain data");
    s.push('\n');
    s
}

fn oracle_for(scenario: &ScenarioFile, cfg: &RunConfig) -> Result<OracleResult, CliError> {
    let plan = SeedPlan::new(cfg.master_seed);
    let topo = build_topology(cfg.n_uavs, cfg.area, &cfg.placement, plan.topology())
        .map_err(|e| CliError::Config(e.to_string()))?;
    let channels = sample_channels_with_mode(&topo, plan.channels(), cfg.draw_mode);
    Oracle::new(scenario.run.objective)
        .enumerate(&channels, &cfg.powers, &cfg.weights)
        .map_err(|e| CliError::from(SimError::from(e)))
}

/// Run one scenario and write its artifacts into `dir`.
fn run_into(
    scenario: &ScenarioFile,
    dir: &Path,
    dump: bool,
    oracle_table: bool,
) -> Result<RunSummary, CliError> {
    let cfg = scenario.to_run_config()?;
    let output = marl_sim_core::run(&cfg)?;
    create_dir(dir)?;
    write_file(&dir.join("effective.cfg"), &scenario.to_toml())?;
    write_file(
        &dir.join("metrics.csv"),
        &metrics_csv(&output.metrics.records),
    )?;
    if dump {
        dump_qtables(&output, dir)?;
    }
    if oracle_table {
        let table = oracle_for(scenario, &cfg)?;
        write_file(&dir.join("oracle.csv"), &oracle_csv(&table))?;
    }
    // Written last: its presence marks the run as complete.
    write_file(
        &dir.join("summary.json"),
        &summary_json(&output.metrics.summary),
    )?;
    Ok(output.metrics.summary)
}

pub fn cmd_run(args: &RunArgs) -> Result<RunSummary, CliError> {
    let scenario = effective_scenario(&args.common)?;
    run_into(
        &scenario,
        &args.common.out,
        args.dump_qtables,
        args.oracle_table,
    )
}

pub fn cmd_oracle(args: &CommonArgs) -> Result<OracleResult, CliError> {
    let scenario = effective_scenario(args)?;
    let cfg = scenario.to_run_config()?;
    let result = oracle_for(&scenario, &cfg)?;
    create_dir(&args.out)?;
    write_file(&args.out.join("oracle.csv"), &oracle_csv(&result))?;
    Ok(result)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub min: u64,
    pub p25: u64,
    pub median: u64,
    pub p75: u64,
    pub max: u64,
}

/// Nearest-rank quantiles of a non-empty sample.
pub fn quantiles(values: &[u64]) -> Option<Quantiles> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let at = |q: f64| v[((q * v.len() as f64).ceil() as usize).clamp(1, v.len()) - 1];
    Some(Quantiles {
        min: v[0],
        p25: at(0.25),
        median: at(0.5),
        p75: at(0.75),
        max: v[v.len() - 1],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_seeds: usize,
    pub base_seed: u64,
    pub objective: ObjectiveKind,
    pub completed: usize,
    pub converged: usize,
    /// Oracle matches over completed runs.
    pub match_rate: Option<f64>,
    /// Oracle matches over converged runs.
    pub converged_match_rate: Option<f64>,
    pub converged_at: Option<Quantiles>,
    /// Seeds whose run directory lacks a readable summary.
    pub incomplete: Vec<u64>,
    pub runs: Vec<RunSummary>,
}

impl Aggregate {
    pub fn from_runs(
        n_seeds: usize,
        base_seed: u64,
        objective: ObjectiveKind,
        runs: Vec<RunSummary>,
        incomplete: Vec<u64>,
    ) -> Self {
        let rate = |hits: usize, of: usize| (of > 0).then(|| hits as f64 / of as f64);
        let conv: Vec<&RunSummary> = runs.iter().filter(|r| r.converged_at.is_some()).collect();
        let matches = runs.iter().filter(|r| r.oracle_match).count();
        let conv_matches = conv.iter().filter(|r| r.oracle_match).count();
        let slots: Vec<u64> = conv.iter().filter_map(|r| r.converged_at).collect();
        Self {
            n_seeds,
            base_seed,
            objective,
            completed: runs.len(),
            converged: conv.len(),
            match_rate: rate(matches, runs.len()),
            converged_match_rate: rate(conv_matches, conv.len()),
            converged_at: quantiles(&slots),
            incomplete,
            runs,
        }
    }
}

pub fn run_dir(out: &Path, k: usize) -> PathBuf {
    out.join(format!("run_{k:04}"))
}

/// Run seeds `base, base+1, ...` in a bounded pool; per-run artifacts go to
/// `run_XXXX/`, the roll-up to `aggregate.json`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<Aggregate, CliError> {
    use rayon::prelude::*;

    if args.n_seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let scenario = effective_scenario(&args.common)?;
    scenario.to_run_config()?;
    let base = scenario.run.seed;
    let out = &args.common.out;
    create_dir(out)?;

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        builder = builder.num_threads(j.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let results: Vec<Result<RunSummary, CliError>> = pool.install(|| {
        (0..args.n_seeds)
            .into_par_iter()
            .map(|k| {
                let mut s = scenario.clone();
                s.run.seed = base.wrapping_add(k as u64);
                run_into(&s, &run_dir(out, k), false, false)
            })
            .collect()
    });

    // Re-read what landed on disk so stale or partial directories show up.
    let mut runs = Vec::new();
    let mut incomplete = Vec::new();
    let mut first_err = None;
    for (k, res) in results.into_iter().enumerate() {
        let seed = base.wrapping_add(k as u64);
        let on_disk = fs::read_to_string(run_dir(out, k).join("summary.json"))
            .ok()
            .and_then(|t| serde_json::from_str::<RunSummary>(&t).ok());
        match (res, on_disk) {
            (Ok(_), Some(summary)) => runs.push(summary),
            (res, _) => {
                incomplete.push(seed);
                if let Err(e) = res {
                    first_err.get_or_insert(e);
                }
            }
        }
    }
    let agg = Aggregate::from_runs(args.n_seeds, base, scenario.run.objective, runs, incomplete);
    let path = out.join("aggregate.json");
    let mut json = serde_json::to_string_pretty(&agg).expect("plain data");
    json.push('\n');
    write_file(&path, &json)?;
    if !agg.incomplete.is_empty() {
        return Err(first_err.unwrap_or_else(|| {
            CliError::Runtime(format!(
                "{} run(s) left partial artifacts",
                agg.incomplete.len()
            ))
        }));
    }
    Ok(agg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_precedence() {
        assert_eq!(
            resolve_seed(Some(1), Some("2"), 3).unwrap(),
            (1, SeedSource::Cli)
        );
        assert_eq!(
            resolve_seed(None, Some("2"), 3).unwrap(),
            (2, SeedSource::Env)
        );
        assert_eq!(resolve_seed(None, None, 3).unwrap(), (3, SeedSource::File));
        assert_eq!(resolve_seed(None, Some("x"), 3).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn minimal_file_fills_defaults() {
        let s = ScenarioFile::parse("[topology]\nn_uavs = 3\n").unwrap();
        let cfg = s.to_run_config().unwrap();
        let d = RunConfig::default_for(3);
        assert_eq!(cfg, d);
    }

    #[test]
    fn per_uav_powers() {
        let s =
            ScenarioFile::parse("[topology]\nn_uavs = 2\n[powers]\nuav = [2.0, 3.0]\n").unwrap();
        assert_eq!(s.to_run_config().unwrap().powers.uavs, vec![2.0, 3.0]);
        let short =
            ScenarioFile::parse("[topology]\nn_uavs = 3\n[powers]\nuav = [2.0, 3.0]\n").unwrap();
        assert!(matches!(short.to_run_config(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_named() {
        let err =
            ScenarioFile::parse("[topology]\nn_uavs = 2\n[learner]\nalpah = 0.2\n").unwrap_err();
        assert!(err.to_string().contains("alpah"), "{err}");
        assert!(ScenarioFile::parse("[topology]\nn_uavs = 2\n[extra]\n").is_err());
    }

    #[test]
    fn quantiles_nearest_rank() {
        let q = quantiles(&[40, 10, 30, 20]).unwrap();
        assert_eq!((q.min, q.p25, q.median, q.p75, q.max), (10, 10, 20, 30, 40));
        assert_eq!(quantiles(&[7]).unwrap().median, 7);
        assert!(quantiles(&[]).is_none());
    }
}
