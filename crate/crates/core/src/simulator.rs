//! Time-slotted learning loop, metrics and convergence certification.
//!
//! Each slot: every UAV observes the current partition, picks its task from
//! its own table, the environment scores the resulting partition, the
//! feedback is broadcast, and every UAV updates the one cell it visited.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{greedy_joint_action, Agent, AgentError, LearnerParams};
use crate::environment::{step, EnvError, Partition};
use crate::oracle::{ObjectiveKind, Oracle, OracleError, OracleResult};
use crate::rate::{PowerProfile, RateError, RelayTerms};
use crate::reward::{GainWeights, RateHistory, RewardError};
use crate::seed::SeedPlan;
use crate::topology::{
    build_topology, sample_channels_with_mode, Area, ChannelRealization, DrawMode, FixedNodes,
    Placement, Topology, TopologyError,
};

pub const DEFAULT_CONVERGENCE_WINDOW: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("no zero-switch plateau detected")]
    NotConverged,
    #[error(
        "switch accounting disagrees at slot {slot}: hamming {hamming}, per-agent {per_agent}"
    )]
    SwitchMismatch {
        slot: u64,
        hamming: usize,
        per_agent: usize,
    },
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub n_uavs: usize,
    pub n_iterations: u64,
    pub area: Area,
    pub placement: Placement,
    pub powers: PowerProfile,
    pub weights: GainWeights,
    pub learner: LearnerParams,
    pub draw_mode: DrawMode,
    pub convergence_window: usize,
    pub master_seed: u64,
    /// Partition observed before slot 0; all-FUSION when unset.
    pub initial_partition: Option<Partition>,
    /// Objective used for the summary's oracle comparison.
    pub objective: ObjectiveKind,
}

impl RunConfig {
    /// Defaults with random placement inside the standard area.
    pub fn default_for(n_uavs: usize) -> Self {
        Self {
            n_uavs,
            n_iterations: 1000,
            area: Area::default(),
            placement: Placement::Random(FixedNodes::default()),
            powers: PowerProfile::default_for(n_uavs),
            weights: GainWeights::default(),
            learner: LearnerParams::default(),
            draw_mode: DrawMode::Static,
            convergence_window: DEFAULT_CONVERGENCE_WINDOW,
            master_seed: 0,
            initial_partition: None,
            objective: ObjectiveKind::WeightedGainSteady,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidConfig(msg));
        if self.n_uavs == 0 {
            return bad("n_uavs must be at least 1".into());
        }
        if self.n_iterations == 0 {
            return bad("n_iterations must be at least 1".into());
        }
        if self.convergence_window == 0 {
            return bad("convergence_window must be at least 1".into());
        }
        if self.powers.uavs.len() != self.n_uavs {
            return bad(format!(
                "{} UAV powers given for {} UAVs",
                self.powers.uavs.len(),
                self.n_uavs
            ));
        }
        if let Some(init) = &self.initial_partition {
            if init.len() != self.n_uavs {
                return bad(format!(
                    "initial partition has {} labels for {} UAVs",
                    init.len(),
                    self.n_uavs
                ));
            }
        }
        self.powers.validate()?;
        self.weights.validate()?;
        self.learner.validate()?;
        Ok(())
    }

    pub fn initial_state(&self) -> Partition {
        self.initial_partition
            .clone()
            .unwrap_or_else(|| Partition::all_fusion(self.n_uavs))
    }
}

/// One metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u64,
    pub partition_bits: String,
    pub r_sf: f64,
    pub r_pu: f64,
    pub sum_rate: f64,
    pub fairness: f64,
    pub reward: f64,
    /// UAVs whose task differs from the previous slot (the initial state before slot 0).
    pub n_switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged_at: Option<u64>,
    pub final_partition: String,
    /// Final partition is in the oracle's exact best set.
    pub oracle_match: bool,
    pub oracle_tie_count: usize,
    /// `best_objective - objective(final_partition)`, zero on a match.
    pub objective_gap: f64,
    pub seed: u64,
    pub objective: ObjectiveKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub records: Vec<SlotRecord>,
    pub summary: RunSummary,
}

impl RunMetrics {
    pub fn switches(&self) -> Vec<usize> {
        self.records.iter().map(|r| r.n_switches).collect()
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub agents: Vec<Agent>,
    pub topology: Topology,
    /// Realization at slot 0; the only one under static draws.
    pub channels: ChannelRealization,
    /// Oracle under the configured objective, on `channels`.
    pub oracle: OracleResult,
    /// Oracle under the other objective, for reporting.
    pub alt_oracle: OracleResult,
}

/// Earliest slot from which `n_switches` stays 0 to the end of the run,
/// provided at least `window` slots remain.
pub fn detect_convergence(switches: &[usize], window: usize) -> Option<u64> {
    let tail = switches.iter().rev().take_while(|&&s| s == 0).count();
    if tail == 0 || tail < window {
        return None;
    }
    Some((switches.len() - tail) as u64)
}

pub fn run(config: &RunConfig) -> Result<RunOutput, SimError> {
    config.validate()?;
    let n = config.n_uavs;
    let plan = SeedPlan::new(config.master_seed);
    let topology = build_topology(n, config.area, &config.placement, plan.topology())?;
    let channels = sample_channels_with_mode(&topology, plan.channels(), config.draw_mode);
    let mut agents = (0..n)
        .map(|i| Agent::new(i, n, plan.agent(i)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut state = config.initial_state();
    let mut history = RateHistory::default();
    let mut records = Vec::with_capacity(config.n_iterations as usize);
    let mut redrawn;

    for slot in 0..config.n_iterations {
        let slot_channels = match config.draw_mode {
            DrawMode::Static => &channels,
            DrawMode::PerSlot => {
                redrawn =
                    sample_channels_with_mode(&topology, plan.channels_at(slot), DrawMode::PerSlot);
                &redrawn
            }
        };
        let s = state.index()?;
        let tasks = agents
            .iter_mut()
            .map(|a| a.act(s, &config.learner))
            .collect::<Result<Vec<_>, _>>()?;
        let per_agent = tasks
            .iter()
            .zip(state.labels())
            .filter(|(new, old)| new != old)
            .count();
        let joint = Partition::new(tasks);

        let out = step(
            &state,
            &joint,
            slot_channels,
            &config.powers,
            &history,
            &config.weights,
            slot,
        )?;
        let hamming = out.next_state.hamming(&state);
        if hamming != per_agent {
            return Err(SimError::SwitchMismatch {
                slot,
                hamming,
                per_agent,
            });
        }

        let s_next = out.next_state.index()?;
        for (agent, task) in agents.iter_mut().zip(joint.labels()) {
            agent.learn(s, *task, out.feedback.reward, s_next, &config.learner)?;
        }

        let (n_f, n_p) = out.next_state.counts();
        let rates = out.feedback.rates;
        records.push(SlotRecord {
            slot,
            partition_bits: out.next_state.bit_string(),
            r_sf: rates.r_sf,
            r_pu: rates.r_pu,
            sum_rate: rates.sum(),
            fairness: crate::reward::jain_fairness(n_f, n_p)?,
            reward: out.feedback.reward,
            n_switches: hamming,
        });
        state = out.next_state;
        history = out.history;
    }

    let alt_kind = match config.objective {
        ObjectiveKind::SumRate => ObjectiveKind::WeightedGainSteady,
        ObjectiveKind::WeightedGainSteady => ObjectiveKind::SumRate,
    };
    let oracle = Oracle::new(config.objective).keep_table(false).enumerate(
        &channels,
        &config.powers,
        &config.weights,
    )?;
    let alt_oracle = Oracle::new(alt_kind).keep_table(false).enumerate(
        &channels,
        &config.powers,
        &config.weights,
    )?;

    let switches: Vec<usize> = records.iter().map(|r| r.n_switches).collect();
    let converged_at = detect_convergence(&switches, config.convergence_window);
    let terms = RelayTerms::new(&channels, &config.powers)?;
    let comparison = compare(&oracle, &terms, &state, &config.weights)?;
    let summary = RunSummary {
        converged_at,
        final_partition: state.bit_string(),
        oracle_match: comparison.matched,
        oracle_tie_count: oracle.tie_count(),
        objective_gap: comparison.gap,
        seed: config.master_seed,
        objective: config.objective,
    };

    Ok(RunOutput {
        metrics: RunMetrics { records, summary },
        agents,
        topology,
        channels,
        oracle,
        alt_oracle,
    })
}

/// Oracle verdict for one objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCheck {
    pub objective: ObjectiveKind,
    pub matched: bool,
    pub tie_count: usize,
    pub gap: f64,
}

fn compare(
    oracle: &OracleResult,
    terms: &RelayTerms,
    partition: &Partition,
    weights: &GainWeights,
) -> Result<ObjectiveCheck, SimError> {
    let row = Oracle::new(oracle.objective_kind).evaluate(terms, partition, weights)?;
    let matched = oracle.is_best(partition);
    Ok(ObjectiveCheck {
        objective: oracle.objective_kind,
        matched,
        tie_count: oracle.tie_count(),
        gap: if matched {
            0.0
        } else {
            oracle.best_objective - row.objective
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub converged_at: u64,
    pub final_partition: String,
    /// One entry per oracle supplied.
    pub checks: Vec<ObjectiveCheck>,
    /// The agents' greedy choices in the final state reproduce the final state.
    pub greedy_fixed_point: bool,
}

impl CertificationReport {
    pub fn matched(&self, objective: ObjectiveKind) -> Option<bool> {
        self.checks
            .iter()
            .find(|c| c.objective == objective)
            .map(|c| c.matched)
    }
}

/// Certify a converged run against one or more oracle results.
pub fn certify(
    output: &RunOutput,
    powers: &PowerProfile,
    weights: &GainWeights,
) -> Result<CertificationReport, SimError> {
    let metrics = &output.metrics;
    let converged_at = metrics.summary.converged_at.ok_or(SimError::NotConverged)?;
    let final_state = Partition::parse_bits(&metrics.summary.final_partition)?;
    let terms = RelayTerms::new(&output.channels, powers)?;
    let checks = [&output.oracle, &output.alt_oracle]
        .into_iter()
        .map(|o| compare(o, &terms, &final_state, weights))
        .collect::<Result<Vec<_>, _>>()?;
    let greedy = greedy_joint_action(&output.agents, final_state.index()?);
    Ok(CertificationReport {
        converged_at,
        final_partition: final_state.bit_string(),
        checks,
        greedy_fixed_point: greedy == final_state,
    })
}
