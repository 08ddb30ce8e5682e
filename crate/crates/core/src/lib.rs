//! Distributed task allocation for a UAV relay network.
//!
//! `N` UAVs each run an independent tabular Q-learner and decide, slot by
//! slot, whether to relay for a terrestrial primary transmitter/receiver pair
//! (earning leased spectrum) or to relay their own source's traffic to the
//! fusion center. The reward each slot is a fairness-weighted rate-gain signal
//! computed from amplify-and-forward achievable rates.
//!
//! Module map:
//!
//! * [`topology`]: mission geometry and Rayleigh channel draws.
//! * [`rate`]: amplify-and-forward achievable rates for both relay groups.
//! * [`reward`]: Jain fairness, running rate history and the per-slot gain.
//! * [`environment`]: partitions, deterministic transitions and feedback.
//! * [`agent`]: per-UAV Q-table, decaying epsilon-greedy selection, updates.
//! * [`oracle`]: exhaustive enumeration of all `2^N` partitions.
//! * [`simulator`]: the slot loop, metrics, convergence and certification.

pub mod agent;
pub mod environment;
pub mod oracle;
pub mod rate;
pub mod reward;
pub mod seed;
pub mod simulator;
pub mod topology;

pub use num_complex::Complex64;

pub use agent::{
    epsilon, greedy_joint_action, greedy_policy, select_action, update, Agent, AgentError,
    LearnerParams, QTable, MAX_TABLE_UAVS,
};
pub use environment::{
    index_to_state, state_index, step, transition, EnvError, FeedbackMessage, Partition,
    StepOutcome, Task,
};
pub use oracle::{
    enumerate, ObjectiveKind, Oracle, OracleError, OracleResult, OracleRow, MAX_ORACLE_UAVS,
};
pub use rate::{
    af_term, rate_pu_multi, rate_sf_multi, rates_for_partition, PowerProfile, RateError, RatePair,
    RelayTerms,
};
pub use reward::{gain, jain_fairness, update_history, GainWeights, RateHistory, RewardError};
pub use seed::SeedPlan;
pub use simulator::{
    certify, detect_convergence, run, CertificationReport, ObjectiveCheck, RunConfig, RunMetrics,
    RunOutput, RunSummary, SimError, SlotRecord, DEFAULT_CONVERGENCE_WINDOW,
};
pub use topology::{
    build_topology, sample_channels, sample_channels_with_mode, Area, ChannelRealization, DrawMode,
    FixedNodes, NodeId, Placement, Point, Topology, TopologyError, UavLinks,
};
