//! Independent learner run by each UAV.
//!
//! A UAV keeps a Q-table over `(partition, own action)` only, which is
//! `2^N x 2` cells instead of the `2^N x 2^N` a global table would need.
//! Nothing about the other UAVs' actions is ever read.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Partition, Task};

/// Largest network whose per-agent table we allocate (`2^20 x 2` cells).
pub const MAX_TABLE_UAVS: usize = 20;

/// Actions available to every UAV: join the fusion group or the primary group.
pub const N_ACTIONS: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("state index {index} out of range for a table with {n_states} states")]
    IndexOutOfRange { index: usize, n_states: usize },
    #[error("action {0} is not 0 or 1")]
    InvalidAction(usize),
    #[error("a Q-table for {0} UAVs is too large (limit {MAX_TABLE_UAVS})")]
    TableTooLarge(usize),
    #[error("invalid learner parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerParams {
    /// Learning rate, `0 <= alpha < 1`.
    pub alpha: f64,
    /// Discount factor, `0 <= beta < 1`.
    pub beta: f64,
    /// Exploration constant, `0 < c < 1`.
    pub c: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            beta: 0.9,
            c: 0.5,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<(), AgentError> {
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.alpha) {
            return Err(AgentError::InvalidParams(format!(
                "alpha = {} not in [0, 1)",
                self.alpha
            )));
        }
        if !unit(self.beta) {
            return Err(AgentError::InvalidParams(format!(
                "beta = {} not in [0, 1)",
                self.beta
            )));
        }
        if !(self.c > 0.0 && self.c < 1.0) {
            return Err(AgentError::InvalidParams(format!(
                "c = {} not in (0, 1)",
                self.c
            )));
        }
        Ok(())
    }
}

/// Dense local Q-table plus per-state visit counts; starts at all zeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_uavs: usize,
    values: Vec<f64>,
    visits: Vec<u64>,
}

impl QTable {
    pub fn new(n_uavs: usize) -> Result<Self, AgentError> {
        if n_uavs > MAX_TABLE_UAVS {
            return Err(AgentError::TableTooLarge(n_uavs));
        }
        let n_states = 1usize << n_uavs;
        Ok(Self {
            n_uavs,
            values: vec![0.0; n_states * N_ACTIONS],
            visits: vec![0; n_states],
        })
    }

    pub fn n_states(&self) -> usize {
        self.visits.len()
    }

    /// Number of value cells allocated.
    pub fn cell_count(&self) -> usize {
        self.values.len()
    }

    pub fn n_uavs(&self) -> usize {
        self.n_uavs
    }

    fn check(&self, state: usize) -> Result<(), AgentError> {
        if state < self.n_states() {
            Ok(())
        } else {
            Err(AgentError::IndexOutOfRange {
                index: state,
                n_states: self.n_states(),
            })
        }
    }

    pub fn q(&self, state: usize, action: usize) -> f64 {
        self.values[state * N_ACTIONS + action]
    }

    /// `[q(s, 0), q(s, 1)]`.
    pub fn row(&self, state: usize) -> [f64; N_ACTIONS] {
        let base = state * N_ACTIONS;
        [self.values[base], self.values[base + 1]]
    }

    pub fn visits(&self, state: usize) -> u64 {
        self.visits[state]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `max_a q(s, a)`.
    pub fn max_q(&self, state: usize) -> f64 {
        let [q0, q1] = self.row(state);
        q0.max(q1)
    }

    /// Argmax with ties going to the lowest action index.
    pub fn greedy_action(&self, state: usize) -> usize {
        let [q0, q1] = self.row(state);
        usize::from(q1 > q0)
    }

    /// Exploration probability `c / max(n(s), 1)` at the current visit count.
    pub fn epsilon(&self, state: usize, c: f64) -> f64 {
        epsilon(c, self.visits[state])
    }
}

/// `c / max(n, 1)`: non-increasing in `n`, vanishing as `n` grows.
pub fn epsilon(c: f64, visits: u64) -> f64 {
    c / visits.max(1) as f64
}

/// Decaying epsilon-greedy choice in `state`; counts the visit first.
///
/// Randomness protocol: one uniform `f64` draw per call decides whether to
/// explore; only when exploring, one `random_range(0..2)` picks the action.
pub fn select_action<R: Rng + ?Sized>(
    table: &mut QTable,
    state: usize,
    params: &LearnerParams,
    rng: &mut R,
) -> Result<usize, AgentError> {
    table.check(state)?;
    table.visits[state] += 1;
    let eps = table.epsilon(state, params.c);
    if rng.random::<f64>() < eps {
        Ok(rng.random_range(0..N_ACTIONS))
    } else {
        Ok(table.greedy_action(state))
    }
}

/// Q-learning update of the visited cell only:
/// `q(s,a) <- (1 - alpha) q(s,a) + alpha (r + beta max_a' q(s', a'))`.
pub fn update(
    table: &mut QTable,
    state: usize,
    action: usize,
    reward: f64,
    next_state: usize,
    params: &LearnerParams,
) -> Result<(), AgentError> {
    table.check(state)?;
    table.check(next_state)?;
    if action >= N_ACTIONS {
        return Err(AgentError::InvalidAction(action));
    }
    let target = reward + params.beta * table.max_q(next_state);
    let cell = &mut table.values[state * N_ACTIONS + action];
    *cell = (1.0 - params.alpha) * *cell + params.alpha * target;
    Ok(())
}

/// Greedy action for every state, lowest index on ties.
pub fn greedy_policy(table: &QTable) -> Vec<usize> {
    (0..table.n_states())
        .map(|s| table.greedy_action(s))
        .collect()
}

/// One UAV: its table and its own random stream.
#[derive(Debug, Clone)]
pub struct Agent {
    index: usize,
    table: QTable,
    rng: ChaCha8Rng,
}

impl Agent {
    pub fn new(index: usize, n_uavs: usize, seed: u64) -> Result<Self, AgentError> {
        Ok(Self {
            index,
            table: QTable::new(n_uavs)?,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    /// Pick this UAV's task for the observed state.
    pub fn act(&mut self, state: usize, params: &LearnerParams) -> Result<Task, AgentError> {
        select_action(&mut self.table, state, params, &mut self.rng).map(Task::from_action)
    }

    pub fn learn(
        &mut self,
        state: usize,
        action: Task,
        reward: f64,
        next_state: usize,
        params: &LearnerParams,
    ) -> Result<(), AgentError> {
        update(
            &mut self.table,
            state,
            action.action(),
            reward,
            next_state,
            params,
        )
    }

    pub fn greedy_task(&self, state: usize) -> Task {
        Task::from_action(self.table.greedy_action(state))
    }
}

/// Compose every agent's greedy task in `state` into a partition.
pub fn greedy_joint_action(agents: &[Agent], state: usize) -> Partition {
    Partition::new(agents.iter().map(|a| a.greedy_task(state)).collect())
}
