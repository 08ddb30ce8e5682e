//! Markov decision process scaffolding.
//!
//! The state is the current task partition and a joint action selects the
//! next one, so the transition is `delta(s, u) = u`. At the end of every slot
//! the fusion center and the primary receiver broadcast a [`FeedbackMessage`]
//! with the reward and the realized partition.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rate::{rates_for_partition, PowerProfile, RateError, RatePair};
use crate::reward::{gain, update_history, GainWeights, RateHistory, RewardError};
use crate::topology::ChannelRealization;

/// Largest partition length that still fits a `usize` state index.
pub const MAX_PARTITION_LEN: usize = usize::BITS as usize - 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("partition length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("state index {index} out of range for {n} UAVs")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("partition length {0} cannot be indexed")]
    TooLong(usize),
    #[error("invalid partition string {0:?}, expected only '0' and '1'")]
    Parse(String),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

/// Task group of one UAV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum Task {
    /// Relay the UAV network's own source to the fusion center.
    Fusion = 0,
    /// Relay for the primary transmitter-receiver pair.
    Primary = 1,
}

impl Task {
    pub fn from_action(action: usize) -> Task {
        if action == 0 {
            Task::Fusion
        } else {
            Task::Primary
        }
    }

    pub fn action(self) -> usize {
        self as usize
    }
}

/// Task label per UAV; doubles as MDP state and joint action.
///
/// Encodes to a state index with bit `j` holding the label of UAV `j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Partition {
    labels: Vec<Task>,
}

impl Partition {
    pub fn new(labels: Vec<Task>) -> Self {
        Self { labels }
    }

    pub fn uniform(n: usize, task: Task) -> Self {
        Self::new(vec![task; n])
    }

    pub fn all_fusion(n: usize) -> Self {
        Self::uniform(n, Task::Fusion)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Task] {
        &self.labels
    }

    pub fn label(&self, uav: usize) -> Task {
        self.labels[uav]
    }

    pub fn members(&self, task: Task) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |(_, &t)| t == task)
            .map(|(j, _)| j)
    }

    /// `(n_fusion, n_primary)`.
    pub fn counts(&self) -> (usize, usize) {
        let primary = self.members(Task::Primary).count();
        (self.len() - primary, primary)
    }

    /// Number of UAVs whose label differs.
    pub fn hamming(&self, other: &Partition) -> usize {
        self.labels
            .iter()
            .zip(&other.labels)
            .filter(|(a, b)| a != b)
            .count()
    }

    /// Bit string with UAV 0 leftmost, e.g. `"101001"`.
    pub fn bit_string(&self) -> String {
        self.labels
            .iter()
            .map(|t| match t {
                Task::Fusion => '0',
                Task::Primary => '1',
            })
            .collect()
    }

    pub fn parse_bits(s: &str) -> Result<Self, EnvError> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(Task::Fusion),
                '1' => Ok(Task::Primary),
                _ => Err(EnvError::Parse(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::new)
    }

    pub fn index(&self) -> Result<usize, EnvError> {
        state_index(self)
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.bit_string())
    }
}

/// Encode `partition` as `sum_j label_j * 2^j`.
pub fn state_index(partition: &Partition) -> Result<usize, EnvError> {
    if partition.len() > MAX_PARTITION_LEN {
        return Err(EnvError::TooLong(partition.len()));
    }
    Ok(partition
        .labels
        .iter()
        .enumerate()
        .fold(0usize, |acc, (j, t)| acc | (t.action() << j)))
}

/// Inverse of [`state_index`].
pub fn index_to_state(index: usize, n: usize) -> Result<Partition, EnvError> {
    if n > MAX_PARTITION_LEN {
        return Err(EnvError::TooLong(n));
    }
    if index >> n != 0 {
        return Err(EnvError::IndexOutOfRange { index, n });
    }
    Ok(Partition::new(
        (0..n)
            .map(|j| Task::from_action((index >> j) & 1))
            .collect(),
    ))
}

/// Deterministic transition: the next state is the jointly selected partition.
pub fn transition(state: &Partition, joint_action: &Partition) -> Result<Partition, EnvError> {
    if state.len() != joint_action.len() {
        return Err(EnvError::LengthMismatch {
            expected: state.len(),
            got: joint_action.len(),
        });
    }
    Ok(joint_action.clone())
}

/// Broadcast that closes a slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub reward: f64,
    /// The partition this reward was earned on.
    pub partition: Partition,
    pub rates: RatePair,
    pub slot: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Partition,
    pub feedback: FeedbackMessage,
    pub history: RateHistory,
}

/// Advance one slot.
///
/// The reward is the gain of the post-transition partition, measured against
/// the history *before* this slot's rates are folded in.
pub fn step(
    state: &Partition,
    joint_action: &Partition,
    channels: &ChannelRealization,
    powers: &PowerProfile,
    history: &RateHistory,
    weights: &GainWeights,
    slot: u64,
) -> Result<StepOutcome, EnvError> {
    let next_state = transition(state, joint_action)?;
    let rates = rates_for_partition(channels, powers, &next_state)?;
    let reward = gain(&rates, history, next_state.counts(), weights)?;
    let history = update_history(history, &rates);
    Ok(StepOutcome {
        feedback: FeedbackMessage {
            reward,
            partition: next_state.clone(),
            rates,
            slot,
        },
        next_state,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::af_term;
    use crate::reward::jain_fairness;

    fn p(bits: &str) -> Partition {
        Partition::parse_bits(bits).unwrap()
    }

    fn unit_channels(n: usize) -> ChannelRealization {
        ChannelRealization::from_power_gains(&vec![(1.0, 1.0, 1.0, 1.0); n])
    }

    #[test]
    fn transition_returns_the_joint_action() {
        assert_eq!(transition(&p("01"), &p("10")).unwrap(), p("10"));
        assert_eq!(transition(&p("11"), &p("11")).unwrap(), p("11"));
        assert_eq!(
            transition(&p("01"), &p("100")).unwrap_err(),
            EnvError::LengthMismatch {
                expected: 2,
                got: 3
            }
        );
    }

    #[test]
    fn transition_ignores_the_current_state_exhaustively() {
        for s in 0..4 {
            for u in 0..4 {
                let next = transition(
                    &index_to_state(s, 2).unwrap(),
                    &index_to_state(u, 2).unwrap(),
                )
                .unwrap();
                assert_eq!(state_index(&next).unwrap(), u);
            }
        }
    }

    #[test]
    fn state_encoding_puts_uav0_in_bit0() {
        assert_eq!(state_index(&p("01")).unwrap(), 2);
        assert_eq!(state_index(&p("10")).unwrap(), 1);
        assert_eq!(index_to_state(0, 3).unwrap(), Partition::all_fusion(3));
        assert_eq!(
            index_to_state(4, 2).unwrap_err(),
            EnvError::IndexOutOfRange { index: 4, n: 2 }
        );
    }

    #[test]
    fn encoding_round_trips_over_all_six_uav_states() {
        for idx in 0..64 {
            let part = index_to_state(idx, 6).unwrap();
            assert_eq!(state_index(&part).unwrap(), idx);
            assert_eq!(Partition::parse_bits(&part.bit_string()).unwrap(), part);
        }
    }

    #[test]
    fn counts_and_hamming() {
        let a = p("101001");
        assert_eq!(a.counts(), (3, 3));
        assert_eq!(a.hamming(&p("001011")), 2);
        assert_eq!(a.members(Task::Primary).collect::<Vec<_>>(), vec![0, 2, 5]);
        assert!(Partition::parse_bits("10x").is_err());
    }

    #[test]
    fn all_fusion_first_slot_pays_only_the_fairness_floor() {
        let w = GainWeights::default();
        let out = step(
            &p("00"),
            &p("00"),
            &unit_channels(2),
            &PowerProfile::uniform(2, 1.0, 1.0, 2.0),
            &RateHistory::default(),
            &w,
            0,
        )
        .unwrap();
        assert_eq!(
            out.feedback.rates,
            RatePair {
                r_sf: 0.0,
                r_pu: 0.0
            }
        );
        assert_eq!(out.feedback.reward, w.gamma3 * 0.5);
        assert_eq!(out.history.count, 1);
    }

    #[test]
    fn mixed_step_matches_a_hand_evaluated_gain_chain() {
        let channels = ChannelRealization::from_power_gains(&[
            (0.04, 0.09, 0.01, 0.02),
            (0.03, 0.05, 0.06, 0.07),
        ]);
        let powers = PowerProfile::uniform(2, 1.0, 1.0, 2.0);
        let w = GainWeights::default();
        let prior = RateHistory {
            sf_mean: 0.01,
            pu_mean: 0.02,
            count: 3,
        };
        let out = step(&p("00"), &p("01"), &channels, &powers, &prior, &w, 5).unwrap();

        // UAV 0 relays source->fusion, UAV 1 relays for the primary pair.
        let r_sf = (1.0f64 + (1.0 * 0.04 * 2.0 * 0.09) / (1.0 + 0.04 + 2.0 * 0.09)).log2();
        let r_pu = (1.0f64 + (1.0 * 0.06 * 2.0 * 0.07) / (1.0 + 0.06 + 2.0 * 0.07)).log2();
        let expected = 2.0 * (r_sf - 0.01) + 2.0 * (r_pu - 0.02) + 0.4 * 1.0;
        assert!((out.feedback.reward - expected).abs() < 1e-15);
        assert_eq!(out.feedback.slot, 5);
        assert_eq!(out.next_state, p("01"));
        assert!((out.history.sf_mean - (0.03 + r_sf) / 4.0).abs() < 1e-15);

        // Self-consistency: the reward is recomputable from the message alone.
        let again = gain(
            &out.feedback.rates,
            &prior,
            out.feedback.partition.counts(),
            &w,
        )
        .unwrap();
        assert_eq!(again, out.feedback.reward);
        assert_eq!(jain_fairness(1, 1).unwrap(), 1.0);
        assert!(af_term(1.0, 0.04, 2.0, 0.09) > 0.0);
    }

    #[test]
    fn repeated_action_under_static_channels_repeats_rates() {
        let channels = unit_channels(3);
        let powers = PowerProfile::uniform(3, 1.0, 1.0, 2.0);
        let w = GainWeights::default();
        let first = step(
            &p("000"),
            &p("011"),
            &channels,
            &powers,
            &RateHistory::default(),
            &w,
            0,
        )
        .unwrap();
        let second = step(
            &first.next_state,
            &p("011"),
            &channels,
            &powers,
            &first.history,
            &w,
            1,
        )
        .unwrap();
        assert_eq!(first.feedback.rates, second.feedback.rates);
    }
}
