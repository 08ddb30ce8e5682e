//! Exhaustive search over all `2^N` partitions.
//!
//! Used to certify where the learners end up. Every partition is scored with
//! the same code path and the same floating-point evaluation order, so exact
//! ties are detected with `==`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{index_to_state, Partition};
use crate::rate::{PowerProfile, RateError, RatePair, RelayTerms};
use crate::reward::{jain_fairness, GainWeights};
use crate::topology::ChannelRealization;

/// Enumeration guard.
pub const MAX_ORACLE_UAVS: usize = 24;

/// Default relative tolerance for reporting near-ties.
pub const NEAR_TIE_RTOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("exhaustive search over 2^{0} partitions exceeds the guard of {MAX_ORACLE_UAVS} UAVs")]
    TooManyAgents(usize),
    #[error(transparent)]
    Rate(#[from] RateError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    /// `r_sf + r_pu`.
    SumRate,
    /// `gamma1 r_sf + gamma2 r_pu + gamma3 fairness`, the gain once the
    /// running means have settled onto the current rates' levels.
    #[default]
    #[serde(rename = "weighted", alias = "weighted_gain_steady")]
    WeightedGainSteady,
}

impl ObjectiveKind {
    pub fn score(&self, rates: &RatePair, fairness: f64, weights: &GainWeights) -> f64 {
        match self {
            ObjectiveKind::SumRate => rates.r_sf + rates.r_pu,
            ObjectiveKind::WeightedGainSteady => {
                weights.gamma1 * rates.r_sf
                    + weights.gamma2 * rates.r_pu
                    + weights.gamma3 * fairness
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ObjectiveKind::SumRate => "sum_rate",
            ObjectiveKind::WeightedGainSteady => "weighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub partition: Partition,
    pub rates: RatePair,
    pub fairness: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    /// Every partition attaining `best_objective` exactly, by ascending state index.
    pub best_partitions: Vec<Partition>,
    pub best_objective: f64,
    pub objective_kind: ObjectiveKind,
    /// Partitions within the near-tie tolerance of the best (a superset of `best_partitions`).
    pub near_best: Vec<Partition>,
    /// Number of objective evaluations performed.
    pub evaluations: usize,
    /// Per-partition table indexed by state index, when requested.
    pub rows: Option<Vec<OracleRow>>,
}

impl OracleResult {
    pub fn is_best(&self, partition: &Partition) -> bool {
        self.best_partitions.contains(partition)
    }

    pub fn tie_count(&self) -> usize {
        self.best_partitions.len()
    }
}

/// Configurable enumeration.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub objective: ObjectiveKind,
    pub keep_table: bool,
    pub near_tie_rtol: f64,
}

impl Oracle {
    pub fn new(objective: ObjectiveKind) -> Self {
        Self {
            objective,
            keep_table: true,
            near_tie_rtol: NEAR_TIE_RTOL,
        }
    }

    pub fn keep_table(mut self, keep: bool) -> Self {
        self.keep_table = keep;
        self
    }

    pub fn near_tie_rtol(mut self, rtol: f64) -> Self {
        self.near_tie_rtol = rtol;
        self
    }

    /// Score one partition exactly as the enumeration does.
    pub fn evaluate(
        &self,
        terms: &RelayTerms,
        partition: &Partition,
        weights: &GainWeights,
    ) -> Result<OracleRow, OracleError> {
        let rates = terms.rates(partition)?;
        let (n_f, n_p) = partition.counts();
        let fairness = jain_fairness(n_f, n_p).expect("partition has at least one UAV");
        Ok(OracleRow {
            partition: partition.clone(),
            rates,
            fairness,
            objective: self.objective.score(&rates, fairness, weights),
        })
    }

    pub fn enumerate(
        &self,
        channels: &ChannelRealization,
        powers: &PowerProfile,
        weights: &GainWeights,
    ) -> Result<OracleResult, OracleError> {
        let n = channels.n_uavs();
        if n > MAX_ORACLE_UAVS {
            return Err(OracleError::TooManyAgents(n));
        }
        let terms = RelayTerms::new(channels, powers)?;
        let total = 1usize << n;
        // Ordered collect keeps the merge independent of thread scheduling.
        let rows: Vec<OracleRow> = (0..total)
            .into_par_iter()
            .map(|idx| {
                let part = index_to_state(idx, n).expect("index below 2^n");
                self.evaluate(&terms, &part, weights)
            })
            .collect::<Result<_, _>>()?;

        let best_objective = rows
            .iter()
            .map(|r| r.objective)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_partitions = rows
            .iter()
            .filter(|r| r.objective == best_objective)
            .map(|r| r.partition.clone())
            .collect();
        let slack = self.near_tie_rtol * best_objective.abs();
        let near_best = rows
            .iter()
            .filter(|r| best_objective - r.objective <= slack)
            .map(|r| r.partition.clone())
            .collect();
        Ok(OracleResult {
            best_partitions,
            best_objective,
            objective_kind: self.objective,
            near_best,
            evaluations: rows.len(),
            rows: self.keep_table.then_some(rows),
        })
    }
}

/// Enumerate with the per-partition table kept and default tie tolerance.
pub fn enumerate(
    channels: &ChannelRealization,
    powers: &PowerProfile,
    weights: &GainWeights,
    objective: ObjectiveKind,
) -> Result<OracleResult, OracleError> {
    Oracle::new(objective).enumerate(channels, powers, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::Task;
    use crate::rate::rates_for_partition;
    use crate::topology::{build_topology, sample_channels, Area, FixedNodes, Placement};

    fn seeded(n: usize, seed: u64) -> (ChannelRealization, PowerProfile) {
        let topo = build_topology(
            n,
            Area::default(),
            &Placement::Random(FixedNodes::default()),
            seed,
        )
        .unwrap();
        (
            sample_channels(&topo, seed ^ 0xabc),
            PowerProfile::default_for(n),
        )
    }

    #[test]
    fn single_uav_prefers_relaying_for_the_primary_pair() {
        let (ch, pw) = seeded(1, 4);
        let res = enumerate(&ch, &pw, &GainWeights::default(), ObjectiveKind::SumRate).unwrap();
        let rows = res.rows.as_ref().unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].objective, 0.0);
        assert!(rows[1].objective > 0.0);
        assert_eq!(
            res.best_partitions,
            vec![Partition::uniform(1, Task::Primary)]
        );
        assert_eq!(res.tie_count(), 1);
    }

    #[test]
    fn uav_near_the_fusion_axis_joins_fusion() {
        let f = FixedNodes::default();
        let topo = build_topology(
            2,
            Area::default(),
            &Placement::Explicit(vec![
                f.source,
                f.fusion,
                f.pu_tx,
                f.pu_rx,
                crate::topology::Point::new(50.0, 88.0),
                crate::topology::Point::new(50.0, 12.0),
            ]),
            0,
        )
        .unwrap();
        let ch = sample_channels(&topo, 21);
        let res = enumerate(
            &ch,
            &PowerProfile::default_for(2),
            &GainWeights::default(),
            ObjectiveKind::WeightedGainSteady,
        )
        .unwrap();
        assert_eq!(
            res.best_partitions,
            vec![Partition::parse_bits("01").unwrap()]
        );
    }

    #[test]
    fn six_uav_table_rows_are_recomputable() {
        let (ch, pw) = seeded(6, 9);
        let w = GainWeights::default();
        for kind in [ObjectiveKind::SumRate, ObjectiveKind::WeightedGainSteady] {
            let res = enumerate(&ch, &pw, &w, kind).unwrap();
            assert_eq!(res.evaluations, 64);
            let rows = res.rows.unwrap();
            assert_eq!(rows.len(), 64);
            for (idx, row) in rows.iter().enumerate() {
                assert_eq!(row.partition.index().unwrap(), idx);
                assert_eq!(
                    row.rates,
                    rates_for_partition(&ch, &pw, &row.partition).unwrap()
                );
                let (nf, np) = row.partition.counts();
                let fair = 0.5 * ((nf + np) * (nf + np)) as f64 / (nf * nf + np * np) as f64;
                let expected = match kind {
                    ObjectiveKind::SumRate => row.rates.r_sf + row.rates.r_pu,
                    ObjectiveKind::WeightedGainSteady => {
                        2.0 * row.rates.r_sf + 2.0 * row.rates.r_pu + 0.4 * fair
                    }
                };
                assert!((row.objective - expected).abs() <= 1e-12 * expected.abs().max(1.0));
                assert!(row.objective <= res.best_objective);
            }
            for best in &res.best_partitions {
                assert_eq!(rows[best.index().unwrap()].objective, res.best_objective);
                assert!(res.near_best.contains(best));
            }
        }
    }

    #[test]
    fn all_fusion_is_never_the_sum_rate_optimum() {
        for seed in 0..20 {
            let (ch, pw) = seeded(4, seed);
            let res = enumerate(&ch, &pw, &GainWeights::default(), ObjectiveKind::SumRate).unwrap();
            assert!(!res.is_best(&Partition::all_fusion(4)));
        }
    }

    #[test]
    fn exact_ties_are_all_reported() {
        // Identical UAVs: every 1-1 split scores the same.
        let ch = ChannelRealization::from_power_gains(&[(0.5, 0.5, 0.5, 0.5); 2]);
        let res = enumerate(
            &ch,
            &PowerProfile::uniform(2, 1.0, 1.0, 1.0),
            &GainWeights::default(),
            ObjectiveKind::WeightedGainSteady,
        )
        .unwrap();
        assert_eq!(res.tie_count(), 2);
        assert_eq!(
            res.best_partitions,
            vec![
                Partition::parse_bits("10").unwrap(),
                Partition::parse_bits("01").unwrap()
            ]
        );
    }

    #[test]
    fn guard_rejects_large_networks() {
        let ch = ChannelRealization::from_power_gains(&vec![(1.0, 1.0, 1.0, 1.0); 25]);
        let err = enumerate(
            &ch,
            &PowerProfile::default_for(25),
            &GainWeights::default(),
            ObjectiveKind::SumRate,
        )
        .unwrap_err();
        assert_eq!(err, OracleError::TooManyAgents(25));
    }

    #[test]
    fn table_can_be_dropped() {
        let (ch, pw) = seeded(3, 1);
        let res = Oracle::new(ObjectiveKind::SumRate)
            .keep_table(false)
            .enumerate(&ch, &pw, &GainWeights::default())
            .unwrap();
        assert!(res.rows.is_none());
        assert_eq!(res.evaluations, 8);
    }
}
