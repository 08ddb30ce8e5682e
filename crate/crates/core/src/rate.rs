//! Amplify-and-forward achievable rates.
//!
//! Powers are SNR-normalized: receiver noise has unit variance, so a rate is
//! `log2(1 + P|h_direct|^2 + sum of per-relay AF terms)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{Partition, Task};
use crate::topology::ChannelRealization;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RateError {
    #[error("UAV index {index} out of range for {n} UAVs")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("partition has {got} labels but the network has {expected} UAVs")]
    LengthMismatch { expected: usize, got: usize },
    #[error("power profile covers {powers} UAVs but the channels cover {channels}")]
    ProfileMismatch { powers: usize, channels: usize },
    #[error("invalid power profile: {0}")]
    InvalidPowers(String),
}

/// Fixed transmit powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub source: f64,
    pub pu_tx: f64,
    pub uavs: Vec<f64>,
}

impl PowerProfile {
    pub const DEFAULT_SOURCE: f64 = 1.0;
    pub const DEFAULT_PU_TX: f64 = 1.0;
    pub const DEFAULT_UAV: f64 = 2.0;

    pub fn uniform(n_uavs: usize, source: f64, pu_tx: f64, uav: f64) -> Self {
        Self {
            source,
            pu_tx,
            uavs: vec![uav; n_uavs],
        }
    }

    pub fn default_for(n_uavs: usize) -> Self {
        Self::uniform(
            n_uavs,
            Self::DEFAULT_SOURCE,
            Self::DEFAULT_PU_TX,
            Self::DEFAULT_UAV,
        )
    }

    /// All powers positive and finite; source and primary transmitter no
    /// stronger than the weakest UAV.
    pub fn validate(&self) -> Result<(), RateError> {
        let bad = |what: &str, v: f64| RateError::InvalidPowers(format!("{what} = {v}"));
        for (what, v) in [("source", self.source), ("pu_tx", self.pu_tx)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(what, v));
            }
        }
        if self.uavs.is_empty() {
            return Err(RateError::InvalidPowers("no UAV powers".into()));
        }
        for (j, &v) in self.uavs.iter().enumerate() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(&format!("uav[{j}]"), v));
            }
        }
        let weakest = self.uavs.iter().copied().fold(f64::INFINITY, f64::min);
        if self.source > weakest || self.pu_tx > weakest {
            return Err(RateError::InvalidPowers(format!(
                "source ({}) and pu_tx ({}) must not exceed the weakest UAV ({weakest})",
                self.source, self.pu_tx
            )));
        }
        Ok(())
    }
}

/// Achieved rates of the fusion link and the primary link, bits/s/Hz.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RatePair {
    pub r_sf: f64,
    pub r_pu: f64,
}

impl RatePair {
    pub fn sum(&self) -> f64 {
        self.r_sf + self.r_pu
    }
}

/// Contribution of one AF relay: `P_t g_in P_r g_out / (1 + P_t g_in + P_r g_out)`.
pub fn af_term(p_tx: f64, g_in: f64, p_relay: f64, g_out: f64) -> f64 {
    let hop_in = p_tx * g_in;
    let hop_out = p_relay * g_out;
    if hop_in == 0.0 || hop_out == 0.0 {
        return 0.0;
    }
    hop_in * hop_out / (1.0 + hop_in + hop_out)
}

/// Per-UAV AF terms for both relay groups, in UAV order.
///
/// Rates built from these terms are bit-identical to [`rate_sf_multi`] and
/// [`rate_pu_multi`] because both sum in ascending UAV order.
#[derive(Debug, Clone, PartialEq)]
pub struct RelayTerms {
    pub fusion: Vec<f64>,
    pub primary: Vec<f64>,
    direct_sf: f64,
    direct_pu: f64,
}

impl RelayTerms {
    pub fn new(channels: &ChannelRealization, powers: &PowerProfile) -> Result<Self, RateError> {
        check_profile(channels, powers)?;
        let (fusion, primary) = channels
            .links()
            .iter()
            .zip(&powers.uavs)
            .map(|(l, &pu)| {
                (
                    af_term(
                        powers.source,
                        l.source_to_uav.norm_sqr(),
                        pu,
                        l.uav_to_fusion.norm_sqr(),
                    ),
                    af_term(
                        powers.pu_tx,
                        l.pu_tx_to_uav.norm_sqr(),
                        pu,
                        l.uav_to_pu_rx.norm_sqr(),
                    ),
                )
            })
            .unzip();
        let direct = |from, to| channels.power_gain(from, to).unwrap_or(0.0);
        use crate::topology::NodeId::*;
        Ok(Self {
            fusion,
            primary,
            direct_sf: powers.source * direct(Source, Fusion),
            direct_pu: powers.pu_tx * direct(PuTx, PuRx),
        })
    }

    pub fn n_uavs(&self) -> usize {
        self.fusion.len()
    }

    fn group_rate(direct: f64, terms: &[f64], members: impl Iterator<Item = usize>) -> f64 {
        let relayed: f64 = members.map(|j| terms[j]).sum();
        (1.0 + direct + relayed).log2()
    }

    /// Rates for `partition`, applying the spectrum-access rule: with nobody
    /// relaying for the primary pair no spectrum is leased and the fusion rate is 0.
    pub fn rates(&self, partition: &Partition) -> Result<RatePair, RateError> {
        if partition.len() != self.n_uavs() {
            return Err(RateError::LengthMismatch {
                expected: self.n_uavs(),
                got: partition.len(),
            });
        }
        let r_pu = Self::group_rate(
            self.direct_pu,
            &self.primary,
            partition.members(Task::Primary),
        );
        let r_sf = if partition.members(Task::Primary).next().is_none() {
            0.0
        } else {
            Self::group_rate(
                self.direct_sf,
                &self.fusion,
                partition.members(Task::Fusion),
            )
        };
        Ok(RatePair { r_sf, r_pu })
    }
}

fn check_profile(channels: &ChannelRealization, powers: &PowerProfile) -> Result<(), RateError> {
    if powers.uavs.len() != channels.n_uavs() {
        return Err(RateError::ProfileMismatch {
            powers: powers.uavs.len(),
            channels: channels.n_uavs(),
        });
    }
    Ok(())
}

/// Members as a sorted, deduplicated list, so set order never changes the sum.
fn normalize_set(set: &[usize], n: usize) -> Result<Vec<usize>, RateError> {
    if let Some(&index) = set.iter().find(|&&j| j >= n) {
        return Err(RateError::IndexOutOfRange { index, n });
    }
    let mut members = set.to_vec();
    members.sort_unstable();
    members.dedup();
    Ok(members)
}

/// Fusion-center rate relayed by the UAVs in `fusion_set`.
pub fn rate_sf_multi(
    channels: &ChannelRealization,
    powers: &PowerProfile,
    fusion_set: &[usize],
) -> Result<f64, RateError> {
    let terms = RelayTerms::new(channels, powers)?;
    let members = normalize_set(fusion_set, terms.n_uavs())?;
    Ok(RelayTerms::group_rate(
        terms.direct_sf,
        &terms.fusion,
        members.into_iter(),
    ))
}

/// Primary-pair rate relayed by the UAVs in `pu_set`.
pub fn rate_pu_multi(
    channels: &ChannelRealization,
    powers: &PowerProfile,
    pu_set: &[usize],
) -> Result<f64, RateError> {
    let terms = RelayTerms::new(channels, powers)?;
    let members = normalize_set(pu_set, terms.n_uavs())?;
    Ok(RelayTerms::group_rate(
        terms.direct_pu,
        &terms.primary,
        members.into_iter(),
    ))
}

/// Both rates for a partition, with the spectrum-access rule applied.
pub fn rates_for_partition(
    channels: &ChannelRealization,
    powers: &PowerProfile,
    partition: &Partition,
) -> Result<RatePair, RateError> {
    RelayTerms::new(channels, powers)?.rates(partition)
}
