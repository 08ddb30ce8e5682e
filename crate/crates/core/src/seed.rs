//! Deterministic seed fan-out.
//!
//! Every random stream in a run is derived from one master seed, so any
//! sub-component (topology, channels, a single agent) can be replayed alone.

use serde::{Deserialize, Serialize};

const TOPOLOGY_TAG: u64 = 0x746f_706f;
const CHANNEL_TAG: u64 = 0x6368_616e;
const AGENT_TAG: u64 = 0x6167_656e;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent child seed from `parent` for the stream `tag`.
pub fn derive(parent: u64, tag: u64) -> u64 {
    mix(parent ^ mix(tag))
}

/// All seeds used by one run, derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedPlan {
    pub master: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn topology(&self) -> u64 {
        derive(self.master, TOPOLOGY_TAG)
    }

    /// Seed for the static channel realization.
    pub fn channels(&self) -> u64 {
        derive(self.master, CHANNEL_TAG)
    }

    /// Seed for the realization drawn at `slot` when channels are redrawn every slot.
    pub fn channels_at(&self, slot: u64) -> u64 {
        derive(self.channels(), slot.wrapping_add(1))
    }

    pub fn agent(&self, index: usize) -> u64 {
        derive(derive(self.master, AGENT_TAG), index as u64)
    }
}
