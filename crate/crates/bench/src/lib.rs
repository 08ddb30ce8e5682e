//! Shared fixtures for the criterion benches.

use marl_sim_core::{
    build_topology, sample_channels, Area, ChannelRealization, FixedNodes, Placement, PowerProfile,
    RunConfig, SeedPlan,
};

/// Channels and powers for a random `n`-UAV layout.
pub fn fixture(n_uavs: usize, seed: u64) -> (ChannelRealization, PowerProfile) {
    let plan = SeedPlan::new(seed);
    let topo = build_topology(
        n_uavs,
        Area::default(),
        &Placement::Random(FixedNodes::default()),
        plan.topology(),
    )
    .expect("default area fits a random layout");
    (
        sample_channels(&topo, plan.channels()),
        PowerProfile::default_for(n_uavs),
    )
}

pub fn run_config(n_uavs: usize, n_iterations: u64) -> RunConfig {
    RunConfig {
        n_iterations,
        ..RunConfig::default_for(n_uavs)
    }
}
