//! Fixtures shared by the benchmarks.

use detour_core::agent::{run_epoch, AgentConfig, StepRecord};
use detour_core::environment::WorldConfig;
use detour_core::network::{DiscreteObservation, ObsVar, TwoSliceNetwork};

/// Percepts at the start position: mid depth, target straight ahead.
pub fn start_observation() -> DiscreteObservation {
    DiscreteObservation::new(2, 5, 0, 0).expect("valid bins")
}

/// The initial network with a hidden variable over contact and depth.
pub fn hidden_network() -> TwoSliceNetwork {
    let vars = [ObsVar::BarrierTactile, ObsVar::Depth];
    TwoSliceNetwork::initial()
        .insert_hidden(&vars, &vars)
        .expect("fresh network accepts a hidden variable")
}

/// Step records from one epoch of the initial network in the default world.
pub fn epoch_records(seed: u64) -> Vec<StepRecord> {
    run_epoch(
        &TwoSliceNetwork::initial(),
        &WorldConfig::default(),
        &AgentConfig::default(),
        seed,
        0,
    )
    .expect("default configuration is valid")
    .summary
    .records
}
