//! Shared fixtures for the solver benchmarks.

use safeflow::instance::{generate_random, GeneratorConfig, Instance};

/// A mid-size routable instance: margins exist and the relaxation is
/// feasible for every seed in the benchmark range.
pub fn routable_instance(nodes: usize, commodities: usize, seed: u64) -> Instance {
    generate_random(&GeneratorConfig {
        nodes,
        edge_prob: 0.5,
        commodities,
        capacity_range: (25.0, 60.0),
        demand_range: (0.3, 1.0),
        seed,
        ..Default::default()
    })
    .expect("benchmark instance generates")
}
