//! Monte Carlo estimate of the probability that a fixed fine cube is bad,
//! swept over the generation gap r. The bound P(bad) <= 1/2 kicks in once
//! r is large enough; beyond the available generations the frequency is 0.
//!
//! Run with: cargo run --release --example bad_cubes

use a2lab::goodness::{estimate_bad_probability, GoodnessParams};
use a2lab::lattice::HierarchyParams;
use a2lab::metric::FiniteMetricSpace;

fn main() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let hierarchy = HierarchyParams {
        delta: 0.125,
        levels: 2,
        seed: 7,
    };
    let trials = 2_000;
    println!("64-net, delta = 1/8, fine level {} frozen, {trials} trials per r", hierarchy.levels);
    for r in 1..=3 {
        let goodness = GoodnessParams::from_kernel(1.0, 2.0, r, 0.05, hierarchy.delta);
        let report = estimate_bad_probability(
            &space,
            &hierarchy,
            &goodness,
            hierarchy.levels,
            trials,
            10_000_000,
        )
        .expect("estimate runs");
        println!(
            "r = {r}: worst bad-frequency over fixed cubes = {:.4} +- {:.4}  (<= 1/2: {})",
            report.worst_frequency,
            report.stderr,
            report.worst_frequency <= 0.5
        );
    }
}
