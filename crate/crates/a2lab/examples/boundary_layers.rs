//! The probability that a fixed point lands in the eps boundary layer of
//! some generation-k cube decays like eps^eta. Sweep eps, fit the decay
//! exponent, and compare with eta = log(1 - a) / log(delta).
//!
//! Run with: cargo run --release --example boundary_layers

use a2lab::goodness::{boundary_decay_exponent, boundary_hit_probability};
use a2lab::lattice::HierarchyParams;
use a2lab::metric::FiniteMetricSpace;

fn main() {
    // the finest layer eps * delta is one order below the 64-net spacing,
    // so a 256-net is the coarsest space that resolves the whole sweep
    let space = FiniteMetricSpace::unit_interval_net(256);
    let hierarchy = HierarchyParams {
        delta: 0.25,
        levels: 3,
        seed: 11,
    };
    let level = 1;
    let point = 128;
    let trials = 500;
    let mut reports = Vec::new();
    for &eps in &[0.02, 0.04, 0.08, 0.16, 0.32] {
        let rep = boundary_hit_probability(
            &space,
            &hierarchy,
            level,
            point,
            eps,
            trials,
            10_000_000,
        )
        .expect("probability estimate runs");
        println!(
            "eps = {eps}: hit frequency {:.4} over {trials} trials",
            rep.frequency
        );
        reports.push(rep);
    }
    let slope = boundary_decay_exponent(&reports);
    // eta from the occupancy-derived survival probability a = 2^(1-d),
    // with d the level-1 grid occupancy at unit radius: tiny at desk
    // scale, so the eta - 0.2 threshold is comfortably negative and the
    // informative content is the monotone ramp of the frequencies
    let g1 = 1.0 / hierarchy.delta; // grid points per unit, roughly
    let d = g1.ceil() as i32 + 1;
    let a = (2.0f64).powi(1 - d);
    let eta = (1.0 - a).ln() / hierarchy.delta.ln();
    println!(
        "fitted decay exponent {slope:.3} over the positive entries; \
         eta = {eta:.4} (claim: slope >= eta - 0.2 = {:.4})",
        eta - 0.2
    );
}
