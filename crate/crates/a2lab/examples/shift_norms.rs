//! Weighted norms of dyadic shifts against the A2 characteristic: random
//! admissible coefficients on a small tree, worst norm per weight, and the
//! fitted growth exponent (the claim is linear, slope near 1 at most).
//!
//! Run with: cargo run --release --example shift_norms

use a2lab::experiment::WeightFamilySpec;
use a2lab::haar::build_haar_system;
use a2lab::metric::DoublingMeasure;
use a2lab::shift::shift_bound_experiment;
use a2lab::tree::uniform_mary_tree;

fn main() {
    let (space, tree) = uniform_mary_tree(2, 6); // 64 leaves keeps this quick
    let measure = DoublingMeasure::uniform(space.len());
    let sys = build_haar_system(&tree, &measure).unwrap();
    let family = WeightFamilySpec::parse("power:a2=1..300:per-decade=4").unwrap();
    let weights = family.build(&space, &measure).unwrap();
    println!("{} weights spanning [w]_2 in [1, 300]", weights.len());
    let table = shift_bound_experiment(
        &tree,
        &measure,
        &sys,
        &weights,
        &[(0, 0), (1, 1)],
        8,
        1,
        space.len(),
    )
    .unwrap();
    for row in &table.rows {
        println!(
            "  ({}, {})  [w]_2 = {:9.3}  worst norm = {:.4}",
            row.m, row.n, row.a2, row.worst_norm
        );
    }
    for (m, n, slope) in &table.slopes {
        println!("complexity ({m}, {n}): fitted slope {slope:.4} (claim <= 1.05)");
    }
    println!(
        "dense vs power-iteration agreement: {:.2e}",
        table.method_agreement
    );
}
