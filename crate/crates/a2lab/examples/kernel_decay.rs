//! The model operator 1/dist on a net: kernel bounds by exhaustive scan,
//! the paraproduct-free part T~, decay of its Haar coefficients over
//! nested-far and disjoint pairs, and the extraction of those families
//! into admissible dyadic shifts.
//!
//! Run with: cargo run --release --example kernel_decay

use a2lab::goodness::{classify_all, GoodnessParams};
use a2lab::haar::build_haar_system;
use a2lab::kernel::{
    build_model_operator, decay_check_in, decay_check_out, extract_shifts,
    haar_coefficient_table, subtract_paraproducts, KernelKind,
};
use a2lab::lattice::{build_hierarchy, GridMode, HierarchyParams};
use a2lab::metric::{DoublingMeasure, FiniteMetricSpace, KernelProfile};
use a2lab::rng::Rng;
use a2lab::tree::build_cubes;

fn main() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let measure = DoublingMeasure::uniform(64);
    let profile = KernelProfile::radius();
    let (op, bounds) =
        build_model_operator(&space, &measure, KernelKind::InvDist, profile.clone()).unwrap();
    println!(
        "kernel bounds: size {:.3}, holder_x {:.3}, holder_y {:.3} (threshold {})",
        bounds.size_constant, bounds.holder_x, bounds.holder_y, bounds.theta
    );
    let params = HierarchyParams {
        delta: 0.25,
        levels: 3,
        seed: 42,
    };
    let sample = build_hierarchy(&space, &params, GridMode::Greedy, 3, 10_000_000).unwrap();
    let tree = build_cubes(&space, &sample);
    let sys = build_haar_system(&tree, &measure).unwrap();
    let sub = subtract_paraproducts(&op.matrix, &tree, &measure, &sys);
    let table = haar_coefficient_table(&sub.t_tilde, &tree, &measure, &sys);
    let r0 = 2;
    let goodness = GoodnessParams::plain(0.25, r0);
    let good = classify_all(&space, &tree, &goodness);

    let rep_in = decay_check_in(&table, &tree, &sys, &good, r0, 1.0);
    println!("\nnested-far decay (good R inside Q, gap >= {r0}):");
    for row in &rep_in.rows {
        println!("  gap {}: {} pairs, max ratio {:.4}", row.gap, row.pairs, row.max_ratio);
    }
    println!("  son-mass comparability mu(Q)/mu(Q1) up to {:.3}", rep_in.son_mass_comparability);

    let rep_out = decay_check_out(&table, &space, &tree, &measure, &sys, &good, &profile, 1.0);
    println!("\ndisjoint decay, binned by distance exponent s:");
    for row in rep_out.rows.iter().take(8) {
        println!(
            "  gap {} s {}: {} pairs, max ratio {:.4}",
            row.gap,
            row.s_bin.unwrap(),
            row.pairs,
            row.max_ratio
        );
    }

    let mut rng = Rng::new(5);
    let f: Vec<f64> = (0..64).map(|_| rng.symmetric()).collect();
    let g: Vec<f64> = (0..64).map(|_| rng.symmetric()).collect();
    let extraction = extract_shifts(
        &table, &space, &tree, &measure, &sys, &good, &profile, r0, 1, 1.0, &f, &g,
    )
    .unwrap();
    println!("\nextracted shift families (all normalized coefficients admissible):");
    for e in extraction.nested.iter().chain(&extraction.disjoint) {
        println!(
            "  gap {} s {:?}: {} entries, max normalized coefficient {:.4}",
            e.gap, e.s_bin, e.entries, e.max_normalized
        );
    }
    println!(
        "|Sigma_in| = {:.4e} <= majorant {:.4e};  |Sigma_out| = {:.4e} <= majorant {:.4e}",
        extraction.sigma_in,
        extraction.sigma_in_majorant,
        extraction.sigma_out,
        extraction.sigma_out_majorant
    );
}
