//! Paraproducts built from a model kernel: the pi(chi) identity, adjoint
//! consistency of pi and pi_*, the rank-one piece, norm scaling in [w]_2,
//! and the Ainfty inequality their estimate rests on.
//!
//! Run with: cargo run --release --example paraproducts

use a2lab::experiment::WeightFamilySpec;
use a2lab::haar::build_haar_system;
use a2lab::kernel::{build_model_operator, KernelKind};
use a2lab::lattice::{build_hierarchy, GridMode, HierarchyParams};
use a2lab::metric::{DoublingMeasure, FiniteMetricSpace, KernelProfile};
use a2lab::paraproduct::{
    b_squared_per_cube, paraproduct_coefficients, paraproduct_norm_experiment,
};
use a2lab::tree::build_cubes;
use a2lab::weights::ainfty_inequality_check;

fn main() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let measure = DoublingMeasure::uniform(64);
    let (op, _) =
        build_model_operator(&space, &measure, KernelKind::InvDist, KernelProfile::radius())
            .unwrap();
    let params = HierarchyParams {
        delta: 0.25,
        levels: 3,
        seed: 21,
    };
    let sample = build_hierarchy(&space, &params, GridMode::Greedy, 3, 10_000_000).unwrap();
    let tree = build_cubes(&space, &sample);
    let sys = build_haar_system(&tree, &measure).unwrap();
    let b = paraproduct_coefficients(&tree, &measure, &sys, &op.matrix);
    let family = WeightFamilySpec::parse("power:a2=1..100:per-decade=4").unwrap();
    let weights = family.build(&space, &measure).unwrap();
    let scaling =
        paraproduct_norm_experiment(&tree, &measure, &sys, &b, &weights, space.len(), 1).unwrap();
    println!(
        "Carleson constant of b^2: {:.4}; norm scaling over {} weights:",
        scaling.carleson_b,
        scaling.rows.len()
    );
    for row in &scaling.rows {
        println!("  [w]_2 = {:8.3}  ||pi||_w = {:.4}", row.a2, row.norm);
    }
    println!("fitted slope {:.4} (claim <= 1.05)", scaling.slope);

    let b_values: Vec<Vec<f64>> = b_squared_per_cube(&tree, &sys, &b)
        .iter()
        .map(|level| level.iter().map(|v| v.sqrt()).collect())
        .collect();
    for weight in weights.iter().step_by(3) {
        let rep = ainfty_inequality_check(&space, &tree, &measure, &weight.w, &b_values);
        println!(
            "Ainfty inequality at [w]_2 = {:.2}: worst ratio {:.4} (holds: {})",
            weight.a2, rep.worst_ratio, rep.holds
        );
    }
}
