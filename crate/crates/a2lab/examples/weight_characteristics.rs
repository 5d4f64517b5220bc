//! Weight characteristics and the Carleson embedding: [w]_2 and [w]_Ainfty
//! over all balls, power weights hitting prescribed [w]_2 targets, the
//! maximal function, and the embedding inequalities.
//!
//! Run with: cargo run --example weight_characteristics

use a2lab::metric::{DoublingMeasure, FiniteMetricSpace};
use a2lab::rng::Rng;
use a2lab::tree::uniform_mary_tree;
use a2lab::weights::{
    a2_characteristic, ainfty_characteristic, carleson_embedding_check, maximal_function,
    power_weight_for_a2, CarlesonSequence,
};

fn main() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let measure = DoublingMeasure::uniform(64);
    for &target in &[2.0, 10.0, 100.0] {
        let (w, beta) = power_weight_for_a2(&space, &measure, 0, target).unwrap();
        let a2 = a2_characteristic(&space, &measure, &w);
        let ainf = ainfty_characteristic(&space, &measure, &w);
        println!(
            "power weight beta = {beta:.4}: [w]_2 = {a2:.3} (target {target}), [w]_Ainfty = {ainf:.3} <= [w]_2: {}",
            ainf <= a2 + 1e-9
        );
    }

    // maximal function dominates |f| and is bounded on L^q
    let nu: Vec<f64> = (0..64).map(|x| measure.mass(x)).collect();
    let mut f = vec![0.0; 64];
    f[32] = 1.0;
    let m = maximal_function(&space, &nu, &f);
    println!(
        "point mass maximal function: M f(32) = {:.3}, M f(0) = {:.4} (decays with ball mass)",
        m[32], m[0]
    );

    // Carleson embedding over a cube tree
    let (tspace, tree) = uniform_mary_tree(2, 5);
    let tmeasure = DoublingMeasure::uniform(tspace.len());
    let mut rng = Rng::new(3);
    let values: Vec<Vec<f64>> = tree
        .cubes
        .iter()
        .map(|level| level.iter().map(|_| rng.next_f64()).collect())
        .collect();
    let alpha = CarlesonSequence::new(&tree, &tmeasure, values);
    let big_f: Vec<f64> = (0..tspace.len()).map(|_| rng.next_f64() * 4.0).collect();
    let sigma: Vec<f64> = (0..tspace.len())
        .map(|_| (rng.symmetric() * 1.2).exp())
        .collect();
    let rep = carleson_embedding_check(&tspace, &tree, &tmeasure, &alpha, &big_f, Some(&sigma));
    println!(
        "embedding: sum inf_L F alpha_L = {:.4} <= 2B int F = {:.4} (B = {:.4}); weighted variant holds: {:?}",
        rep.lhs_inf, rep.rhs_two_b, rep.carleson_b, rep.holds_weighted
    );
}
