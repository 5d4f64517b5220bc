//! Haar systems on a cube tree: orthonormality, Parseval on leaf
//! functions, and the weighted decomposition h = alpha h^w + beta chi with
//! its five properties.
//!
//! Run with: cargo run --example haar_systems

use a2lab::haar::{
    build_haar_system, check_decomposition, weighted_haar_decomposition,
};
use a2lab::metric::DoublingMeasure;
use a2lab::rng::Rng;
use a2lab::tree::uniform_mary_tree;

fn main() {
    let (space, tree) = uniform_mary_tree(3, 3);
    let measure = DoublingMeasure::uniform(space.len());
    let sys = build_haar_system(&tree, &measure).expect("haar builds");
    println!(
        "{} Haar functions on {} points; sup-norm constant C = {:.4}",
        sys.len(),
        space.len(),
        sys.sup_norm_constant()
    );

    // Parseval on a random leaf function
    let mut rng = Rng::new(5);
    let f: Vec<f64> = (0..space.len()).map(|_| rng.symmetric() * 2.0).collect();
    let coeffs = sys.coefficients(&tree, &measure, &f);
    let mean: f64 = f
        .iter()
        .enumerate()
        .map(|(x, v)| v * measure.mass(x))
        .sum::<f64>()
        / measure.total();
    let norm2: f64 = f
        .iter()
        .enumerate()
        .map(|(x, v)| v * v * measure.mass(x))
        .sum();
    let parseval = mean * mean * measure.total() + coeffs.iter().map(|c| c * c).sum::<f64>();
    println!("Parseval residual: {:.2e}", (norm2 - parseval).abs());

    // weighted decomposition across random weights
    let mut worst_identity = 0.0f64;
    let mut worst_alpha = 0.0f64;
    let mut worst_delta = 0.0f64;
    for _ in 0..200 {
        let w: Vec<f64> = (0..space.len())
            .map(|_| (rng.symmetric() * 1.5).exp())
            .collect();
        for h in &sys.fns {
            let dec = weighted_haar_decomposition(&tree, &measure, h, &w).unwrap();
            let chk = check_decomposition(&tree, &measure, h, &dec, &w);
            worst_identity = worst_identity.max(chk.identity_residual);
            worst_alpha = worst_alpha.max(chk.alpha_ratio);
            worst_delta = worst_delta.max(chk.delta_bound_ratio);
        }
    }
    println!("weighted decomposition over 200 random weights:");
    println!("  worst identity residual {worst_identity:.2e}");
    println!("  worst |alpha| / (c_I sqrt(<w>)) = {worst_alpha:.6} (bound 1)");
    println!("  worst |(h, w)| / (c_I Delta_I w sqrt(mu)) = {worst_delta:.6} (bound 1)");
}
