//! The averaging identity, exactly: over the full enumerated probability
//! space of lattices on a tiny space, the expected bilinear form of any
//! linear operator equals 1/a times its restriction to pairs whose smaller
//! cube is really good. Goodness is equalized conditionally on the
//! construction state, which is what makes the identity hold to roundoff.
//!
//! Run with: cargo run --example averaging_identity

use a2lab::averaging::{
    averaging_identity_check, containment_probability_enumerated, enumerate_goodness,
    really_good_adjust,
};
use a2lab::goodness::GoodnessParams;
use a2lab::lattice::HierarchyParams;
use a2lab::linalg::Mat;
use a2lab::metric::{DoublingMeasure, FiniteMetricSpace};
use a2lab::rng::Rng;

fn main() {
    let space =
        FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.3], vec![0.55], vec![1.0]])
            .unwrap();
    let measure = DoublingMeasure::uniform(space.len());
    let hierarchy = HierarchyParams {
        delta: 0.25,
        levels: 2,
        seed: 0,
    };
    let goodness = GoodnessParams::from_kernel(1.0, 2.0, 1, 0.05, hierarchy.delta);
    let e = enumerate_goodness(&space, &hierarchy, &goodness, 10_000_000).unwrap();
    println!("elementary events: {}", e.events.len());
    let p_min = e.min_p();
    let a = 0.5 * p_min;
    println!("minimal conditional good-probability {p_min:.4}; equalizing at a = {a:.4}");
    let adjust = really_good_adjust(&e, a).unwrap();
    println!(
        "really-good probability equals a across {} abstract cubes (worst deviation {:.1e})",
        adjust.cubes_checked, adjust.worst_deviation
    );

    let mut rng = Rng::new(12);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let mut op = Mat::zeros(space.len(), space.len());
        for v in op.data.iter_mut() {
            *v = rng.symmetric() * 2.0;
        }
        for _ in 0..5 {
            let f: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
            let g: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
            let res = averaging_identity_check(&measure, &e, a, &op, &f, &g).unwrap();
            worst = worst
                .max(res.residual_geq / res.scale)
                .max(res.residual_strict / res.scale);
        }
    }
    println!("worst relative identity residual over 25 runs: {worst:.2e} (claim <= 1e-12)");

    let containment = containment_probability_enumerated(&space, &e, &[0, 1, 2, 3]);
    println!("\nconditional containment of disjoint pairs in the (s + s0 + 10)-fold ancestor:");
    for row in &containment.rows {
        println!("  s0 = {}: frequency {:.4}", row.s0, row.frequency);
    }
}
