//! The Bellman function (xy)^alpha: pointwise Hessian domination with its
//! tight diagonal direction, the father-to-sons convexity gain against the
//! tau sequence, and the Carleson scaling of tau in the A2 characteristic.
//!
//! Run with: cargo run --release --example bellman_convexity

use a2lab::bellman::{
    bellman_hessian_check, midpoint_inequality_check, tau_carleson_experiment, BellmanParams,
};
use a2lab::metric::DoublingMeasure;
use a2lab::tree::uniform_mary_tree;
use a2lab::weights::{a2_characteristic, a2_over_cubes, power_weight_for_a2};

fn main() {
    for &(alpha, q) in &[(0.1, 10.0), (0.25, 100.0), (0.4, 100.0)] {
        let params = BellmanParams::new(alpha, q).unwrap();
        let rep = bellman_hessian_check(&params, 50_000, 8, 7);
        println!(
            "alpha {alpha:4}, Q {q:5}: worst slack {:+.2e}, fd error {:.1e}, 0 <= B <= Q^a: {}",
            rep.worst_slack,
            rep.worst_fd_error,
            rep.range_ratio <= 1.0 + 1e-9
        );
    }

    let (space, tree) = uniform_mary_tree(2, 8);
    let measure = DoublingMeasure::uniform(space.len());
    let alpha = 0.25;
    let mut weights = Vec::new();
    for &target in &[2.0, 10.0, 100.0, 1000.0] {
        let (w, _) = power_weight_for_a2(&space, &measure, 0, target).unwrap();
        let a2 = a2_characteristic(&space, &measure, &w);
        weights.push((w, a2));
    }
    let table = tau_carleson_experiment(&tree, &measure, &weights, alpha).unwrap();
    println!("\ntau Carleson constants on a 256-leaf tree (alpha = 1/4):");
    for row in &table.rows {
        println!(
            "  [w]_2 = {:9.2}: constant {:10.4}  ratio to Q^alpha {:.3}  midpoint min {:+.1e}",
            row.a2,
            row.carleson_constant,
            row.carleson_constant / row.a2.powf(alpha),
            row.midpoint_min
        );
    }
    println!("fitted slope {:.4}; the saturating ratio column is the Q^alpha bound itself", table.slope);

    // one explicit midpoint report
    let (w, a2) = weights.pop().unwrap();
    let sigma: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
    let q_eff = a2_over_cubes(&tree, &measure, &w).max(a2);
    let params = BellmanParams::new(alpha, q_eff).unwrap();
    let rep = midpoint_inequality_check(&tree, &measure, (3, 0), &w, &sigma, &params).unwrap();
    println!(
        "\nmidpoint at one cube: difference {:.3e} >= half-integral {:.3e}, tau {:.3e}, \
         quadrature residual {:.1e}",
        rep.difference, rep.half_integral, rep.tau, rep.quadrature_residual
    );
}
