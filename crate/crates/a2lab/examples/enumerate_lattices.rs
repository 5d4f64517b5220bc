//! Exhaustively enumerate the discrete probability space of lattices on a
//! tiny space: elementary-event weights sum to one, and Monte Carlo
//! sampling frequencies converge to the enumerated weights.
//!
//! Run with: cargo run --example enumerate_lattices

use a2lab::lattice::{build_hierarchy, enumerate_hierarchies, GridMode, HierarchyParams};
use a2lab::metric::FiniteMetricSpace;

fn main() {
    let space =
        FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.45], vec![0.8], vec![1.0]]).unwrap();
    let params = HierarchyParams {
        delta: 0.25,
        levels: 2,
        seed: 0,
    };
    let events = enumerate_hierarchies(&space, &params, 10_000_000).expect("enumeration fits");
    let total: f64 = events.iter().map(|e| e.weight).sum();
    println!("elementary events: {}", events.len());
    println!("total weight: {total:.15}");
    for (i, event) in events.iter().enumerate().take(8) {
        println!(
            "  event {i}: weight {:.4}, G_1 = {:?}, G_0 = {:?}",
            event.weight, event.grids[1], event.grids[0]
        );
    }

    // sampling frequencies vs enumerated weights
    let trials = 20_000;
    let keys: Vec<Vec<usize>> = events.iter().map(|e| e.state_signature(0)).collect();
    let mut counts = vec![0usize; events.len()];
    for t in 0..trials {
        let p = HierarchyParams {
            seed: 1_000 + t as u64,
            ..params
        };
        let sample = build_hierarchy(&space, &p, GridMode::ExactUniform, 2, 10_000_000).unwrap();
        let sig = sample.state_signature(0);
        if let Some(idx) = keys.iter().position(|k| *k == sig) {
            counts[idx] += 1;
        }
    }
    println!("Monte Carlo frequencies over {trials} trials:");
    let mut chi2 = 0.0;
    for (i, event) in events.iter().enumerate() {
        let freq = counts[i] as f64 / trials as f64;
        let expected = event.weight * trials as f64;
        chi2 += (counts[i] as f64 - expected).powi(2) / expected;
        if i < 8 {
            println!("  event {i}: frequency {freq:.4} vs weight {:.4}", event.weight);
        }
    }
    println!("chi-square statistic: {chi2:.2} at {} degrees of freedom", events.len() - 1);
}
