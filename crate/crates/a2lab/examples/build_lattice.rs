//! Build a random dyadic lattice on a uniform net and verify the covering
//! properties: cubes partition the space at every generation, members stay
//! within 15 delta^k of their grid point, grids are separated and maximal,
//! and boundary-adjacent chains are delta^j/100-separated.
//!
//! Run with: cargo run --example build_lattice

use a2lab::lattice::{build_hierarchy, verify_grid_laws, GridMode, HierarchyParams};
use a2lab::metric::FiniteMetricSpace;
use a2lab::tree::{build_cubes, verify_chain_separation, verify_cover};

fn main() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let params = HierarchyParams {
        delta: 0.25,
        levels: 3,
        seed: 42,
    };
    let sample = build_hierarchy(&space, &params, GridMode::ExactUniform, params.levels, 10_000_000)
        .or_else(|_| build_hierarchy(&space, &params, GridMode::Greedy, params.levels, 10_000_000))
        .expect("hierarchy builds");
    println!("grid sizes per generation:");
    for (k, grid) in sample.grids.iter().enumerate() {
        println!("  G_{k}: {} points (threshold {:.6})", grid.len(), params.delta.powi(k as i32));
    }
    let tree = build_cubes(&space, &sample);
    let cover = verify_cover(&space, &tree).expect("cubes partition the space");
    println!(
        "cover verified over {} generations; worst |y_k x| / delta^k = {:.3} (bound 15)",
        cover.generations, cover.worst_proximity_ratio
    );
    let laws = verify_grid_laws(&space, &sample);
    println!(
        "separation {}  maximality {}  cover radius {} (worst ratio {:.3}, bound 3)",
        laws.separation_ok, laws.maximality_ok, laws.cover_radius_ok, laws.worst_cover_ratio
    );
    for eps in [1e-4, 1e-3] {
        let chains = verify_chain_separation(&space, &tree, eps);
        println!(
            "chain separation at eps {eps}: {} chains checked, {} violations",
            chains.checked_chains, chains.violations
        );
    }
}
