//! Enumerate all proper red/green colorings (1-lattices) of a small metric
//! space, measure how often a distinguished point is red, and run the
//! injective recoloring map that proves the occupancy lower bound.
//!
//! Run with: cargo run --example coloring_census

use a2lab::coloring::census;
use a2lab::metric::FiniteMetricSpace;

fn main() {
    // seven points on a line; distances in the original units, threshold 1
    let points = [0.0, 0.7, 1.4, 1.9, 2.6, 3.4, 4.0];
    let space =
        FiniteMetricSpace::from_coords(points.iter().map(|&x| vec![x]).collect()).unwrap();
    let threshold = 1.0 / space.scale;
    for v in 0..space.len() {
        let report = census(&space, threshold, v, 20).expect("small space");
        println!(
            "v = {v}: {} colorings, {} with v red, fraction {:.4} >= 2^(1-d) = {:.4} (d = {}), \
             injective recoloring: {}",
            report.total_colorings,
            report.card_b,
            report.fraction,
            report.lower_bound,
            report.occupancy_d,
            report.injective_everywhere
        );
    }
    // detail at one point: the W_S bucket structure
    let report = census(&space, threshold, 3, 20).unwrap();
    println!("\nW_S buckets at v = 3 (every coloring is v-red or in exactly one bucket):");
    println!(
        "  card B = {}, sum of card W_S = {}, total = {}",
        report.card_b, report.ws_sum, report.total_colorings
    );
    for entry in &report.per_s {
        println!(
            "  S = {:#09b}: card W_S = {} -> {} distinct proper images in B",
            entry.s_mask, entry.card_ws, entry.distinct_images
        );
    }
}
