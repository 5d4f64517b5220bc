//! Good and bad cubes: a cube is good when every much coarser cube either
//! keeps its distance or safely contains it; the classification, Monte
//! Carlo estimates of the bad probability, and the boundary-layer hit
//! probability with its decay exponent.
//!
//! Goodness is implemented with the universal quantifier: every coarser
//! cube must offer one of the two alternatives. The union bound over
//! generation gaps that controls the bad probability only makes sense
//! this way.

use crate::lattice::{build_hierarchy, GridMode, HierarchyParams, LatticeError};
use crate::metric::FiniteMetricSpace;
use crate::rng::Rng;
use crate::tree::{build_cubes, boundary_layer, CubeId, CubeTree};
use serde::Serialize;

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GoodnessParams {
    pub gamma: f64,
    /// Generation gap: only cubes coarser by at least r constrain goodness.
    pub r: usize,
    /// Equalized good probability target (used by the averaging identity).
    pub a: f64,
    /// eta = log(1 - a) / log(delta).
    pub eta: f64,
}

impl GoodnessParams {
    /// gamma from the kernel profile: eps / (2 (eps + log2 C)).
    pub fn from_kernel(eps: f64, lambda_doubling: f64, r: usize, a: f64, delta: f64) -> Self {
        let gamma = eps / (2.0 * (eps + lambda_doubling.log2()));
        GoodnessParams {
            gamma,
            r,
            a,
            eta: (1.0 - a).ln() / delta.ln(),
        }
    }

    pub fn plain(gamma: f64, r: usize) -> Self {
        GoodnessParams {
            gamma,
            r,
            a: 0.5,
            eta: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub enum Alternative {
    FarFromCube,
    DeepInside,
}

#[derive(Clone, Debug, Serialize)]
pub struct GoodnessVerdict {
    pub cube: CubeId,
    pub is_good: bool,
    /// Per coarser cube: which alternative held (None records the failure
    /// witness of a bad cube).
    pub witnesses: Vec<(CubeId, Option<Alternative>)>,
}

/// Classify one cube against every cube coarser by at least r generations.
/// Set distances are min over pairs; the distance to an empty complement
/// is +infinity, so the whole space is always a harmless witness.
pub fn classify_good(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    id: CubeId,
    params: &GoodnessParams,
) -> GoodnessVerdict {
    let k = id.0;
    let q_members = &tree.cube(id).members;
    let mut witnesses = Vec::new();
    let mut is_good = true;
    for n in 0..=k.saturating_sub(params.r) {
        if n + params.r > k {
            break;
        }
        let threshold = tree
            .delta
            .powf(k as f64 * params.gamma + n as f64 * (1.0 - params.gamma));
        for (pos, q1) in tree.cubes[n].iter().enumerate() {
            let mut inside = vec![false; space.len()];
            for &x in &q1.members {
                inside[x] = true;
            }
            let complement: Vec<usize> =
                (0..space.len()).filter(|&x| !inside[x]).collect();
            let d_cube = space.set_distance(q_members, &q1.members);
            let d_comp = space.set_distance(q_members, &complement);
            let witness = if d_cube >= threshold {
                Some(Alternative::FarFromCube)
            } else if d_comp >= threshold {
                Some(Alternative::DeepInside)
            } else {
                None
            };
            if witness.is_none() {
                is_good = false;
            }
            witnesses.push(((n, pos), witness));
        }
    }
    GoodnessVerdict {
        cube: id,
        is_good,
        witnesses,
    }
}

/// Goodness flags for every cube of a tree (cheaper than per-cube calls:
/// complements are built once per coarse cube).
pub fn classify_all(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    params: &GoodnessParams,
) -> Vec<Vec<bool>> {
    let levels = tree.levels();
    let mut good: Vec<Vec<bool>> = tree
        .cubes
        .iter()
        .map(|level| vec![true; level.len()])
        .collect();
    for n in 0..levels {
        for q1 in &tree.cubes[n] {
            let mut inside = vec![false; space.len()];
            for &x in &q1.members {
                inside[x] = true;
            }
            let complement: Vec<usize> =
                (0..space.len()).filter(|&x| !inside[x]).collect();
            for k in (n + params.r)..=levels {
                let threshold = tree
                    .delta
                    .powf(k as f64 * params.gamma + n as f64 * (1.0 - params.gamma));
                for (pos, q) in tree.cubes[k].iter().enumerate() {
                    if !good[k][pos] {
                        continue;
                    }
                    let d_cube = space.set_distance(&q.members, &q1.members);
                    if d_cube >= threshold {
                        continue;
                    }
                    let d_comp = space.set_distance(&q.members, &complement);
                    if d_comp < threshold {
                        good[k][pos] = false;
                    }
                }
            }
        }
    }
    good
}

#[derive(Clone, Debug, Serialize)]
pub struct BadProbabilityReport {
    pub level: usize,
    pub r: usize,
    pub trials: usize,
    /// Worst Monte Carlo bad-frequency over the fixed level-k cubes.
    pub worst_frequency: f64,
    /// Binomial standard error at the worst frequency.
    pub stderr: f64,
    /// Frequency per fixed cube position.
    pub per_cube: Vec<f64>,
}

/// Monte Carlo estimate of P(bad) for the cubes of a fixed fine level:
/// generations >= `level` are frozen (non-random), coarser generations are
/// redrawn each trial.
pub fn estimate_bad_probability(
    space: &FiniteMetricSpace,
    hierarchy: &HierarchyParams,
    goodness: &GoodnessParams,
    level: usize,
    trials: usize,
    cap: usize,
) -> Result<BadProbabilityReport, LatticeError> {
    let mut bad_counts: Vec<usize> = Vec::new();
    for trial in 0..trials {
        let params = HierarchyParams {
            seed: Rng::new(hierarchy.seed).split(trial as u64).next_u64(),
            ..*hierarchy
        };
        let sample = build_hierarchy(space, &params, GridMode::Greedy, level, cap)?;
        let tree = build_cubes(space, &sample);
        let good = classify_all(space, &tree, goodness);
        if bad_counts.is_empty() {
            bad_counts = vec![0; good[level].len()];
        }
        for (pos, &g) in good[level].iter().enumerate() {
            if !g {
                bad_counts[pos] += 1;
            }
        }
    }
    let per_cube: Vec<f64> = bad_counts
        .iter()
        .map(|&c| c as f64 / trials as f64)
        .collect();
    let worst = per_cube.iter().cloned().fold(0.0, f64::max);
    Ok(BadProbabilityReport {
        level,
        r: goodness.r,
        trials,
        worst_frequency: worst,
        stderr: (worst * (1.0 - worst) / trials as f64).sqrt(),
        per_cube,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundaryHitReport {
    pub eps: f64,
    pub level: usize,
    pub trials: usize,
    pub frequency: f64,
}

/// Monte Carlo frequency of a fixed point landing in the eps boundary
/// layer of some generation-k cube, over random hierarchies with the fine
/// level frozen.
pub fn boundary_hit_probability(
    space: &FiniteMetricSpace,
    hierarchy: &HierarchyParams,
    level: usize,
    point: usize,
    eps: f64,
    trials: usize,
    cap: usize,
) -> Result<BoundaryHitReport, LatticeError> {
    let mut hits = 0usize;
    for trial in 0..trials {
        let params = HierarchyParams {
            seed: Rng::new(hierarchy.seed ^ 0xb0d1).split(trial as u64).next_u64(),
            ..*hierarchy
        };
        let sample = build_hierarchy(space, &params, GridMode::Greedy, hierarchy.levels, cap)?;
        let tree = build_cubes(space, &sample);
        let hit = (0..tree.cubes[level].len()).any(|pos| {
            boundary_layer(space, &tree, (level, pos), eps).contains(&point)
        });
        if hit {
            hits += 1;
        }
    }
    Ok(BoundaryHitReport {
        eps,
        level,
        trials,
        frequency: hits as f64 / trials as f64,
    })
}

/// Sweep eps and fit the decay exponent of the boundary-hit frequency;
/// the claim is frequency <= C eps^eta.
pub fn boundary_decay_exponent(reports: &[BoundaryHitReport]) -> f64 {
    let xs: Vec<f64> = reports.iter().map(|r| r.eps).collect();
    let ys: Vec<f64> = reports.iter().map(|r| r.frequency).collect();
    crate::linalg::log_log_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{build_hierarchy, GridMode, HierarchyParams};
    use crate::metric::FiniteMetricSpace;

    fn tree_on_net(
        n: usize,
        delta: f64,
        levels: usize,
        seed: u64,
    ) -> (FiniteMetricSpace, CubeTree) {
        let space = FiniteMetricSpace::unit_interval_net(n);
        let params = HierarchyParams {
            delta,
            levels,
            seed,
        };
        let sample = build_hierarchy(&space, &params, GridMode::Greedy, levels, 10_000_000)
            .unwrap();
        (space.clone(), build_cubes(&space, &sample))
    }

    #[test]
    fn generation_zero_vacuously_good() {
        let (space, tree) = tree_on_net(32, 0.25, 3, 1);
        let params = GoodnessParams::plain(0.25, 1);
        let v = classify_good(&space, &tree, (0, 0), &params);
        assert!(v.is_good);
        assert!(v.witnesses.is_empty());
    }

    #[test]
    fn whole_space_witnesses_are_deep_inside() {
        // every cube sits inside X = the generation-0 cube with an empty
        // complement: distance +infinity, second alternative
        let (space, tree) = tree_on_net(32, 0.25, 3, 2);
        let params = GoodnessParams::plain(0.25, 1);
        for pos in 0..tree.cubes[1].len() {
            let v = classify_good(&space, &tree, (1, pos), &params);
            let (_, alt) = &v.witnesses[0];
            assert!(matches!(alt, Some(Alternative::DeepInside)));
        }
    }

    // brute-force pair-scan oracle: re-derive the verdicts independently
    #[test]
    fn verdicts_match_pair_scan_oracle() {
        let (space, tree) = tree_on_net(64, 0.25, 3, 42);
        let params = GoodnessParams::plain(0.25, 2);
        let fast = classify_all(&space, &tree, &params);
        for k in 0..=tree.levels() {
            for pos in 0..tree.cubes[k].len() {
                let mut expect = true;
                for n in 0..=tree.levels() {
                    if n + params.r > k {
                        continue;
                    }
                    let thr = tree
                        .delta
                        .powf(k as f64 * params.gamma + n as f64 * (1.0 - params.gamma));
                    for q1 in &tree.cubes[n] {
                        let mut d_cube = f64::INFINITY;
                        let mut d_comp = f64::INFINITY;
                        for &x in &tree.cubes[k][pos].members {
                            for &y in &q1.members {
                                d_cube = d_cube.min(space.dist(x, y));
                            }
                            for y in 0..space.len() {
                                if !q1.members.contains(&y) {
                                    d_comp = d_comp.min(space.dist(x, y));
                                }
                            }
                        }
                        if !(d_cube >= thr || d_comp >= thr) {
                            expect = false;
                        }
                    }
                }
                assert_eq!(fast[k][pos], expect, "cube ({k}, {pos})");
                let single = classify_good(&space, &tree, (k, pos), &params);
                assert_eq!(single.is_good, expect);
            }
        }
    }

    #[test]
    fn goodness_monotone_in_r() {
        let (space, tree) = tree_on_net(64, 0.25, 3, 7);
        let mut previous: Option<Vec<Vec<bool>>> = None;
        for r in 1..=3 {
            let params = GoodnessParams::plain(0.25, r);
            let good = classify_all(&space, &tree, &params);
            if let Some(prev) = &previous {
                for (a, b) in prev.iter().flatten().zip(good.iter().flatten()) {
                    // increasing r never turns a good cube bad
                    assert!(!a || *b);
                }
            }
            previous = Some(good);
        }
    }

    #[test]
    fn big_r_means_no_constraints() {
        let (space, tree) = tree_on_net(32, 0.25, 2, 3);
        let params = GoodnessParams::plain(0.25, 10);
        let good = classify_all(&space, &tree, &params);
        assert!(good.iter().flatten().all(|&g| g));
    }

    #[test]
    fn bad_probability_zero_for_oversized_r() {
        let space = FiniteMetricSpace::unit_interval_net(32);
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 5,
        };
        let g = GoodnessParams::plain(0.25, 5);
        let rep = estimate_bad_probability(&space, &h, &g, 2, 50, 1_000_000).unwrap();
        assert_eq!(rep.worst_frequency, 0.0);
    }

    #[test]
    fn gamma_from_kernel_profile() {
        // eps = 1, C = 2: gamma = 1 / (2 (1 + 1)) = 1/4
        let p = GoodnessParams::from_kernel(1.0, 2.0, 2, 0.5, 0.125);
        assert!((p.gamma - 0.25).abs() < 1e-15);
        // eta = ln(1 - a) / ln(delta) > 0
        assert!(p.eta > 0.0);
        assert!((p.eta - (0.5f64).ln() / (0.125f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn boundary_hit_zero_at_eps_zero() {
        let space = FiniteMetricSpace::unit_interval_net(32);
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 11,
        };
        let rep = boundary_hit_probability(&space, &h, 1, 7, 0.0, 20, 1_000_000).unwrap();
        assert_eq!(rep.frequency, 0.0);
    }

    #[test]
    fn boundary_decay_slope_clears_eta() {
        // sweep eps on a net fine enough to resolve the thinnest layer;
        // the fitted slope must clear eta - 0.2
        let space = FiniteMetricSpace::unit_interval_net(256);
        let h = HierarchyParams {
            delta: 0.25,
            levels: 3,
            seed: 17,
        };
        let level = 1;
        let mut reports = Vec::new();
        for &eps in &[0.02, 0.04, 0.08] {
            reports.push(
                boundary_hit_probability(&space, &h, level, 128, eps, 200, 10_000_000)
                    .unwrap(),
            );
        }
        for pair in reports.windows(2) {
            assert!(pair[1].frequency >= pair[0].frequency);
        }
        let slope = boundary_decay_exponent(&reports);
        // a from the fine-grid occupancy at scale delta^(level-1) = 1
        let fine: Vec<usize> = (0..space.len()).collect();
        let d = fine.len(); // every point is within distance 1 of any other
        let a = (2.0f64).powi(1 - (d.min(60)) as i32);
        let eta = (1.0 - a).ln() / h.delta.ln();
        assert!(
            slope >= eta - 0.2,
            "slope {slope} below eta - 0.2 = {}",
            eta - 0.2
        );
    }

    #[test]
    fn boundary_hit_monotone_in_eps() {
        let space = FiniteMetricSpace::unit_interval_net(32);
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 13,
        };
        let mut last = 0.0;
        for &eps in &[0.05, 0.2, 1.0] {
            let rep = boundary_hit_probability(&space, &h, 1, 9, eps, 100, 1_000_000).unwrap();
            assert!(rep.frequency >= last - 1e-12);
            last = rep.frequency;
        }
        // eps >= 1: the bound eps^eta >= 1 is vacuous and the layer is fat
        assert!(last > 0.0);
    }
}
