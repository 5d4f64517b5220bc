//! The averaging identity over the enumerated probability space: the full
//! expected bilinear form equals 1/a times its restriction to pairs whose
//! smaller cube is "really good", once goodness is equalized to the
//! constant a.
//!
//! Equalization is conditional: the good-probability p of a cube is
//! computed within the group of elementary events sharing the construction
//! state at the cube's generation (all grids and parents at finer or equal
//! levels). The equalized weight 1[good] a / p then has conditional
//! expectation exactly a against everything built so far, which is what
//! makes the identity exact rather than approximate: the coarse-level
//! randomness that decides goodness is independent of the fine structure
//! only in this conditional sense.
//!
//! Also here: the conditional containment probability of disjoint pairs in
//! a common ancestor, in both Monte Carlo and enumeration form.

use crate::goodness::{classify_all, GoodnessParams};
use crate::haar::{build_haar_system, HaarSystem};
use crate::kernel::haar_coefficient_table;
use crate::lattice::{
    build_hierarchy, enumerate_hierarchies, GridMode, HierarchyParams, LatticeError,
};
use crate::linalg::Mat;
use crate::metric::{DoublingMeasure, FiniteMetricSpace};
use crate::rng::Rng;
use crate::tree::{build_cubes, CubeTree};
use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AveragingError {
    #[error("lattice error: {0}")]
    Lattice(#[from] LatticeError),
    #[error("target a = {a} exceeds the minimal conditional good-probability {p_min}")]
    AExceedsP { a: f64, p_min: f64 },
    #[error("haar construction failed: {0}")]
    Haar(#[from] crate::haar::HaarError),
}

pub struct EnumeratedLattice {
    pub weight: f64,
    pub tree: CubeTree,
    pub good: Vec<Vec<bool>>,
    /// group index per generation.
    pub group: Vec<usize>,
}

pub struct GoodnessEnumeration {
    pub events: Vec<EnumeratedLattice>,
    /// per generation: per group: (total weight, per-cube good weight).
    pub groups: Vec<Vec<(f64, Vec<f64>)>>,
}

/// Enumerate every lattice with its cubes and goodness flags, grouped by
/// construction state per generation.
pub fn enumerate_goodness(
    space: &FiniteMetricSpace,
    hierarchy: &HierarchyParams,
    goodness: &GoodnessParams,
    cap: usize,
) -> Result<GoodnessEnumeration, AveragingError> {
    let samples = enumerate_hierarchies(space, hierarchy, cap)?;
    let levels = hierarchy.levels;
    let mut events = Vec::with_capacity(samples.len());
    let mut keys: Vec<HashMap<Vec<usize>, usize>> = vec![HashMap::new(); levels + 1];
    let mut groups: Vec<Vec<(f64, Vec<f64>)>> = vec![Vec::new(); levels + 1];
    for sample in samples {
        let tree = build_cubes(space, &sample);
        let good = classify_all(space, &tree, goodness);
        let mut group_of = Vec::with_capacity(levels + 1);
        for k in 0..=levels {
            let sig = sample.state_signature(k);
            let next = groups[k].len();
            let idx = *keys[k].entry(sig).or_insert(next);
            if idx == groups[k].len() {
                groups[k].push((0.0, vec![0.0; tree.cubes[k].len()]));
            }
            let entry = &mut groups[k][idx];
            debug_assert_eq!(entry.1.len(), tree.cubes[k].len());
            entry.0 += sample.weight;
            for (pos, &g) in good[k].iter().enumerate() {
                if g {
                    entry.1[pos] += sample.weight;
                }
            }
            group_of.push(idx);
        }
        events.push(EnumeratedLattice {
            weight: sample.weight,
            tree,
            good,
            group: group_of,
        });
    }
    Ok(GoodnessEnumeration { events, groups })
}

impl GoodnessEnumeration {
    /// Conditional good-probability of cube (gen, pos) in the state group
    /// of an event.
    pub fn conditional_p(&self, event: usize, gen: usize, pos: usize) -> f64 {
        let g = self.events[event].group[gen];
        let (total, ref good_w) = self.groups[gen][g];
        good_w[pos] / total
    }

    /// Smallest conditional good-probability over all cubes and states.
    pub fn min_p(&self) -> f64 {
        let mut min = f64::INFINITY;
        for level in &self.groups {
            for (total, good_w) in level {
                for &gw in good_w {
                    min = min.min(gw / total);
                }
            }
        }
        min
    }

    /// The equalized weight 1[good] a / p for one cube in one event.
    pub fn really_good_weight(
        &self,
        event: usize,
        gen: usize,
        pos: usize,
        a: f64,
    ) -> Result<f64, AveragingError> {
        let p = self.conditional_p(event, gen, pos);
        if a > p {
            return Err(AveragingError::AExceedsP { a, p_min: p });
        }
        Ok(if self.events[event].good[gen][pos] {
            a / p
        } else {
            0.0
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AdjustReport {
    /// per abstract cube (generation, label, member hash): the equalized
    /// probability, which must equal a.
    pub worst_deviation: f64,
    pub cubes_checked: usize,
    pub min_p: f64,
}

/// Equalize goodness to probability a and verify that every abstract cube
/// (identified by generation, label and member set across events) ends up
/// really good with probability exactly a.
pub fn really_good_adjust(
    enumeration: &GoodnessEnumeration,
    a: f64,
) -> Result<AdjustReport, AveragingError> {
    let min_p = enumeration.min_p();
    if a > min_p {
        return Err(AveragingError::AExceedsP { a, p_min: min_p });
    }
    // abstract cube -> (occurrence weight, really-good weight)
    let mut acc: HashMap<(usize, usize, Vec<usize>), (f64, f64)> = HashMap::new();
    for (ei, event) in enumeration.events.iter().enumerate() {
        for (gen, level) in event.tree.cubes.iter().enumerate() {
            for (pos, cube) in level.iter().enumerate() {
                let key = (gen, cube.label, cube.members.clone());
                let w = enumeration.really_good_weight(ei, gen, pos, a)?;
                let entry = acc.entry(key).or_insert((0.0, 0.0));
                entry.0 += event.weight;
                entry.1 += event.weight * w;
            }
        }
    }
    let mut worst = 0.0f64;
    for (occurrence, really) in acc.values() {
        worst = worst.max((really / occurrence - a).abs());
    }
    Ok(AdjustReport {
        worst_deviation: worst,
        cubes_checked: acc.len(),
        min_p,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct IdentityResidual {
    /// |a E sigma_1 - E sigma_1-restricted| for the weak (>=) pairing.
    pub residual_geq: f64,
    /// Same for the strict (>) pairing.
    pub residual_strict: f64,
    /// Scale of the sums, for relative comparison.
    pub scale: f64,
}

/// The averaging identity for one operator and one (f, g) pair over the
/// full enumeration. Both the >= and > variants are checked.
pub fn averaging_identity_check(
    measure: &DoublingMeasure,
    enumeration: &GoodnessEnumeration,
    a: f64,
    op: &Mat,
    f: &[f64],
    g: &[f64],
) -> Result<IdentityResidual, AveragingError> {
    let mut lhs_geq = 0.0f64;
    let mut rhs_geq = 0.0f64;
    let mut lhs_strict = 0.0f64;
    let mut rhs_strict = 0.0f64;
    let mut scale = 0.0f64;
    for (ei, event) in enumeration.events.iter().enumerate() {
        let sys: HaarSystem = build_haar_system(&event.tree, measure)?;
        let table = haar_coefficient_table(op, &event.tree, measure, &sys);
        let fc = sys.coefficients(&event.tree, measure, f);
        let gc = sys.coefficients(&event.tree, measure, g);
        let mut sigma_geq = 0.0f64;
        let mut sigma_geq_good = 0.0f64;
        let mut sigma_strict = 0.0f64;
        let mut sigma_strict_good = 0.0f64;
        for (qi, hq) in sys.fns.iter().enumerate() {
            for (ri, hr) in sys.fns.iter().enumerate() {
                let gen_q = hq.cube.0;
                let (gen_r, pos_r) = hr.cube;
                if gen_q > gen_r {
                    continue; // ell(Q) < ell(R)
                }
                let x = table[qi][ri] * fc[qi] * gc[ri];
                let w = enumeration.really_good_weight(ei, gen_r, pos_r, a)?;
                sigma_geq += x;
                sigma_geq_good += x * w;
                if gen_q < gen_r {
                    sigma_strict += x;
                    sigma_strict_good += x * w;
                }
            }
        }
        lhs_geq += event.weight * a * sigma_geq;
        rhs_geq += event.weight * sigma_geq_good;
        lhs_strict += event.weight * a * sigma_strict;
        rhs_strict += event.weight * sigma_strict_good;
        scale = scale.max(sigma_geq.abs()).max(sigma_geq_good.abs());
    }
    Ok(IdentityResidual {
        residual_geq: (lhs_geq - rhs_geq).abs(),
        residual_strict: (lhs_strict - rhs_strict).abs(),
        scale: scale.max(1.0),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ContainmentRow {
    pub s0: usize,
    pub occurrences: usize,
    pub frequency: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContainmentReport {
    pub rows: Vec<ContainmentRow>,
    /// least s0 whose frequency clears 1/2 - 3 stderr.
    pub threshold_s0: Option<usize>,
}

fn containment_scan(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    good: &[Vec<bool>],
    s0_values: &[usize],
    weight: f64,
    acc: &mut [(f64, f64)],
) {
    let levels = tree.levels();
    for gen_q in 0..=levels {
        for (pos_q, q) in tree.cubes[gen_q].iter().enumerate() {
            for gen_r in gen_q..=levels {
                for (pos_r, r) in tree.cubes[gen_r].iter().enumerate() {
                    if !good[gen_r][pos_r] {
                        continue;
                    }
                    let dist = space.set_distance(&q.members, &r.members);
                    if dist == 0.0 {
                        continue;
                    }
                    let d_qr = q.side + r.side + dist;
                    let s = ((d_qr / q.side).ln() / (1.0 / tree.delta).ln())
                        .floor()
                        .max(0.0) as usize;
                    for (i, &s0) in s0_values.iter().enumerate() {
                        let anc = tree.ancestor((gen_q, pos_q), s + s0 + 10);
                        let anc_members = &tree.cubes[anc.0][anc.1].members;
                        let contained = r.members.iter().all(|x| anc_members.contains(x));
                        acc[i].0 += weight;
                        if contained {
                            acc[i].1 += weight;
                        }
                    }
                }
            }
        }
    }
}

/// Monte Carlo conditional containment frequency per s0: over disjoint
/// good-R pairs, how often R lies inside Q^{(s + s0 + 10)}.
pub fn containment_probability_mc(
    space: &FiniteMetricSpace,
    hierarchy: &HierarchyParams,
    goodness: &GoodnessParams,
    s0_values: &[usize],
    trials: usize,
    cap: usize,
) -> Result<ContainmentReport, LatticeError> {
    let mut acc = vec![(0.0f64, 0.0f64); s0_values.len()];
    for trial in 0..trials {
        let params = HierarchyParams {
            seed: Rng::new(hierarchy.seed ^ 0xc0fa).split(trial as u64).next_u64(),
            ..*hierarchy
        };
        let sample = build_hierarchy(space, &params, GridMode::Greedy, hierarchy.levels, cap)?;
        let tree = build_cubes(space, &sample);
        let good = classify_all(space, &tree, goodness);
        containment_scan(space, &tree, &good, s0_values, 1.0, &mut acc);
    }
    Ok(containment_report(s0_values, &acc))
}

/// The exact enumeration analogue, weighting pairs by event probability.
pub fn containment_probability_enumerated(
    space: &FiniteMetricSpace,
    enumeration: &GoodnessEnumeration,
    s0_values: &[usize],
) -> ContainmentReport {
    let mut acc = vec![(0.0f64, 0.0f64); s0_values.len()];
    for event in &enumeration.events {
        containment_scan(space, &event.tree, &event.good, s0_values, event.weight, &mut acc);
    }
    containment_report(s0_values, &acc)
}

fn containment_report(s0_values: &[usize], acc: &[(f64, f64)]) -> ContainmentReport {
    let rows: Vec<ContainmentRow> = s0_values
        .iter()
        .zip(acc)
        .map(|(&s0, &(total, hits))| {
            let freq = if total > 0.0 { hits / total } else { 1.0 };
            ContainmentRow {
                s0,
                occurrences: total.round() as usize,
                frequency: freq,
                stderr: if total > 0.0 {
                    (freq * (1.0 - freq) / total).sqrt()
                } else {
                    0.0
                },
            }
        })
        .collect();
    let threshold_s0 = rows
        .iter()
        .find(|r| r.frequency >= 0.5 - 3.0 * r.stderr)
        .map(|r| r.s0);
    ContainmentReport { rows, threshold_s0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FiniteMetricSpace;

    fn tiny_space() -> FiniteMetricSpace {
        FiniteMetricSpace::from_coords(vec![
            vec![0.0],
            vec![0.3],
            vec![0.55],
            vec![1.0],
        ])
        .unwrap()
    }

    fn small_goodness(delta: f64) -> GoodnessParams {
        GoodnessParams::from_kernel(1.0, 2.0, 1, 0.05, delta)
    }

    #[test]
    fn weights_total_one_and_grouping_consistent() {
        let space = tiny_space();
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        let e = enumerate_goodness(&space, &h, &small_goodness(0.25), 1_000_000).unwrap();
        let total: f64 = e.events.iter().map(|ev| ev.weight).sum();
        assert!((total - 1.0).abs() < 1e-12);
        // group totals at each generation also sum to one
        for level in &e.groups {
            let s: f64 = level.iter().map(|(t, _)| t).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn really_good_equalizes_exactly() {
        let space = tiny_space();
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        let e = enumerate_goodness(&space, &h, &small_goodness(0.25), 1_000_000).unwrap();
        let p_min = e.min_p();
        assert!(p_min > 0.0, "tiny-space goodness must have positive p");
        let a = 0.5 * p_min;
        let report = really_good_adjust(&e, a).unwrap();
        assert!(
            report.worst_deviation < 1e-12,
            "equalization deviation {}",
            report.worst_deviation
        );
        // a above p must error
        assert!(matches!(
            really_good_adjust(&e, p_min * 1.5),
            Err(AveragingError::AExceedsP { .. })
        ));
    }

    #[test]
    fn identity_zero_operator() {
        let space = tiny_space();
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        let measure = DoublingMeasure::uniform(space.len());
        let e = enumerate_goodness(&space, &h, &small_goodness(0.25), 1_000_000).unwrap();
        let a = 0.5 * e.min_p();
        let op = Mat::zeros(space.len(), space.len());
        let f = vec![1.0, -1.0, 2.0, 0.5];
        let g = vec![0.3, 1.0, -1.0, 0.0];
        let res = averaging_identity_check(&measure, &e, a, &op, &f, &g).unwrap();
        assert_eq!(res.residual_geq, 0.0);
        assert_eq!(res.residual_strict, 0.0);
    }

    #[test]
    fn identity_constant_function_vanishes() {
        // f constant: all Haar coefficients vanish, both sides zero
        let space = tiny_space();
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        let measure = DoublingMeasure::uniform(space.len());
        let e = enumerate_goodness(&space, &h, &small_goodness(0.25), 1_000_000).unwrap();
        let a = 0.5 * e.min_p();
        let mut rng = Rng::new(8);
        let mut op = Mat::zeros(space.len(), space.len());
        for v in op.data.iter_mut() {
            *v = rng.symmetric();
        }
        let f = vec![3.0; space.len()];
        let g: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
        let res = averaging_identity_check(&measure, &e, a, &op, &f, &g).unwrap();
        assert!(res.residual_geq < 1e-14);
        assert!(res.residual_strict < 1e-14);
    }

    #[test]
    fn identity_exact_for_random_operators() {
        let space = tiny_space();
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        let measure = DoublingMeasure::uniform(space.len());
        let e = enumerate_goodness(&space, &h, &small_goodness(0.25), 1_000_000).unwrap();
        let a = 0.5 * e.min_p();
        let mut rng = Rng::new(99);
        for trial in 0..5 {
            let mut op = Mat::zeros(space.len(), space.len());
            for v in op.data.iter_mut() {
                *v = rng.symmetric() * 2.0;
            }
            for _ in 0..5 {
                let f: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
                let g: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
                let res = averaging_identity_check(&measure, &e, a, &op, &f, &g).unwrap();
                assert!(
                    res.residual_geq <= 1e-12 * res.scale,
                    "trial {trial}: geq residual {} at scale {}",
                    res.residual_geq,
                    res.scale
                );
                assert!(
                    res.residual_strict <= 1e-12 * res.scale,
                    "trial {trial}: strict residual {}",
                    res.residual_strict
                );
            }
        }
    }

    #[test]
    fn containment_monotone_and_consistent() {
        let space = tiny_space();
        let h = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        let goodness = small_goodness(0.25);
        let s0s = [0usize, 2, 5];
        let mc = containment_probability_mc(&space, &h, &goodness, &s0s, 400, 1_000_000)
            .unwrap();
        for pair in mc.rows.windows(2) {
            assert!(pair[1].frequency >= pair[0].frequency - 1e-12);
        }
        let e = enumerate_goodness(&space, &h, &goodness, 1_000_000).unwrap();
        let exact = containment_probability_enumerated(&space, &e, &s0s);
        for (m, x) in mc.rows.iter().zip(&exact.rows) {
            let tol = 3.0 * m.stderr.max(1e-3);
            assert!(
                (m.frequency - x.frequency).abs() <= tol,
                "s0 {}: mc {} exact {}",
                m.s0,
                m.frequency,
                x.frequency
            );
        }
        // with a huge s0 the ancestor is the whole space
        assert!(exact.rows.last().unwrap().frequency > 0.99);
    }
}
