//! Christ cubes: the partition structure a lattice sample induces on the
//! space, with generation bookkeeping, covering checks, boundary layers
//! and the chain-separation property.
//!
//! Cube membership replaces the union-of-tiny-balls-plus-closures of the
//! continuum construction by an exact partition: every point is assigned
//! to its nearest fine grid point (ties to the lowest id) and lifted
//! through parent chains. Containment and chain structure are preserved
//! and every later sum is well defined.

use crate::lattice::LatticeSample;
use crate::metric::{DoublingMeasure, FiniteMetricSpace};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoverError {
    #[error("point {point} not covered at generation {generation}")]
    CoverGap { point: usize, generation: usize },
    #[error("point {point} violates the 15 delta^k proximity bound in cube {cube} at generation {generation}")]
    ProximityViolation {
        point: usize,
        cube: usize,
        generation: usize,
    },
}

/// Identifies a cube as (generation, position within that generation).
pub type CubeId = (usize, usize);

#[derive(Clone, Debug, Serialize)]
pub struct Cube {
    /// Grid point id labelling the cube.
    pub label: usize,
    pub generation: usize,
    /// ell(Q) = delta^generation.
    pub side: f64,
    /// Point ids, sorted.
    pub members: Vec<usize>,
    /// Positions of son cubes in the next generation.
    pub sons: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct CubeTree {
    pub delta: f64,
    /// cubes[k] for k = 0..=N, each sorted by grid position.
    pub cubes: Vec<Vec<Cube>>,
    /// parent[k][i]: position of the parent of cubes[k][i] at generation k-1.
    pub parent: Vec<Vec<usize>>,
    /// Per point: position of its leaf cube at the finest generation.
    pub point_leaf: Vec<usize>,
}

impl CubeTree {
    pub fn levels(&self) -> usize {
        self.cubes.len() - 1
    }

    pub fn cube(&self, id: CubeId) -> &Cube {
        &self.cubes[id.0][id.1]
    }

    /// Maximum number of sons over all cubes (the constant M of the space).
    pub fn max_sons(&self) -> usize {
        self.cubes
            .iter()
            .flat_map(|level| level.iter().map(|c| c.sons.len()))
            .max()
            .unwrap_or(0)
    }

    /// Walk j generations up from `id`; the whole space if fewer exist.
    pub fn ancestor(&self, id: CubeId, j: usize) -> CubeId {
        let (mut gen, mut pos) = id;
        for _ in 0..j {
            if gen == 0 {
                break;
            }
            pos = self.parent[gen][pos];
            gen -= 1;
        }
        (gen, pos)
    }

    pub fn iter_ids(&self) -> impl Iterator<Item = CubeId> + '_ {
        self.cubes
            .iter()
            .enumerate()
            .flat_map(|(g, level)| (0..level.len()).map(move |i| (g, i)))
    }

    /// Cube containing point x at generation k.
    pub fn locate(&self, x: usize, k: usize) -> usize {
        let mut pos = self.point_leaf[x];
        let mut gen = self.levels();
        while gen > k {
            pos = self.parent[gen][pos];
            gen -= 1;
        }
        pos
    }

    /// Per-cube aggregate of a point function: sum over members of f(x) mu(x).
    pub fn integrate_per_cube(&self, f: &[f64], measure: &DoublingMeasure) -> Vec<Vec<f64>> {
        self.cubes
            .iter()
            .map(|level| {
                level
                    .iter()
                    .map(|c| c.members.iter().map(|&x| f[x] * measure.mass(x)).sum())
                    .collect()
            })
            .collect()
    }

    pub fn cube_mass(&self, measure: &DoublingMeasure, id: CubeId) -> f64 {
        self.cube(id)
            .members
            .iter()
            .map(|&x| measure.mass(x))
            .sum()
    }
}

/// Build the cube partition of a sample: members at generation k are the
/// points whose chain passes through the cube's grid point. Partitions at
/// every generation; the cube of a child grid point is contained in the
/// cube of its parent.
pub fn build_cubes(space: &FiniteMetricSpace, sample: &LatticeSample) -> CubeTree {
    let n_levels = sample.levels();
    // chains[k][x] = position of x's chain at generation k
    let mut chains: Vec<Vec<usize>> = vec![Vec::new(); n_levels + 1];
    chains[n_levels] = sample.assignment.clone();
    for k in (0..n_levels).rev() {
        chains[k] = chains[k + 1]
            .iter()
            .map(|&pos| sample.parents[k + 1][pos])
            .collect();
    }
    let mut cubes: Vec<Vec<Cube>> = Vec::with_capacity(n_levels + 1);
    for k in 0..=n_levels {
        let count = sample.grids[k].len();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); count];
        for x in 0..space.len() {
            members[chains[k][x]].push(x);
        }
        let side = sample.delta.powi(k as i32);
        let level: Vec<Cube> = (0..count)
            .map(|i| Cube {
                label: sample.grids[k][i],
                generation: k,
                side,
                members: std::mem::take(&mut members[i]),
                sons: Vec::new(),
            })
            .collect();
        cubes.push(level);
    }
    // sons from the parent maps
    for k in 1..=n_levels {
        for (child_pos, &par) in sample.parents[k].iter().enumerate() {
            cubes[k - 1][par].sons.push(child_pos);
        }
    }
    CubeTree {
        delta: sample.delta,
        point_leaf: sample.assignment.clone(),
        cubes,
        parent: sample.parents.clone(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CoverReport {
    pub generations: usize,
    /// max over cubes and members of dist(label, x) / delta^k; paper: <= 15.
    pub worst_proximity_ratio: f64,
}

/// Confirm that cubes partition the space at every generation and that
/// every member sits within 15 delta^k of the cube's grid point.
pub fn verify_cover(space: &FiniteMetricSpace, tree: &CubeTree) -> Result<CoverReport, CoverError> {
    let mut worst: f64 = 0.0;
    for (k, level) in tree.cubes.iter().enumerate() {
        let mut seen = vec![false; space.len()];
        for (ci, cube) in level.iter().enumerate() {
            for &x in &cube.members {
                if seen[x] {
                    return Err(CoverError::CoverGap {
                        point: x,
                        generation: k,
                    });
                }
                seen[x] = true;
                let ratio = space.dist(cube.label, x) / cube.side;
                worst = worst.max(ratio);
                if ratio > 15.0 {
                    return Err(CoverError::ProximityViolation {
                        point: x,
                        cube: ci,
                        generation: k,
                    });
                }
            }
        }
        if let Some(x) = seen.iter().position(|&s| !s) {
            return Err(CoverError::CoverGap {
                point: x,
                generation: k,
            });
        }
    }
    Ok(CoverReport {
        generations: tree.cubes.len(),
        worst_proximity_ratio: worst,
    })
}

/// The boundary layer delta_Q(eps): points within eps * ell(Q) of both Q
/// and its complement. Empty for Q = X (distance to the empty complement
/// is +infinity).
pub fn boundary_layer(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    id: CubeId,
    eps: f64,
) -> Vec<usize> {
    let cube = tree.cube(id);
    let inside = &cube.members;
    let mut in_cube = vec![false; space.len()];
    for &x in inside {
        in_cube[x] = true;
    }
    let outside: Vec<usize> = (0..space.len()).filter(|&x| !in_cube[x]).collect();
    if outside.is_empty() {
        return Vec::new();
    }
    let reach = eps * cube.side;
    (0..space.len())
        .filter(|&x| {
            space.point_set_distance(x, inside) <= reach
                && space.point_set_distance(x, &outside) <= reach
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainSeparationReport {
    pub checked_chains: usize,
    pub violations: usize,
    /// min over checked pairs of |z_i z_j| / (delta^j / 100).
    pub worst_ratio: f64,
}

/// Chain-separation property: if x lies within eps * delta^k of the
/// complement of its generation-k cube, then the chain points of x between
/// generations k and k+m satisfy |z_i z_j| >= delta^j / 100 whenever
/// 100 eps <= delta^m.
pub fn verify_chain_separation(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    eps: f64,
) -> ChainSeparationReport {
    let n_levels = tree.levels();
    let delta = tree.delta;
    // largest m with delta^m >= 100 eps
    let mut m_max = 0usize;
    while m_max + 1 <= n_levels && delta.powi((m_max + 1) as i32) >= 100.0 * eps {
        m_max += 1;
    }
    let mut report = ChainSeparationReport {
        checked_chains: 0,
        violations: 0,
        worst_ratio: f64::INFINITY,
    };
    if m_max == 0 {
        return report;
    }
    let mut in_cube = vec![false; space.len()];
    for k in 0..=n_levels.saturating_sub(1) {
        for cube in &tree.cubes[k] {
            for &x in &cube.members {
                in_cube[x] = true;
            }
            let outside: Vec<usize> = (0..space.len()).filter(|&x| !in_cube[x]).collect();
            for &x in &cube.members {
                in_cube[x] = false; // reset as we go
            }
            if outside.is_empty() {
                continue;
            }
            for &x in &cube.members {
                let d_out = space.point_set_distance(x, &outside);
                if d_out >= eps * cube.side {
                    continue;
                }
                let top = (k + m_max).min(n_levels);
                if top <= k {
                    continue;
                }
                report.checked_chains += 1;
                // chain of x from generation k to top
                let mut chain_pts = Vec::with_capacity(top - k + 1);
                for j in k..=top {
                    let pos = tree.locate(x, j);
                    chain_pts.push(tree.cubes[j][pos].label);
                }
                for j in k..top {
                    for i in (j + 1)..=top {
                        let d = space.dist(chain_pts[i - k], chain_pts[j - k]);
                        let bound = delta.powi(j as i32) / 100.0;
                        let ratio = d / bound;
                        report.worst_ratio = report.worst_ratio.min(ratio);
                        if d < bound {
                            report.violations += 1;
                        }
                    }
                }
            }
        }
    }
    report
}

/// A deterministic M-ary cube tree on the uniform net of [0, 1]:
/// `branching^depth` leaves, one point per leaf, delta = 1/branching.
/// Used by the shift and Bellman experiments that call for a fixed
/// 512- or 1024-leaf tree.
pub fn uniform_mary_tree(branching: usize, depth: usize) -> (FiniteMetricSpace, CubeTree) {
    let leaves = branching.pow(depth as u32);
    let space = FiniteMetricSpace::unit_interval_net(leaves);
    let delta = 1.0 / branching as f64;
    let mut cubes: Vec<Vec<Cube>> = Vec::with_capacity(depth + 1);
    let mut parent: Vec<Vec<usize>> = Vec::with_capacity(depth + 1);
    for k in 0..=depth {
        let count = branching.pow(k as u32);
        let span = leaves / count;
        let side = delta.powi(k as i32);
        let mut level = Vec::with_capacity(count);
        for i in 0..count {
            let members: Vec<usize> = (i * span..(i + 1) * span).collect();
            let sons = if k < depth {
                (i * branching..(i + 1) * branching).collect()
            } else {
                Vec::new()
            };
            level.push(Cube {
                label: i * span,
                generation: k,
                side,
                members,
                sons,
            });
        }
        cubes.push(level);
        parent.push(if k == 0 {
            Vec::new()
        } else {
            (0..count).map(|i| i / branching).collect()
        });
    }
    let tree = CubeTree {
        delta,
        point_leaf: (0..leaves).collect(),
        cubes,
        parent,
    };
    (space, tree)
}
