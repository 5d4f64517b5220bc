//! Random nested grids and the parent relation: bottom-up construction of
//! random dyadic lattices on a finite metric space.
//!
//! Generations are indexed 0..=N with 0 the coarsest (a single grid point)
//! and N the finest. The fine grid `G_N` is a fixed, non-random maximal
//! delta^N-separated set; each coarser grid is a random maximal
//! delta^k-separated subset of the grid below it, every maximal subset
//! carrying the same probability. Parents follow the unique-within
//! delta^k/4 rule, with a uniform random choice within 3 delta^k when no
//! unique parent exists.
//!
//! Both true sampling and exhaustive enumeration of the (finite, discrete)
//! probability space are provided; enumeration is exact and is what the
//! identity checks run on.

use crate::metric::FiniteMetricSpace;
use crate::rng::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ENUMERATION_CAP: usize = 10_000_000;

#[derive(Debug, Error)]
pub enum LatticeError {
    #[error("delta = {0} out of range: need 0 < delta <= 1/4")]
    DeltaOutOfRange(f64),
    #[error("enumeration exceeds cap ({cap}) while listing elementary events")]
    EnumerationTooLarge { cap: usize },
    #[error("enumeration supports at most 64 candidates, got {0}")]
    TooManyCandidates(usize),
    #[error("no parent within 3 delta^k for child {child} at generation {generation}")]
    NoParentInRange { child: usize, generation: usize },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HierarchyParams {
    pub delta: f64,
    /// Top fine generation N (>= 1).
    pub levels: usize,
    pub seed: u64,
}

impl HierarchyParams {
    /// delta <= 1/4 is required; the chain-separation arguments want
    /// delta < 1/1000, so larger values come back with a warning.
    pub fn validate(&self) -> Result<Option<String>, LatticeError> {
        if !(self.delta > 0.0 && self.delta <= 0.25) {
            return Err(LatticeError::DeltaOutOfRange(self.delta));
        }
        if self.delta > 1e-3 {
            Ok(Some(format!(
                "delta = {} is above 1/1000; chain-separation constants are asserted \
                 at their stated values but the regime is coarser than the proofs assume",
                self.delta
            )))
        } else {
            Ok(None)
        }
    }
}

/// How coarse grids are drawn from the grid below.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridMode {
    /// Enumerate all maximal separated subsets and pick one uniformly.
    /// Exact but limited to small candidate sets.
    ExactUniform,
    /// Random-permutation greedy: shuffle candidates, insert each if still
    /// separated. Always maximal, but not exactly uniform over maximal
    /// subsets; results are flagged approximate.
    Greedy,
}

/// One realization of the random lattice.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeSample {
    pub delta: f64,
    /// grids[k] = sorted point ids of G_k; grids[k] is a subset of grids[k+1].
    pub grids: Vec<Vec<usize>>,
    /// parents[k][i] for k >= 1: position in grids[k-1] of the parent of
    /// grids[k][i]. parents[0] is empty.
    pub parents: Vec<Vec<usize>>,
    /// Per point: position in grids[N] of its nearest fine grid point
    /// (ties broken by lowest point id).
    pub assignment: Vec<usize>,
    /// Probability of this elementary event under enumeration; 1.0 for a
    /// sampled lattice.
    pub weight: f64,
    /// Whether grid draws were exactly uniform.
    pub exact: bool,
}

impl LatticeSample {
    pub fn levels(&self) -> usize {
        self.grids.len() - 1
    }

    /// Grid point id of the chain representative of point x at generation k.
    pub fn chain(&self, x: usize, k: usize) -> usize {
        let (gen, pos) = self.chain_position(x, k);
        self.grids[gen][pos]
    }

    /// (generation, position) of the chain of x at generation k.
    pub fn chain_position(&self, x: usize, k: usize) -> (usize, usize) {
        let n = self.levels();
        let mut pos = self.assignment[x];
        let mut gen = n;
        while gen > k {
            pos = self.parents[gen][pos];
            gen -= 1;
        }
        (k, pos)
    }

    /// Encodes the construction state after generation k is complete:
    /// all grids and parent maps at generations >= k. Two samples with the
    /// same signature share every cube at generations >= k.
    pub fn state_signature(&self, k: usize) -> Vec<usize> {
        let mut sig = Vec::new();
        for g in k..self.grids.len() {
            sig.push(usize::MAX); // separator
            sig.extend_from_slice(&self.grids[g]);
            if g > k {
                sig.push(usize::MAX - 1);
                sig.extend_from_slice(&self.parents[g]);
            }
        }
        sig
    }
}

/// Deterministic maximal separated subset: greedy by ascending index.
pub fn greedy_grid(space: &FiniteMetricSpace, candidates: &[usize], threshold: f64) -> Vec<usize> {
    let mut picked: Vec<usize> = Vec::new();
    for &p in candidates {
        if picked.iter().all(|&q| space.dist(p, q) > threshold) {
            picked.push(p);
        }
    }
    picked
}

/// All maximal subsets of `candidates` with pairwise distances strictly
/// above `threshold`, via Bron-Kerbosch on the complement of the conflict
/// graph. Each subset is returned sorted by point id.
pub fn maximal_separated_subsets(
    space: &FiniteMetricSpace,
    candidates: &[usize],
    threshold: f64,
    cap: usize,
) -> Result<Vec<Vec<usize>>, LatticeError> {
    let m = candidates.len();
    if m > 64 {
        return Err(LatticeError::TooManyCandidates(m));
    }
    let full: u64 = if m == 64 { !0 } else { (1u64 << m) - 1 };
    // adjacency of the complement graph: j compatible with i when separated
    let mut compat = vec![0u64; m];
    for i in 0..m {
        for j in 0..m {
            if i != j && space.dist(candidates[i], candidates[j]) > threshold {
                compat[i] |= 1 << j;
            }
        }
    }
    let mut out: Vec<u64> = Vec::new();
    bron_kerbosch(&compat, 0, full, 0, &mut out, cap)?;
    let mut sets: Vec<Vec<usize>> = out
        .into_iter()
        .map(|mask| {
            (0..m)
                .filter(|i| mask & (1 << i) != 0)
                .map(|i| candidates[i])
                .collect()
        })
        .collect();
    sets.sort();
    Ok(sets)
}

/// Enumerate all maximal cliques of the `compat` graph (equivalently,
/// maximal independent sets of its complement).
pub(crate) fn bron_kerbosch(
    compat: &[u64],
    r: u64,
    mut p: u64,
    mut x: u64,
    out: &mut Vec<u64>,
    cap: usize,
) -> Result<(), LatticeError> {
    if p == 0 && x == 0 {
        if out.len() >= cap {
            return Err(LatticeError::EnumerationTooLarge { cap });
        }
        out.push(r);
        return Ok(());
    }
    // pivot: vertex of P | X with most compatibilities inside P
    let pivot = {
        let mut best = usize::MAX;
        let mut best_count = -1i64;
        let mut pool = p | x;
        while pool != 0 {
            let v = pool.trailing_zeros() as usize;
            pool &= pool - 1;
            let c = (compat[v] & p).count_ones() as i64;
            if c > best_count {
                best_count = c;
                best = v;
            }
        }
        best
    };
    let mut branch = p & !compat[pivot];
    while branch != 0 {
        let v = branch.trailing_zeros() as usize;
        branch &= branch - 1;
        let bit = 1u64 << v;
        bron_kerbosch(compat, r | bit, p & compat[v], x & compat[v], out, cap)?;
        p &= !bit;
        x |= bit;
    }
    Ok(())
}

/// A grid drawn from `candidates`, either a single draw or the full list.
pub enum GridDraw {
    One(Vec<usize>, bool),
    All(Vec<Vec<usize>>),
}

/// Build one k-grid (or enumerate all of them) inside `candidates`.
pub fn build_k_grid(
    space: &FiniteMetricSpace,
    candidates: &[usize],
    threshold: f64,
    mode: GridMode,
    rng: Option<&mut Rng>,
    enumerate_all: bool,
    cap: usize,
) -> Result<GridDraw, LatticeError> {
    if enumerate_all {
        let all = maximal_separated_subsets(space, candidates, threshold, cap)?;
        return Ok(GridDraw::All(all));
    }
    match mode {
        GridMode::ExactUniform => {
            let all = maximal_separated_subsets(space, candidates, threshold, cap)?;
            let rng = rng.expect("sampling requires an rng");
            let pick = rng.below(all.len());
            Ok(GridDraw::One(all[pick].clone(), true))
        }
        GridMode::Greedy => {
            let rng = rng.expect("sampling requires an rng");
            let mut shuffled = candidates.to_vec();
            rng.shuffle(&mut shuffled);
            let mut grid = greedy_grid(space, &shuffled, threshold);
            grid.sort_unstable();
            Ok(GridDraw::One(grid, false))
        }
    }
}

/// Outcome of parent selection for one child.
enum ParentChoice {
    /// The unique parent within delta^k / 4.
    Unique(usize),
    /// All parents within 3 delta^k; one is drawn uniformly.
    Among(Vec<usize>),
}

fn parent_candidates(
    space: &FiniteMetricSpace,
    child: usize,
    parent_grid: &[usize],
    delta_k: f64,
    generation: usize,
) -> Result<ParentChoice, LatticeError> {
    let near: Vec<usize> = (0..parent_grid.len())
        .filter(|&i| space.dist(child, parent_grid[i]) <= delta_k / 4.0)
        .collect();
    debug_assert!(
        near.len() <= 1,
        "two parents within delta^k/4 contradict grid separation"
    );
    if let Some(&p) = near.first() {
        return Ok(ParentChoice::Unique(p));
    }
    let wide: Vec<usize> = (0..parent_grid.len())
        .filter(|&i| space.dist(child, parent_grid[i]) <= 3.0 * delta_k)
        .collect();
    if wide.is_empty() {
        return Err(LatticeError::NoParentInRange {
            child,
            generation,
        });
    }
    Ok(ParentChoice::Among(wide))
}

/// Assign parents between consecutive grids. `rng = None` resolves every
/// ambiguous child to its lowest-index candidate (deterministic mode).
pub fn assign_parents(
    space: &FiniteMetricSpace,
    child_grid: &[usize],
    parent_grid: &[usize],
    delta_k: f64,
    generation: usize,
    mut rng: Option<&mut Rng>,
) -> Result<Vec<usize>, LatticeError> {
    let mut out = Vec::with_capacity(child_grid.len());
    for (ci, &child) in child_grid.iter().enumerate() {
        let choice = parent_candidates(space, child, parent_grid, delta_k, generation)?;
        let p = match choice {
            ParentChoice::Unique(p) => p,
            ParentChoice::Among(cands) => match rng.as_deref_mut() {
                Some(r) => {
                    let mut stream = r.split(ci as u64);
                    cands[stream.below(cands.len())]
                }
                None => cands[0],
            },
        };
        out.push(p);
    }
    Ok(out)
}

/// Nearest fine-grid position for every point, ties broken by lowest id.
fn assign_points(space: &FiniteMetricSpace, fine_grid: &[usize]) -> Vec<usize> {
    (0..space.len())
        .map(|x| {
            let mut best = 0usize;
            let mut best_d = f64::INFINITY;
            for (i, &g) in fine_grid.iter().enumerate() {
                let d = space.dist(x, g);
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// The fixed non-random fine grid: greedy maximal delta^N-separated set
/// scanned in point-id order.
pub fn fixed_fine_grid(space: &FiniteMetricSpace, params: &HierarchyParams) -> Vec<usize> {
    let all: Vec<usize> = (0..space.len()).collect();
    greedy_grid(space, &all, params.delta.powi(params.levels as i32))
}

/// Build one random hierarchy. Generations >= `frozen_level` are
/// deterministic (greedy-by-index grids, lowest-index ambiguous parents);
/// generations below are random. The standard construction freezes only
/// the fine level N.
pub fn build_hierarchy(
    space: &FiniteMetricSpace,
    params: &HierarchyParams,
    mode: GridMode,
    frozen_level: usize,
    cap: usize,
) -> Result<LatticeSample, LatticeError> {
    params.validate()?;
    let n_levels = params.levels;
    let frozen = frozen_level.min(n_levels);
    let root = Rng::new(params.seed);
    let mut grids: Vec<Vec<usize>> = vec![Vec::new(); n_levels + 1];
    let mut parents: Vec<Vec<usize>> = vec![Vec::new(); n_levels + 1];
    grids[n_levels] = fixed_fine_grid(space, params);
    let mut exact = true;
    for k in (0..n_levels).rev() {
        let threshold = params.delta.powi(k as i32);
        let candidates = grids[k + 1].clone();
        let grid = if k >= frozen {
            greedy_grid(space, &candidates, threshold)
        } else {
            let mut grid_rng = root.split(k as u64);
            match build_k_grid(
                space,
                &candidates,
                threshold,
                mode,
                Some(&mut grid_rng),
                false,
                cap,
            )? {
                GridDraw::One(g, ex) => {
                    exact &= ex;
                    g
                }
                GridDraw::All(_) => unreachable!(),
            }
        };
        grids[k] = grid;
        let mut parent_rng = root.split(0x1000 + k as u64);
        let rng_opt = if k >= frozen {
            None
        } else {
            Some(&mut parent_rng)
        };
        parents[k + 1] = assign_parents(
            space,
            &grids[k + 1],
            &grids[k],
            threshold,
            k,
            rng_opt,
        )?;
    }
    let assignment = assign_points(space, &grids[n_levels]);
    Ok(LatticeSample {
        delta: params.delta,
        grids,
        parents,
        assignment,
        weight: 1.0,
        exact,
    })
}

/// Exhaustively enumerate every elementary event (grid choices and
/// ambiguous parent choices at every level) with its probability.
/// Weights sum to 1 by construction.
pub fn enumerate_hierarchies(
    space: &FiniteMetricSpace,
    params: &HierarchyParams,
    cap: usize,
) -> Result<Vec<LatticeSample>, LatticeError> {
    params.validate()?;
    let n_levels = params.levels;
    let fine = fixed_fine_grid(space, params);
    let assignment = assign_points(space, &fine);
    let mut done: Vec<LatticeSample> = Vec::new();
    // stack entries: grids and parents filled from level N down to `next+1`
    struct Partial {
        grids: Vec<Vec<usize>>,
        parents: Vec<Vec<usize>>,
        weight: f64,
        next: isize,
    }
    let mut stack = vec![Partial {
        grids: {
            let mut g = vec![Vec::new(); n_levels + 1];
            g[n_levels] = fine.clone();
            g
        },
        parents: vec![Vec::new(); n_levels + 1],
        weight: 1.0,
        next: n_levels as isize - 1,
    }];
    while let Some(partial) = stack.pop() {
        if partial.next < 0 {
            done.push(LatticeSample {
                delta: params.delta,
                grids: partial.grids,
                parents: partial.parents,
                assignment: assignment.clone(),
                weight: partial.weight,
                exact: true,
            });
            if done.len() > cap {
                return Err(LatticeError::EnumerationTooLarge { cap });
            }
            continue;
        }
        let k = partial.next as usize;
        let threshold = params.delta.powi(k as i32);
        let candidates = &partial.grids[k + 1];
        let grid_choices = maximal_separated_subsets(space, candidates, threshold, cap)?;
        let grid_prob = 1.0 / grid_choices.len() as f64;
        for grid in grid_choices {
            // per-child parent options between k+1 and k
            let mut options: Vec<Vec<usize>> = Vec::with_capacity(candidates.len());
            let mut feasible = true;
            for &child in candidates.iter() {
                match parent_candidates(space, child, &grid, threshold, k) {
                    Ok(ParentChoice::Unique(p)) => options.push(vec![p]),
                    Ok(ParentChoice::Among(cands)) => options.push(cands),
                    Err(e) => {
                        // a cover violation would be a construction bug
                        debug_assert!(false, "parent search failed: {e}");
                        feasible = false;
                        break;
                    }
                }
            }
            if !feasible {
                continue;
            }
            let combos: usize = options.iter().map(|o| o.len()).product();
            if stack.len() + done.len() + combos > cap {
                return Err(LatticeError::EnumerationTooLarge { cap });
            }
            let combo_prob: f64 = options.iter().map(|o| 1.0 / o.len() as f64).product();
            let mut idx = vec![0usize; options.len()];
            'combos: loop {
                let assignment_k: Vec<usize> =
                    idx.iter().zip(&options).map(|(&i, o)| o[i]).collect();
                let mut grids = partial.grids.clone();
                grids[k] = grid.clone();
                let mut parents = partial.parents.clone();
                parents[k + 1] = assignment_k;
                stack.push(Partial {
                    grids,
                    parents,
                    weight: partial.weight * grid_prob * combo_prob,
                    next: k as isize - 1,
                });
                // advance multi-index
                let mut pos = 0;
                while pos < idx.len() {
                    idx[pos] += 1;
                    if idx[pos] < options[pos].len() {
                        continue 'combos;
                    }
                    idx[pos] = 0;
                    pos += 1;
                }
                break;
            }
        }
    }
    Ok(done)
}

/// Grid-law verification: strict delta^k separation and maximality by the
/// exhaustive add-one check, plus the 3 delta^k covering radius.
#[derive(Clone, Debug, Default, Serialize)]
pub struct GridLawReport {
    pub separation_ok: bool,
    pub maximality_ok: bool,
    pub cover_radius_ok: bool,
    /// max over k, x of dist(x, G_k) / delta^k (paper bound: 3).
    pub worst_cover_ratio: f64,
}

pub fn verify_grid_laws(space: &FiniteMetricSpace, sample: &LatticeSample) -> GridLawReport {
    let n_levels = sample.levels();
    let mut rep = GridLawReport {
        separation_ok: true,
        maximality_ok: true,
        cover_radius_ok: true,
        worst_cover_ratio: 0.0,
    };
    for k in 0..=n_levels {
        let threshold = sample.delta.powi(k as i32);
        let grid = &sample.grids[k];
        for (a, &p) in grid.iter().enumerate() {
            for &q in grid.iter().skip(a + 1) {
                if space.dist(p, q) <= threshold {
                    rep.separation_ok = false;
                }
            }
        }
        // maximality within the candidate pool (grid below, or X at level N)
        let pool: Vec<usize> = if k == n_levels {
            (0..space.len()).collect()
        } else {
            sample.grids[k + 1].clone()
        };
        for &c in &pool {
            if grid.contains(&c) {
                continue;
            }
            let separated = grid.iter().all(|&q| space.dist(c, q) > threshold);
            if separated {
                rep.maximality_ok = false;
            }
        }
        // covering radius: every x within 3 delta^k of G_k
        for x in 0..space.len() {
            let d = space.point_set_distance(x, grid);
            let ratio = d / threshold;
            rep.worst_cover_ratio = rep.worst_cover_ratio.max(ratio);
            if d > 3.0 * threshold {
                rep.cover_radius_ok = false;
            }
        }
    }
    rep
}
