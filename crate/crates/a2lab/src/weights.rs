//! Weights and their characteristics: [w]_2 and [w]_Ainfty over the ball
//! family, power-weight generators, the maximal function, Carleson
//! sequences and the embedding inequalities.
//!
//! The displayed Ainfty definition in the source material reads
//! exp(-<w>_B); the standard exp(-<log w>_B) form is what makes the chain
//! of inequalities work and is what is implemented here.

use crate::metric::{DoublingMeasure, FiniteMetricSpace};
use crate::tree::CubeTree;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("weight must be strictly positive at point {0}")]
    NonPositive(usize),
    #[error("weight vector length {0} does not match space size {1}")]
    LengthMismatch(usize, usize),
    #[error("could not reach target characteristic {0} (got up to {1})")]
    TargetUnreachable(f64, f64),
}

/// A strictly positive weight with its dual and both characteristics.
#[derive(Clone, Debug, Serialize)]
pub struct Weight {
    pub w: Vec<f64>,
    pub sigma: Vec<f64>,
    pub a2: f64,
    pub ainfty: f64,
}

impl Weight {
    pub fn new(
        w: Vec<f64>,
        space: &FiniteMetricSpace,
        measure: &DoublingMeasure,
    ) -> Result<Self, WeightError> {
        if w.len() != space.len() {
            return Err(WeightError::LengthMismatch(w.len(), space.len()));
        }
        for (i, &v) in w.iter().enumerate() {
            if !(v > 0.0) {
                return Err(WeightError::NonPositive(i));
            }
        }
        let sigma: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
        let a2 = a2_characteristic(space, measure, &w);
        let ainfty = ainfty_characteristic(space, measure, &w);
        Ok(Weight {
            w,
            sigma,
            a2,
            ainfty,
        })
    }

    pub fn constant(space: &FiniteMetricSpace, measure: &DoublingMeasure, c: f64) -> Self {
        Weight::new(vec![c; space.len()], space, measure).expect("constant weight is valid")
    }
}

/// Precomputed distance orderings: enumerating the distinct balls at a
/// center is a prefix walk over points sorted by distance, with ties
/// entering together. Build once per space, reuse across weights.
pub struct BallScanner {
    orders: Vec<Vec<usize>>,
    /// group_ends[center] = exclusive end index of each tie group.
    group_ends: Vec<Vec<usize>>,
}

impl BallScanner {
    pub fn new(space: &FiniteMetricSpace) -> Self {
        let n = space.len();
        let mut orders = Vec::with_capacity(n);
        let mut group_ends = Vec::with_capacity(n);
        for center in 0..n {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                space
                    .dist(center, a)
                    .partial_cmp(&space.dist(center, b))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut ends = Vec::new();
            let mut i = 0;
            while i < n {
                let d = space.dist(center, order[i]);
                let mut j = i;
                while j + 1 < n && space.dist(center, order[j + 1]) <= d + 1e-15 {
                    j += 1;
                }
                ends.push(j + 1);
                i = j + 1;
            }
            orders.push(order);
            group_ends.push(ends);
        }
        BallScanner { orders, group_ends }
    }

    /// Visit every distinct ball at `center` as a sorted-by-distance prefix,
    /// from the singleton up to the whole space.
    pub fn scan<F: FnMut(&[usize])>(&self, center: usize, mut visit: F) {
        let order = &self.orders[center];
        for &end in &self.group_ends[center] {
            visit(&order[..end]);
        }
    }
}


/// Exact sup over all balls of <w>_B <w^{-1}>_B, via incremental prefix
/// sums along each center's distance ordering. Always >= 1 by
/// Cauchy-Schwarz, = 1 exactly for constant weights.
pub fn a2_with_scanner(scanner: &BallScanner, measure: &DoublingMeasure, w: &[f64]) -> f64 {
    let mut sup: f64 = 1.0;
    for center in 0..scanner.orders.len() {
        let order = &scanner.orders[center];
        let mut mu = 0.0;
        let mut wm = 0.0;
        let mut sm = 0.0;
        let mut start = 0;
        for &end in &scanner.group_ends[center] {
            for &x in &order[start..end] {
                let m = measure.mass(x);
                mu += m;
                wm += w[x] * m;
                sm += m / w[x];
            }
            start = end;
            sup = sup.max((wm / mu) * (sm / mu));
        }
    }
    sup
}

pub fn a2_characteristic(
    space: &FiniteMetricSpace,
    measure: &DoublingMeasure,
    w: &[f64],
) -> f64 {
    a2_with_scanner(&BallScanner::new(space), measure, w)
}

/// Exact sup over all balls of <w>_B exp(-<log w>_B).
pub fn ainfty_with_scanner(scanner: &BallScanner, measure: &DoublingMeasure, w: &[f64]) -> f64 {
    let mut sup: f64 = 1.0;
    for center in 0..scanner.orders.len() {
        let order = &scanner.orders[center];
        let mut mu = 0.0;
        let mut wm = 0.0;
        let mut lm = 0.0;
        let mut start = 0;
        for &end in &scanner.group_ends[center] {
            for &x in &order[start..end] {
                let m = measure.mass(x);
                mu += m;
                wm += w[x] * m;
                lm += w[x].ln() * m;
            }
            start = end;
            sup = sup.max((wm / mu) * (-lm / mu).exp());
        }
    }
    sup
}

pub fn ainfty_characteristic(
    space: &FiniteMetricSpace,
    measure: &DoublingMeasure,
    w: &[f64],
) -> f64 {
    ainfty_with_scanner(&BallScanner::new(space), measure, w)
}

/// max over tree cubes of <w>_Q <w^{-1}>_Q. Cubes need not be balls, so
/// this can exceed the ball characteristic by a doubling-type factor;
/// domain checks over cube averages use the max of the two.
pub fn a2_over_cubes(tree: &CubeTree, measure: &DoublingMeasure, w: &[f64]) -> f64 {
    let mut sup: f64 = 1.0;
    for level in &tree.cubes {
        for cube in level {
            let mut mu = 0.0;
            let mut wm = 0.0;
            let mut sm = 0.0;
            for &x in &cube.members {
                let m = measure.mass(x);
                mu += m;
                wm += w[x] * m;
                sm += m / w[x];
            }
            sup = sup.max((wm / mu) * (sm / mu));
        }
    }
    sup
}

/// Same functional restricted to the cubes of a tree; diagnostic for
/// chains whose averages run over cubes rather than balls.
pub fn ainfty_over_cubes(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
) -> f64 {
    let mut sup: f64 = 1.0;
    for level in &tree.cubes {
        for cube in level {
            let mut mu = 0.0;
            let mut wm = 0.0;
            let mut lm = 0.0;
            for &x in &cube.members {
                let m = measure.mass(x);
                mu += m;
                wm += w[x] * m;
                lm += w[x].ln() * m;
            }
            sup = sup.max((wm / mu) * (-lm / mu).exp());
        }
    }
    sup
}

/// M_nu f(x) = max over balls at x of the nu-average of |f|; the singleton
/// ball makes M_nu f >= |f| pointwise.
pub fn maximal_with_scanner(scanner: &BallScanner, nu: &[f64], f: &[f64]) -> Vec<f64> {
    (0..scanner.orders.len())
        .map(|x| {
            let order = &scanner.orders[x];
            let mut best = 0.0f64;
            let mut mass = 0.0;
            let mut int = 0.0;
            let mut start = 0;
            for &end in &scanner.group_ends[x] {
                for &y in &order[start..end] {
                    mass += nu[y];
                    int += f[y].abs() * nu[y];
                }
                start = end;
                if mass > 0.0 {
                    best = best.max(int / mass);
                }
            }
            best
        })
        .collect()
}

pub fn maximal_function(space: &FiniteMetricSpace, nu: &[f64], f: &[f64]) -> Vec<f64> {
    maximal_with_scanner(&BallScanner::new(space), nu, f)
}

/// Power weight w(x) = max(dist(x, center), clamp)^beta with the clamp at
/// the net spacing (smallest positive distance).
pub fn power_weight(space: &FiniteMetricSpace, beta: f64, center: usize) -> Vec<f64> {
    let clamp = space
        .distance_set()
        .first()
        .copied()
        .unwrap_or(1.0)
        .max(1e-300);
    (0..space.len())
        .map(|x| space.dist(x, center).max(clamp).powf(beta))
        .collect()
}

/// Find beta >= 0 whose power weight has [w]_2 close to `target` (within
/// 2 percent or the bisection floor). [w]_2 is monotone in beta on nets.
pub fn power_weight_for_a2(
    space: &FiniteMetricSpace,
    measure: &DoublingMeasure,
    center: usize,
    target: f64,
) -> Result<(Vec<f64>, f64), WeightError> {
    let scanner = BallScanner::new(space);
    let a2_of = |beta: f64| {
        let w = power_weight(space, beta, center);
        a2_with_scanner(&scanner, measure, &w)
    };
    if target <= 1.0 + 1e-9 {
        return Ok((power_weight(space, 0.0, center), 0.0));
    }
    let mut hi = 0.5;
    let mut hi_val = a2_of(hi);
    let mut guard = 0;
    while hi_val < target && guard < 60 {
        hi *= 1.5;
        hi_val = a2_of(hi);
        guard += 1;
        if hi > 64.0 {
            break;
        }
    }
    if hi_val < target {
        return Err(WeightError::TargetUnreachable(target, hi_val));
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if a2_of(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let beta = 0.5 * (lo + hi);
    Ok((power_weight(space, beta, center), beta))
}

/// Per-cube nonnegative values with their Carleson constant: the best B
/// with sum over R inside Q of a_R <= B mu(Q).
#[derive(Clone, Debug, Serialize)]
pub struct CarlesonSequence {
    /// values[gen][pos], aligned with the tree.
    pub values: Vec<Vec<f64>>,
    pub constant: f64,
}

impl CarlesonSequence {
    pub fn new(tree: &CubeTree, measure: &DoublingMeasure, values: Vec<Vec<f64>>) -> Self {
        let constant = carleson_constant(tree, measure, &values);
        CarlesonSequence { values, constant }
    }
}

/// Exact sup over cubes Q of the subtree sum divided by mu(Q), via a
/// bottom-up pass.
pub fn carleson_constant(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    values: &[Vec<f64>],
) -> f64 {
    let levels = tree.cubes.len();
    let mut subtree: Vec<Vec<f64>> = values.to_vec();
    for gen in (0..levels - 1).rev() {
        for pos in 0..tree.cubes[gen].len() {
            let son_sum: f64 = tree.cubes[gen][pos]
                .sons
                .iter()
                .map(|&s| subtree[gen + 1][s])
                .sum();
            subtree[gen][pos] += son_sum;
        }
    }
    let mut best = 0.0f64;
    for (gen, level) in tree.cubes.iter().enumerate() {
        for (pos, cube) in level.iter().enumerate() {
            let mass: f64 = cube.members.iter().map(|&x| measure.mass(x)).sum();
            if mass > 0.0 {
                best = best.max(subtree[gen][pos] / mass);
            }
        }
    }
    best
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub carleson_b: f64,
    /// sum inf_L F alpha_L vs 2 B int F dmu.
    pub lhs_inf: f64,
    pub rhs_two_b: f64,
    pub holds_factor_two: bool,
    /// the plain-constant variant: lhs <= B int F (holds with factor 1).
    pub holds_factor_one: bool,
    /// weighted variant: sum (inf_L F / <sigma>_L) alpha_L vs rhs.
    pub lhs_weighted: Option<f64>,
    pub rhs_weighted: Option<f64>,
    /// fitted constant lhs / (B int F/sigma).
    pub weighted_constant: Option<f64>,
    pub holds_weighted: Option<bool>,
}

/// The embedding inequalities for a Carleson sequence alpha against a
/// positive function F: (1) with the stated factor 2B (and the sharper
/// factor B, which the layer-cake argument gives); (2) the sigma-weighted
/// variant, whose pinned constant is the Ainfty characteristic of 1/sigma.
pub fn carleson_embedding_check(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    measure: &DoublingMeasure,
    alpha: &CarlesonSequence,
    big_f: &[f64],
    sigma: Option<&[f64]>,
) -> EmbeddingReport {
    let b = alpha.constant;
    let int_f: f64 = big_f
        .iter()
        .enumerate()
        .map(|(x, v)| v * measure.mass(x))
        .sum();
    let mut lhs_inf = 0.0;
    let mut lhs_weighted = sigma.map(|_| 0.0f64);
    for (gen, level) in tree.cubes.iter().enumerate() {
        for (pos, cube) in level.iter().enumerate() {
            let a = alpha.values[gen][pos];
            if a == 0.0 {
                continue;
            }
            let inf_f = cube
                .members
                .iter()
                .map(|&x| big_f[x])
                .fold(f64::INFINITY, f64::min);
            lhs_inf += inf_f * a;
            if let (Some(acc), Some(sg)) = (lhs_weighted.as_mut(), sigma) {
                let mass: f64 = cube.members.iter().map(|&x| measure.mass(x)).sum();
                let savg: f64 = cube
                    .members
                    .iter()
                    .map(|&x| sg[x] * measure.mass(x))
                    .sum::<f64>()
                    / mass;
                *acc += inf_f / savg * a;
            }
        }
    }
    let tol = 1e-9 * (1.0 + lhs_inf.abs());
    let (rhs_weighted, weighted_constant, holds_weighted) = match sigma {
        Some(sg) => {
            let int_f_over_sigma: f64 = big_f
                .iter()
                .enumerate()
                .map(|(x, v)| v / sg[x] * measure.mass(x))
                .sum();
            let w_dual: Vec<f64> = sg.iter().map(|s| 1.0 / s).collect();
            let c_pin = ainfty_characteristic(space, measure, &w_dual)
                .max(ainfty_over_cubes(tree, measure, &w_dual));
            let rhs = c_pin * b * int_f_over_sigma;
            let lhs = lhs_weighted.unwrap();
            (
                Some(rhs),
                Some(if b * int_f_over_sigma > 0.0 {
                    lhs / (b * int_f_over_sigma)
                } else {
                    0.0
                }),
                Some(lhs <= rhs + 1e-9 * (1.0 + lhs.abs())),
            )
        }
        None => (None, None, None),
    };
    EmbeddingReport {
        carleson_b: b,
        lhs_inf,
        rhs_two_b: 2.0 * b * int_f,
        holds_factor_two: lhs_inf <= 2.0 * b * int_f + tol,
        holds_factor_one: lhs_inf <= b * int_f + tol,
        lhs_weighted,
        rhs_weighted,
        weighted_constant,
        holds_weighted,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainInequalityReport {
    /// worst <w>_R / ([w]_Ainfty inf_R M(w^{1/2} chi_R)^2) with the
    /// ball characteristic: the nominal form, reported only (the maximal
    /// function at a cube corner dilutes by the ball-over-cube mass).
    pub worst_nominal_ratio: f64,
    /// worst ratio against the provable right side
    /// [w]_{Ainfty over cubes} kappa_R^2 inf_R M^2, where kappa_R is the
    /// largest ball-to-cube mass quotient over the cube's points; stays
    /// <= 1 up to roundoff.
    pub worst_provable_ratio: f64,
    /// largest kappa_R seen (a geometry constant of the tree).
    pub worst_kappa: f64,
}

/// The average-to-maximal chain <w>_R <= C inf_{x in R} M(w^{1/2} chi_R)^2
/// on every cube of a tree, in both the nominal and the provable form.
pub fn chain_inequality_check(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
) -> ChainInequalityReport {
    let scanner = BallScanner::new(space);
    let ainf_balls = ainfty_with_scanner(&scanner, measure, w);
    let ainf_cubes = ainfty_over_cubes(tree, measure, w).max(ainf_balls);
    let nu: Vec<f64> = (0..space.len()).map(|x| measure.mass(x)).collect();
    let mut report = ChainInequalityReport {
        worst_nominal_ratio: 0.0,
        worst_provable_ratio: 0.0,
        worst_kappa: 1.0,
    };
    let mut in_cube = vec![false; space.len()];
    for level in &tree.cubes {
        for cube in level {
            let mut f = vec![0.0; space.len()];
            for &x in &cube.members {
                f[x] = w[x].sqrt();
                in_cube[x] = true;
            }
            let m = maximal_with_scanner(&scanner, &nu, &f);
            let inf_m2 = cube
                .members
                .iter()
                .map(|&x| m[x] * m[x])
                .fold(f64::INFINITY, f64::min);
            let mu: f64 = cube.members.iter().map(|&x| measure.mass(x)).sum();
            let avg_w: f64 = cube
                .members
                .iter()
                .map(|&x| w[x] * measure.mass(x))
                .sum::<f64>()
                / mu;
            // kappa_R: for each member, the mass of the smallest scanned
            // ball containing the whole cube, relative to the cube's mass
            let mut kappa: f64 = 1.0;
            for &x in &cube.members {
                let order = &scanner.orders[x];
                let mut found = 0usize;
                let mut ball_mass = 0.0;
                let mut start = 0;
                for &end in &scanner.group_ends[x] {
                    for &y in &order[start..end] {
                        ball_mass += measure.mass(y);
                        if in_cube[y] {
                            found += 1;
                        }
                    }
                    start = end;
                    if found == cube.members.len() {
                        break;
                    }
                }
                kappa = kappa.max(ball_mass / mu);
            }
            for &x in &cube.members {
                in_cube[x] = false;
            }
            report.worst_kappa = report.worst_kappa.max(kappa);
            report.worst_nominal_ratio = report
                .worst_nominal_ratio
                .max(avg_w / (ainf_balls * inf_m2));
            report.worst_provable_ratio = report
                .worst_provable_ratio
                .max(avg_w / (ainf_cubes * kappa * kappa * inf_m2));
        }
    }
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct AinftyInequalityReport {
    /// worst over Q of lhs / ([w]_Ainfty ||b||_C w(Q)).
    pub worst_ratio: f64,
    pub holds: bool,
    /// the same with the cube-restricted Ainfty functional.
    pub worst_ratio_cubes: f64,
}

/// sum over R inside Q of <w>_R b_R^2 <= [w]_Ainfty ||b||_C int_Q w dmu,
/// checked at every cube Q of the tree.
pub fn ainfty_inequality_check(
    space: &FiniteMetricSpace,
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
    b_values: &[Vec<f64>],
) -> AinftyInequalityReport {
    let levels = tree.cubes.len();
    let b_squared: Vec<Vec<f64>> = b_values
        .iter()
        .map(|level| level.iter().map(|b| b * b).collect())
        .collect();
    let norm_c = carleson_constant(tree, measure, &b_squared);
    let ainf = ainfty_characteristic(space, measure, w);
    let ainf_cubes = ainfty_over_cubes(tree, measure, w);
    // per-cube <w>_R b_R^2, then subtree sums
    let mut weighted: Vec<Vec<f64>> = Vec::with_capacity(levels);
    let mut w_mass: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for (gen, level) in tree.cubes.iter().enumerate() {
        let mut row = Vec::with_capacity(level.len());
        let mut wrow = Vec::with_capacity(level.len());
        for (pos, cube) in level.iter().enumerate() {
            let mu: f64 = cube.members.iter().map(|&x| measure.mass(x)).sum();
            let wm: f64 = cube
                .members
                .iter()
                .map(|&x| w[x] * measure.mass(x))
                .sum();
            row.push(wm / mu * b_squared[gen][pos]);
            wrow.push(wm);
        }
        weighted.push(row);
        w_mass.push(wrow);
    }
    let mut subtree = weighted.clone();
    for gen in (0..levels - 1).rev() {
        for pos in 0..tree.cubes[gen].len() {
            let s: f64 = tree.cubes[gen][pos]
                .sons
                .iter()
                .map(|&s| subtree[gen + 1][s])
                .sum();
            subtree[gen][pos] += s;
        }
    }
    let mut worst = 0.0f64;
    let mut worst_cubes = 0.0f64;
    for gen in 0..levels {
        for pos in 0..tree.cubes[gen].len() {
            if norm_c > 0.0 && w_mass[gen][pos] > 0.0 {
                let denom = norm_c * w_mass[gen][pos];
                worst = worst.max(subtree[gen][pos] / (ainf * denom));
                worst_cubes = worst_cubes.max(subtree[gen][pos] / (ainf_cubes * denom));
            }
        }
    }
    AinftyInequalityReport {
        worst_ratio: worst,
        holds: worst <= 1.0 + 1e-9,
        worst_ratio_cubes: worst_cubes,
    }
}
