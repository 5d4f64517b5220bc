//! Dyadic shifts of complexity (m, n): operators summing
//! c_{L,I,J} h_J (x) h_I (y) over cubes I, J below L at generation offsets
//! m and n, with |c| <= sqrt(mu(I) mu(J)) / mu(L). Includes assembly from
//! several coefficient sources, exact weighted operator norms, stopping
//! families and the per-family aggregation inequality, and the S/R
//! functional split of the shift form.

use crate::bellman::tau_value;
use crate::haar::{weighted_haar_decomposition, HaarSystem, WeightedHaar};
use crate::linalg::{log_log_slope, weighted_operator_norm, Mat, NormMethod};
use crate::metric::DoublingMeasure;
use crate::rng::Rng;
use crate::tree::{CubeId, CubeTree};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ShiftError {
    #[error("tree depth {depth} too shallow for complexity ({m}, {n})")]
    TreeTooShallow { depth: usize, m: usize, n: usize },
    #[error("linear algebra failure: {0}")]
    Linalg(#[from] crate::linalg::LinalgError),
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftEntry {
    pub l: CubeId,
    /// Haar function indices in the system.
    pub i_fn: usize,
    pub j_fn: usize,
    pub c: f64,
    /// sqrt(mu(I) mu(J)) / mu(L), the admissible magnitude.
    pub bound: f64,
}

#[derive(Clone, Debug)]
pub struct DyadicShift {
    pub m: usize,
    pub n: usize,
    pub entries: Vec<ShiftEntry>,
    /// Point-space action: (S f)(x) = sum_y matrix[x][y] f(y).
    pub matrix: Mat,
    /// Number of source coefficients clamped to the admissible bound.
    pub clamped: usize,
}

/// Where coefficients come from.
pub enum CoefficientSource<'a> {
    Zero,
    /// Uniform in [-bound, bound], independent per entry.
    Random { seed: u64 },
    /// c = +-bound with the sign making c (f, h_I)(g, h_J) nonnegative:
    /// the worst-case pattern for the fixed pair.
    WorstCase { f: &'a [f64], g: &'a [f64] },
    /// c = (T h_I, h_J)_mu extracted from an operator, clamped to the
    /// admissible bound when it exceeds it.
    FromOperator { op: &'a Mat },
}

/// Positions of descendants of `cube` at `depth` generations below.
pub fn descendants_at_depth(tree: &CubeTree, id: CubeId, depth: usize) -> Vec<usize> {
    let mut current = vec![id.1];
    let mut gen = id.0;
    for _ in 0..depth {
        let mut next = Vec::new();
        for &pos in &current {
            next.extend_from_slice(&tree.cubes[gen][pos].sons);
        }
        current = next;
        gen += 1;
    }
    current
}

pub fn assemble_shift(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    m: usize,
    n: usize,
    source: CoefficientSource,
    n_points: usize,
) -> Result<DyadicShift, ShiftError> {
    let depth = tree.levels();
    if m.max(n) > depth {
        return Err(ShiftError::TreeTooShallow { depth, m, n });
    }
    let mut entries: Vec<ShiftEntry> = Vec::new();
    let mut clamped = 0usize;
    let mut rng = match &source {
        CoefficientSource::Random { seed } => Some(Rng::new(*seed)),
        _ => None,
    };
    // precomputed coefficient tables for FromOperator / WorstCase
    let (f_coeffs, g_coeffs) = match &source {
        CoefficientSource::WorstCase { f, g } => {
            let dummy_measure = measure;
            (
                Some(sys.coefficients(tree, dummy_measure, f)),
                Some(sys.coefficients(tree, dummy_measure, g)),
            )
        }
        _ => (None, None),
    };
    let op_columns: Option<Vec<Vec<f64>>> = match &source {
        CoefficientSource::FromOperator { op } => {
            // (T h_I, h_J)_mu for all pairs: first T h for every Haar fn
            let mut cols = Vec::with_capacity(sys.len());
            for idx in 0..sys.len() {
                let h = sys.point_values(tree, idx, n_points);
                let mut th = vec![0.0; n_points];
                op.matvec(&h, &mut th);
                cols.push(sys.coefficients(tree, measure, &th));
            }
            Some(cols)
        }
        _ => None,
    };
    for (gen_l, level) in tree.cubes.iter().enumerate() {
        if gen_l + m > depth || gen_l + n > depth {
            continue;
        }
        for pos_l in 0..level.len() {
            let l_id = (gen_l, pos_l);
            let mu_l = sys.cube_mass[gen_l][pos_l];
            let i_cubes = descendants_at_depth(tree, l_id, m);
            let j_cubes = descendants_at_depth(tree, l_id, n);
            for &ic in &i_cubes {
                for i_fn in &sys.by_cube[gen_l + m][ic] {
                    let mu_i = sys.cube_mass[gen_l + m][ic];
                    for &jc in &j_cubes {
                        for j_fn in &sys.by_cube[gen_l + n][jc] {
                            let mu_j = sys.cube_mass[gen_l + n][jc];
                            let bound = (mu_i * mu_j).sqrt() / mu_l;
                            let c = match &source {
                                CoefficientSource::Zero => 0.0,
                                CoefficientSource::Random { .. } => {
                                    let r = rng.as_mut().unwrap();
                                    bound * r.symmetric()
                                }
                                CoefficientSource::WorstCase { .. } => {
                                    let fi = f_coeffs.as_ref().unwrap()[*i_fn];
                                    let gj = g_coeffs.as_ref().unwrap()[*j_fn];
                                    if fi * gj >= 0.0 {
                                        bound
                                    } else {
                                        -bound
                                    }
                                }
                                CoefficientSource::FromOperator { .. } => {
                                    let raw = op_columns.as_ref().unwrap()[*i_fn][*j_fn];
                                    if raw.abs() > bound {
                                        clamped += 1;
                                        bound * raw.signum()
                                    } else {
                                        raw
                                    }
                                }
                            };
                            if c != 0.0 {
                                entries.push(ShiftEntry {
                                    l: l_id,
                                    i_fn: *i_fn,
                                    j_fn: *j_fn,
                                    c,
                                    bound,
                                });
                            }
                        }
                    }
                }
            }
        }
    }
    let matrix = shift_matrix(tree, measure, sys, &entries, n_points);
    Ok(DyadicShift {
        m,
        n,
        entries,
        matrix,
        clamped,
    })
}

/// Dense point-space matrix of a coefficient list:
/// M[x][y] = sum c h_J(x) h_I(y) mu(y).
fn shift_matrix(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    entries: &[ShiftEntry],
    n_points: usize,
) -> Mat {
    let mut m = Mat::zeros(n_points, n_points);
    for e in entries {
        let hj = &sys.fns[e.j_fn];
        let hi = &sys.fns[e.i_fn];
        let (gj, pj) = hj.cube;
        let (gi, pi) = hi.cube;
        for (sj, &son_j) in tree.cubes[gj][pj].sons.iter().enumerate() {
            let vj = hj.son_values[sj];
            if vj == 0.0 {
                continue;
            }
            for &x in &tree.cubes[gj + 1][son_j].members {
                let row = x * n_points;
                for (si, &son_i) in tree.cubes[gi][pi].sons.iter().enumerate() {
                    let vi = hi.son_values[si];
                    if vi == 0.0 {
                        continue;
                    }
                    let front = e.c * vj * vi;
                    for &y in &tree.cubes[gi + 1][son_i].members {
                        m.data[row + y] += front * measure.mass(y);
                    }
                }
            }
        }
    }
    m
}

impl DyadicShift {
    /// The bilinear form (S f, g)_mu straight from the coefficients
    /// (independent of the assembled matrix).
    pub fn form(
        &self,
        tree: &CubeTree,
        measure: &DoublingMeasure,
        sys: &HaarSystem,
        f: &[f64],
        g: &[f64],
    ) -> f64 {
        let fc = sys.coefficients(tree, measure, f);
        let gc = sys.coefficients(tree, measure, g);
        self.entries
            .iter()
            .map(|e| e.c * fc[e.i_fn] * gc[e.j_fn])
            .sum()
    }

    /// max over entries of |c| mu(L) / sqrt(mu(I) mu(J)); admissible
    /// shifts stay <= 1.
    pub fn coefficient_bound_ratio(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| if e.bound > 0.0 { e.c.abs() / e.bound } else { 0.0 })
            .fold(0.0, f64::max)
    }

    pub fn weighted_norm(
        &self,
        measure: &DoublingMeasure,
        w: &[f64],
        method: NormMethod,
        seed: u64,
    ) -> Result<f64, ShiftError> {
        let mu: Vec<f64> = (0..self.matrix.rows).map(|x| measure.mass(x)).collect();
        Ok(weighted_operator_norm(&self.matrix, w, &mu, method, seed)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StopReason {
    /// |Delta_K w| / <w>_K or the sigma variant reached 1/(m+n+1).
    Ratio,
    /// g(K) = g(L) + m.
    Generation,
}

#[derive(Clone, Debug, Serialize)]
pub struct StoppingFamily {
    pub root: CubeId,
    pub m: usize,
    pub n: usize,
    /// p = 2 - 1/(m+n+1).
    pub p: f64,
    pub members: Vec<(CubeId, StopReason)>,
}

fn oscillation(tree: &CubeTree, measure: &DoublingMeasure, id: CubeId, w: &[f64]) -> (f64, f64) {
    let cube = tree.cube(id);
    let mut mu = 0.0;
    let mut wm = 0.0;
    for &x in &cube.members {
        mu += measure.mass(x);
        wm += w[x] * measure.mass(x);
    }
    let avg = wm / mu;
    let mut delta = 0.0;
    for &s in &cube.sons {
        let son = &tree.cubes[id.0 + 1][s];
        let mut smu = 0.0;
        let mut swm = 0.0;
        for &x in &son.members {
            smu += measure.mass(x);
            swm += w[x] * measure.mass(x);
        }
        delta += (swm / smu - avg).abs();
    }
    (avg, delta)
}

/// Maximal stopping cubes below L: the first cube on each descending path
/// where the w or sigma oscillation ratio reaches 1/(m+n+1), or the
/// generation g(L)+m slice.
pub fn build_stopping_family(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
    sigma: &[f64],
    root: CubeId,
    m: usize,
    n: usize,
) -> StoppingFamily {
    let threshold = 1.0 / (m + n + 1) as f64;
    let bottom = root.0 + m;
    let mut members = Vec::new();
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        if id.0 == bottom {
            members.push((id, StopReason::Generation));
            continue;
        }
        let (avg_w, delta_w) = oscillation(tree, measure, id, w);
        let (avg_s, delta_s) = oscillation(tree, measure, id, sigma);
        if delta_w / avg_w >= threshold || delta_s / avg_s >= threshold {
            members.push((id, StopReason::Ratio));
            continue;
        }
        if tree.cube(id).sons.is_empty() {
            // path ends above the slice; treat the leaf as a generation stop
            members.push((id, StopReason::Generation));
            continue;
        }
        for &s in &tree.cube(id).sons {
            stack.push((id.0 + 1, s));
        }
    }
    members.sort_by_key(|(id, _)| *id);
    StoppingFamily {
        root,
        m,
        n,
        p: 2.0 - 1.0 / (m + n + 1) as f64,
        members,
    }
}

/// The in-between comparability: every father/son average ratio strictly
/// between the root and a stopping cube lies within 1 +- 1/(m+n+1).
pub fn verify_stopping_comparability(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
    sigma: &[f64],
    family: &StoppingFamily,
) -> bool {
    let threshold = 1.0 / (family.m + family.n + 1) as f64;
    for &(member, _) in &family.members {
        let mut id = member;
        while id.0 > family.root.0 {
            let parent = (id.0 - 1, tree.parent[id.0][id.1]);
            if parent != member {
                for weight in [w, sigma] {
                    let (avg_p, _) = oscillation(tree, measure, parent, weight);
                    let (avg_c, _) = oscillation(tree, measure, id, weight);
                    let ratio = avg_c / avg_p;
                    if !(1.0 - threshold - 1e-12..=1.0 + threshold + 1e-12).contains(&ratio) {
                        return false;
                    }
                }
            }
            id = parent;
        }
    }
    true
}

#[derive(Clone, Debug, Serialize)]
pub struct SborReport {
    /// worst over members of lhs / rhs_provable (<= 1 up to roundoff).
    pub worst_provable_ratio: f64,
    /// worst over members of lhs / rhs with the nominal constant
    /// 2 e^alpha (m+n+1); reported, not asserted.
    pub worst_nominal_ratio: f64,
    pub members_checked: usize,
    pub violations: usize,
}

/// Per stopping cube K: the generation-(g(L)+m) sum of
/// |<phi w>_I| (|Delta_I w| / <w>_I) mu(I) / sqrt(mu(L)) is controlled by
/// (m+n+1) <|phi| w>_K sqrt(mu(K)/mu(L)) sqrt(tau_K) <w>_L^{-a/2} <s>_L^{-a/2}.
///
/// The provable per-instance constant replaces the nominal 2 e^alpha by
/// sqrt(2) D_max e_swap (ratio stops) or e_swap (generation stops), where
/// D_max is the exact maximum oscillation ratio over the bottom slice in K
/// and e_swap the exact K-to-L average swap factor.
pub fn verify_sbor(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
    sigma: &[f64],
    family: &StoppingFamily,
    phi: &[f64],
    alpha: f64,
) -> SborReport {
    let (gen_l, pos_l) = family.root;
    let bottom = gen_l + family.m;
    let mnp1 = (family.m + family.n + 1) as f64;
    let mu_l: f64 = tree.cubes[gen_l][pos_l]
        .members
        .iter()
        .map(|&x| measure.mass(x))
        .sum();
    let (avg_w_l, _) = oscillation(tree, measure, family.root, w);
    let (avg_s_l, _) = oscillation(tree, measure, family.root, sigma);
    let mut worst_provable = 0.0f64;
    let mut worst_nominal = 0.0f64;
    let mut violations = 0usize;
    let mut checked = 0usize;
    for &(k_id, reason) in &family.members {
        if k_id.0 > bottom {
            continue;
        }
        let k_cube = tree.cube(k_id);
        let mu_k: f64 = k_cube.members.iter().map(|&x| measure.mass(x)).sum();
        let (avg_w_k, delta_w_k) = oscillation(tree, measure, k_id, w);
        let (avg_s_k, delta_s_k) = oscillation(tree, measure, k_id, sigma);
        let tau_k = tau_value(avg_w_k, avg_s_k, delta_w_k, delta_s_k, alpha, mu_k);
        // lhs over the bottom slice inside K
        let slice = descendants_at_depth(tree, k_id, bottom - k_id.0);
        let mut lhs = 0.0;
        let mut d_max = 0.0f64;
        for &ipos in &slice {
            let i_id = (bottom, ipos);
            let i_cube = tree.cube(i_id);
            let mu_i: f64 = i_cube.members.iter().map(|&x| measure.mass(x)).sum();
            let phiw: f64 = i_cube
                .members
                .iter()
                .map(|&x| phi[x] * w[x] * measure.mass(x))
                .sum::<f64>()
                / mu_i;
            let (avg_w_i, delta_w_i) = oscillation(tree, measure, i_id, w);
            let ratio_i = if i_cube.sons.is_empty() {
                0.0
            } else {
                delta_w_i / avg_w_i
            };
            d_max = d_max.max(ratio_i);
            lhs += phiw.abs() * ratio_i * mu_i / mu_l.sqrt();
        }
        let abs_phiw_k: f64 = k_cube
            .members
            .iter()
            .map(|&x| phi[x].abs() * w[x] * measure.mass(x))
            .sum::<f64>()
            / mu_k;
        let core = abs_phiw_k
            * (mu_k / mu_l).sqrt()
            * tau_k.sqrt()
            * avg_w_l.powf(-alpha / 2.0)
            * avg_s_l.powf(-alpha / 2.0);
        // exact swap factor between K- and L-averages
        let e_swap = (avg_w_l * avg_s_l / (avg_w_k * avg_s_k)).powf(alpha / 2.0);
        let fac = match reason {
            StopReason::Generation => e_swap,
            StopReason::Ratio => (2.0f64).sqrt() * d_max.max(1.0) * e_swap * mnp1,
        };
        let rhs_provable = match reason {
            StopReason::Generation => fac * core,
            StopReason::Ratio => fac * core,
        };
        let rhs_nominal = 2.0 * alpha.exp() * mnp1 * core;
        checked += 1;
        if lhs > rhs_provable * (1.0 + 1e-9) + 1e-300 {
            violations += 1;
        }
        if rhs_provable > 0.0 {
            worst_provable = worst_provable.max(lhs / rhs_provable);
        } else if lhs > 0.0 {
            violations += 1;
        }
        if rhs_nominal > 0.0 {
            worst_nominal = worst_nominal.max(lhs / rhs_nominal);
        }
    }
    SborReport {
        worst_provable_ratio: worst_provable,
        worst_nominal_ratio: worst_nominal,
        members_checked: checked,
        violations,
    }
}

/// The Holder-style exponent trick on a stopping family:
/// (sum a_K^2 mu(K)/mu(L))^{p/2} <= sum a_K^p (mu(K)/mu(L))^{p/2}
/// with p = 2 - 1/(m+n+1) and a_K = <|phi| w>_K.
pub fn verify_exponent_trick(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
    family: &StoppingFamily,
    phi: &[f64],
) -> (f64, f64) {
    let (gen_l, pos_l) = family.root;
    let mu_l: f64 = tree.cubes[gen_l][pos_l]
        .members
        .iter()
        .map(|&x| measure.mass(x))
        .sum();
    let p = family.p;
    let mut lhs_inner = 0.0;
    let mut rhs = 0.0;
    for &(k_id, _) in &family.members {
        let k_cube = tree.cube(k_id);
        let mu_k: f64 = k_cube.members.iter().map(|&x| measure.mass(x)).sum();
        let a: f64 = k_cube
            .members
            .iter()
            .map(|&x| phi[x].abs() * w[x] * measure.mass(x))
            .sum::<f64>()
            / mu_k;
        lhs_inner += a * a * mu_k / mu_l;
        rhs += a.powf(p) * (mu_k / mu_l).powf(p / 2.0);
    }
    (lhs_inner.powf(p / 2.0), rhs)
}

#[derive(Clone, Debug, Serialize)]
pub struct SlRlReport {
    pub s_phi: f64,
    pub r_phi: f64,
    pub s_psi: f64,
    pub r_psi: f64,
    /// Cauchy-Schwarz cap on S_L(phi w): sqrt(sum (phi w, h^w)^2) sqrt(<w>_L).
    pub s_phi_cap: f64,
    pub s_psi_cap: f64,
    /// the four split sums with exact alpha/beta pieces and admissible |c|.
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub term_iv: f64,
    /// |(S phi w, psi sigma)| for the supplied shift restricted to L.
    pub form_abs: f64,
}

/// S_L and R_L for one root L, the Cauchy-Schwarz bound on S_L, and the
/// four-way split of the shift form restricted to L.
#[allow(clippy::too_many_arguments)]
pub fn sl_rl_functionals(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    shift: &DyadicShift,
    root: CubeId,
    w: &[f64],
    sigma: &[f64],
    phi: &[f64],
    psi: &[f64],
) -> SlRlReport {
    let (gen_l, pos_l) = root;
    let m = shift.m;
    let n = shift.n;
    let mu_l = sys.cube_mass[gen_l][pos_l];
    let phiw: Vec<f64> = phi.iter().zip(w).map(|(a, b)| a * b).collect();
    let psis: Vec<f64> = psi.iter().zip(sigma).map(|(a, b)| a * b).collect();
    // weighted Haar data per I (offset m, against w) and per J (offset n,
    // against sigma)
    let build_side = |offset: usize, weight: &[f64], fval: &[f64]| {
        let cubes = descendants_at_depth(tree, root, offset);
        let mut rows: Vec<(usize, WeightedHaar, f64, f64, f64)> = Vec::new();
        // (fn idx, decomposition, (f, h^w)_mu, <f>_I, mu_I)
        for &pos in &cubes {
            let id = (gen_l + offset, pos);
            let mu_i = sys.cube_mass[id.0][id.1];
            let int_f: f64 = tree
                .cube(id)
                .members
                .iter()
                .map(|&x| fval[x] * measure.mass(x))
                .sum();
            for &fn_idx in &sys.by_cube[id.0][id.1] {
                let h = &sys.fns[fn_idx];
                let dec = weighted_haar_decomposition(tree, measure, h, weight)
                    .expect("positive weight");
                // (f, h^w)_mu via son integrals
                let mut pair = 0.0;
                for (si, &son) in tree.cube(id).sons.iter().enumerate() {
                    let int_son: f64 = tree.cubes[id.0 + 1][son]
                        .members
                        .iter()
                        .map(|&x| fval[x] * measure.mass(x))
                        .sum();
                    pair += dec.hw_son_values[si] * int_son;
                }
                rows.push((fn_idx, dec, pair, int_f / mu_i, mu_i));
            }
        }
        rows
    };
    let side_i = build_side(m, w, &phiw);
    let side_j = build_side(n, sigma, &psis);
    let mut s_phi = 0.0;
    let mut r_phi = 0.0;
    let mut cap_phi_sq = 0.0;
    for (_, dec, pair, avg, mu_i) in &side_i {
        s_phi += pair.abs() * dec.avg_w.sqrt() * mu_i.sqrt() / mu_l.sqrt();
        r_phi += avg.abs() * dec.delta_w / dec.avg_w * mu_i / mu_l.sqrt();
        cap_phi_sq += pair * pair;
    }
    let mut s_psi = 0.0;
    let mut r_psi = 0.0;
    let mut cap_psi_sq = 0.0;
    for (_, dec, pair, avg, mu_j) in &side_j {
        s_psi += pair.abs() * dec.avg_w.sqrt() * mu_j.sqrt() / mu_l.sqrt();
        r_psi += avg.abs() * dec.delta_w / dec.avg_w * mu_j / mu_l.sqrt();
        cap_psi_sq += pair * pair;
    }
    let (avg_w_l, _) = oscillation(tree, measure, root, w);
    let (avg_s_l, _) = oscillation(tree, measure, root, sigma);
    // four-way split with the exact alpha/beta decomposition
    // (phi w, h_I) = alpha_I (phi w, h^w_I) + beta_I mu(I) <phi w>_I
    let mut terms = [0.0f64; 4];
    let mut form = 0.0f64;
    for e in shift.entries.iter().filter(|e| e.l == root) {
        let i_row = side_i.iter().find(|r| r.0 == e.i_fn);
        let j_row = side_j.iter().find(|r| r.0 == e.j_fn);
        let (Some(i_row), Some(j_row)) = (i_row, j_row) else {
            continue;
        };
        let a_part_i = i_row.1.alpha * i_row.2;
        let b_part_i = i_row.1.beta * i_row.3 * i_row.4;
        let a_part_j = j_row.1.alpha * j_row.2;
        let b_part_j = j_row.1.beta * j_row.3 * j_row.4;
        form += e.c * (a_part_i + b_part_i) * (a_part_j + b_part_j);
        let b = e.bound;
        terms[0] += b * a_part_i.abs() * a_part_j.abs();
        terms[1] += b * a_part_i.abs() * b_part_j.abs();
        terms[2] += b * b_part_i.abs() * a_part_j.abs();
        terms[3] += b * b_part_i.abs() * b_part_j.abs();
    }
    SlRlReport {
        s_phi,
        r_phi,
        s_psi,
        r_psi,
        s_phi_cap: cap_phi_sq.sqrt() * avg_w_l.sqrt(),
        s_psi_cap: cap_psi_sq.sqrt() * avg_s_l.sqrt(),
        term_i: terms[0],
        term_ii: terms[1],
        term_iii: terms[2],
        term_iv: terms[3],
        form_abs: form.abs(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftBenchRow {
    pub m: usize,
    pub n: usize,
    pub a2: f64,
    pub worst_norm: f64,
    pub draws: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftBenchTable {
    pub rows: Vec<ShiftBenchRow>,
    /// per complexity (m, n): fitted log-log slope of worst norm vs a2.
    pub slopes: Vec<(usize, usize, f64)>,
    /// fitted exponent of norm growth in (m+n+1) at the largest a2.
    pub complexity_exponent: f64,
    /// worst |dense - power| / dense over the cross-checked cells.
    pub method_agreement: f64,
}

/// Worst weighted norm over coefficient draws, per complexity and weight;
/// slopes of norm vs [w]_2 per complexity. Dense/power agreement is
/// cross-checked on the first weight of each complexity.
#[allow(clippy::too_many_arguments)]
pub fn shift_bound_experiment(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    weights: &[Weighted],
    complexities: &[(usize, usize)],
    draws: usize,
    seed: u64,
    n_points: usize,
) -> Result<ShiftBenchTable, ShiftError> {
    let mut rows = Vec::new();
    let mut slopes = Vec::new();
    let mut agreement = 0.0f64;
    for &(m, n) in complexities {
        let mut a2s = Vec::new();
        let mut norms = Vec::new();
        for (wi, weight) in weights.iter().enumerate() {
            let mut worst = 0.0f64;
            for draw in 0..draws {
                let shift_seed = Rng::new(seed)
                    .split(m as u64 * 131 + n as u64)
                    .split(draw as u64)
                    .next_u64();
                let shift = assemble_shift(
                    tree,
                    measure,
                    sys,
                    m,
                    n,
                    CoefficientSource::Random { seed: shift_seed },
                    n_points,
                )?;
                let norm =
                    shift.weighted_norm(measure, &weight.w, NormMethod::PowerThenDense, shift_seed)?;
                if wi == 0 && draw == 0 {
                    let dense =
                        shift.weighted_norm(measure, &weight.w, NormMethod::Dense, shift_seed)?;
                    if dense > 0.0 {
                        agreement = agreement.max((dense - norm).abs() / dense);
                    }
                }
                worst = worst.max(norm);
            }
            a2s.push(weight.a2);
            norms.push(worst);
            rows.push(ShiftBenchRow {
                m,
                n,
                a2: weight.a2,
                worst_norm: worst,
                draws,
            });
        }
        slopes.push((m, n, log_log_slope(&a2s, &norms)));
    }
    // complexity exponent at the heaviest weight
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(m, n) in complexities {
        let heavy: Vec<&ShiftBenchRow> = rows
            .iter()
            .filter(|r| r.m == m && r.n == n)
            .collect();
        if let Some(last) = heavy.last() {
            xs.push((m + n + 1) as f64);
            ys.push(last.worst_norm);
        }
    }
    Ok(ShiftBenchTable {
        rows,
        slopes,
        complexity_exponent: log_log_slope(&xs, &ys),
        method_agreement: agreement,
    })
}

/// A weight paired with its A2 characteristic (precomputed by the caller).
#[derive(Clone, Debug)]
pub struct Weighted {
    pub w: Vec<f64>,
    pub a2: f64,
}
