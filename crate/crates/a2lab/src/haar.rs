//! Haar systems on cube trees: per cube with M sons, an orthonormal basis
//! of M-1 mean-zero functions constant on sons, and the weighted Haar
//! decomposition h = alpha h^w + beta chi used by the shift estimates.
//!
//! The basis is fixed by orthonormalizing son indicators against constants
//! in son-index order; the leading son always carries a positive value.
//! Leaves get no functions; completeness is relative to the leaf
//! sigma-algebra.

use crate::metric::DoublingMeasure;
use crate::tree::{CubeId, CubeTree};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HaarError {
    #[error("cube ({0}, {1}) has a son with non-positive mass")]
    ZeroMassSon(usize, usize),
    #[error("weight vanishes on cube ({0}, {1})")]
    DegenerateWeight(usize, usize),
}

/// One Haar function: values on the sons of its cube.
#[derive(Clone, Debug, Serialize)]
pub struct HaarFn {
    pub cube: CubeId,
    /// Values per son, aligned with `cube.sons`.
    pub son_values: Vec<f64>,
    pub sup: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HaarSystem {
    pub fns: Vec<HaarFn>,
    /// by_cube[gen][pos] = indices into `fns`.
    pub by_cube: Vec<Vec<Vec<usize>>>,
    /// cube_mass[gen][pos] = mu of the cube.
    pub cube_mass: Vec<Vec<f64>>,
}

impl HaarSystem {
    pub fn len(&self) -> usize {
        self.fns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fns.is_empty()
    }

    /// max over functions of sup|h| sqrt(mu(Q)): the constant C in the
    /// sup-norm property.
    pub fn sup_norm_constant(&self) -> f64 {
        self.fns
            .iter()
            .map(|h| h.sup * self.cube_mass[h.cube.0][h.cube.1].sqrt())
            .fold(0.0, f64::max)
    }

    /// Dense point-value vector of one function.
    pub fn point_values(&self, tree: &CubeTree, idx: usize, n_points: usize) -> Vec<f64> {
        let f = &self.fns[idx];
        let mut out = vec![0.0; n_points];
        let (gen, pos) = f.cube;
        for (si, &son_pos) in tree.cubes[gen][pos].sons.iter().enumerate() {
            for &x in &tree.cubes[gen + 1][son_pos].members {
                out[x] = f.son_values[si];
            }
        }
        out
    }

    /// (f, h)_mu for every Haar function at once, via per-cube integrals.
    pub fn coefficients(&self, tree: &CubeTree, measure: &DoublingMeasure, f: &[f64]) -> Vec<f64> {
        let integrals = tree.integrate_per_cube(f, measure);
        self.fns
            .iter()
            .map(|h| {
                let (gen, pos) = h.cube;
                tree.cubes[gen][pos]
                    .sons
                    .iter()
                    .enumerate()
                    .map(|(si, &son)| h.son_values[si] * integrals[gen + 1][son])
                    .sum()
            })
            .collect()
    }
}

/// Orthonormalize son indicators against constants, in son-index order.
/// Returns the M-1 son-value rows for a cube with masses `m` (twice-run
/// Gram-Schmidt keeps orthogonality at machine precision).
fn haar_rows(m: &[f64]) -> Vec<Vec<f64>> {
    let total: f64 = m.iter().sum();
    let count = m.len();
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count.saturating_sub(1));
    for j in 0..count {
        if rows.len() == count - 1 {
            break;
        }
        let mut v = vec![0.0; count];
        v[j] = 1.0;
        for _ in 0..2 {
            // against the constant
            let mean: f64 = v.iter().zip(m).map(|(a, w)| a * w).sum::<f64>() / total;
            for a in v.iter_mut() {
                *a -= mean;
            }
            // against the rows already built
            for row in &rows {
                let dot: f64 = v.iter().zip(row).zip(m).map(|((a, b), w)| a * b * w).sum();
                for (a, b) in v.iter_mut().zip(row) {
                    *a -= dot * b;
                }
            }
        }
        let norm2: f64 = v.iter().zip(m).map(|(a, w)| a * a * w).sum();
        if norm2 > 1e-24 {
            let inv = 1.0 / norm2.sqrt();
            for a in v.iter_mut() {
                *a *= inv;
            }
            // sign convention: positive on the pivot son
            if v[j] < 0.0 {
                for a in v.iter_mut() {
                    *a = -*a;
                }
            }
            rows.push(v);
        }
    }
    rows
}

pub fn build_haar_system(
    tree: &CubeTree,
    measure: &DoublingMeasure,
) -> Result<HaarSystem, HaarError> {
    let mut fns = Vec::new();
    let mut by_cube = Vec::with_capacity(tree.cubes.len());
    let mut cube_mass = Vec::with_capacity(tree.cubes.len());
    for (gen, level) in tree.cubes.iter().enumerate() {
        let mut level_idx = Vec::with_capacity(level.len());
        let mut level_mass = Vec::with_capacity(level.len());
        for (pos, cube) in level.iter().enumerate() {
            let mass: f64 = cube.members.iter().map(|&x| measure.mass(x)).sum();
            level_mass.push(mass);
            let mut ids = Vec::new();
            if cube.sons.len() >= 2 {
                let son_masses: Vec<f64> = cube
                    .sons
                    .iter()
                    .map(|&s| {
                        tree.cubes[gen + 1][s]
                            .members
                            .iter()
                            .map(|&x| measure.mass(x))
                            .sum()
                    })
                    .collect();
                if son_masses.iter().any(|&m| !(m > 0.0)) {
                    return Err(HaarError::ZeroMassSon(gen, pos));
                }
                for son_values in haar_rows(&son_masses) {
                    let sup = son_values.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
                    ids.push(fns.len());
                    fns.push(HaarFn {
                        cube: (gen, pos),
                        son_values,
                        sup,
                    });
                }
            }
            level_idx.push(ids);
        }
        by_cube.push(level_idx);
        cube_mass.push(level_mass);
    }
    Ok(HaarSystem {
        fns,
        by_cube,
        cube_mass,
    })
}

/// The split h = alpha h^w + beta chi_I of a Haar function against a
/// weight: h^w is h minus its projection onto constants in L2(w dmu),
/// normalized in L2(w dmu).
#[derive(Clone, Debug, Serialize)]
pub struct WeightedHaar {
    pub alpha: f64,
    pub beta: f64,
    /// h^w values per son.
    pub hw_son_values: Vec<f64>,
    /// Delta_I w = sum over sons of |<w>_s - <w>_I|.
    pub delta_w: f64,
    /// (h, w)_mu; controlled by Delta_I w mu(I)^(1/2) up to the sup constant.
    pub pairing: f64,
    /// <w>_{mu, I}.
    pub avg_w: f64,
    pub cube_mass: f64,
    /// sup|h| sqrt(mu(I)), the per-instance constant in the alpha bound.
    pub sup_constant: f64,
}

pub fn weighted_haar_decomposition(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    haar: &HaarFn,
    w: &[f64],
) -> Result<WeightedHaar, HaarError> {
    let (gen, pos) = haar.cube;
    let cube = &tree.cubes[gen][pos];
    let mut son_mu = Vec::with_capacity(cube.sons.len());
    let mut son_wmass = Vec::with_capacity(cube.sons.len());
    for &s in &cube.sons {
        let members = &tree.cubes[gen + 1][s].members;
        son_mu.push(members.iter().map(|&x| measure.mass(x)).sum::<f64>());
        son_wmass.push(
            members
                .iter()
                .map(|&x| w[x] * measure.mass(x))
                .sum::<f64>(),
        );
    }
    let mu_total: f64 = son_mu.iter().sum();
    let w_total: f64 = son_wmass.iter().sum();
    if !(w_total > 0.0) {
        return Err(HaarError::DegenerateWeight(gen, pos));
    }
    let avg_w = w_total / mu_total;
    let pairing: f64 = haar
        .son_values
        .iter()
        .zip(&son_wmass)
        .map(|(v, wm)| v * wm)
        .sum();
    let beta = pairing / w_total;
    let centered: Vec<f64> = haar.son_values.iter().map(|v| v - beta).collect();
    let alpha2: f64 = centered
        .iter()
        .zip(&son_wmass)
        .map(|(c, wm)| c * c * wm)
        .sum();
    let alpha = alpha2.sqrt();
    let hw_son_values: Vec<f64> = if alpha > 0.0 {
        centered.iter().map(|c| c / alpha).collect()
    } else {
        centered
    };
    let delta_w: f64 = son_mu
        .iter()
        .zip(&son_wmass)
        .map(|(&mu_s, &w_s)| (w_s / mu_s - avg_w).abs())
        .sum();
    Ok(WeightedHaar {
        alpha,
        beta,
        hw_son_values,
        delta_w,
        pairing,
        avg_w,
        cube_mass: mu_total,
        sup_constant: haar.sup * mu_total.sqrt(),
    })
}

/// Residuals and bound margins of one decomposition; all residuals should
/// sit at roundoff level.
#[derive(Clone, Debug, Serialize)]
pub struct DecompCheck {
    pub identity_residual: f64,
    /// |alpha| / (c_I sqrt(<w>_I)) with c_I = sup|h| sqrt(mu(I)); the bound
    /// |alpha| <= sqrt(<w>) holds with c_I = 1 (sup-normalized Haar) and
    /// with the reported c_I for the unit-L2 basis used here.
    pub alpha_ratio: f64,
    /// |alpha| / sqrt(<w>_I) without the constant, for reference.
    pub alpha_ratio_plain: f64,
    /// |(h^w, w)_mu| / (w-mass); exact orthogonality makes this roundoff.
    pub hw_orthogonality: f64,
    pub hw_norm_residual: f64,
    /// |(h, w)_mu| / (c_I Delta_I w mu(I)^(1/2)); <= 1 up to roundoff.
    pub delta_bound_ratio: f64,
    /// alpha^2 + beta^2 w(I) - (h, h)_{w dmu}; Pythagoras, roundoff.
    pub energy_residual: f64,
}

pub fn check_decomposition(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    haar: &HaarFn,
    dec: &WeightedHaar,
    w: &[f64],
) -> DecompCheck {
    let (gen, pos) = haar.cube;
    let cube = &tree.cubes[gen][pos];
    let mut identity_residual = 0.0f64;
    let mut h_energy = 0.0f64;
    let mut hw_pair = 0.0f64;
    let mut hw_norm = 0.0f64;
    let mut w_total = 0.0f64;
    for (si, &s) in cube.sons.iter().enumerate() {
        let wm: f64 = tree.cubes[gen + 1][s]
            .members
            .iter()
            .map(|&x| w[x] * measure.mass(x))
            .sum();
        w_total += wm;
        let recon = dec.alpha * dec.hw_son_values[si] + dec.beta;
        identity_residual = identity_residual.max((haar.son_values[si] - recon).abs());
        h_energy += haar.son_values[si] * haar.son_values[si] * wm;
        hw_pair += dec.hw_son_values[si] * wm;
        hw_norm += dec.hw_son_values[si] * dec.hw_son_values[si] * wm;
    }
    let sqrt_avg = dec.avg_w.sqrt();
    DecompCheck {
        identity_residual,
        alpha_ratio: dec.alpha / (dec.sup_constant * sqrt_avg),
        alpha_ratio_plain: dec.alpha / sqrt_avg,
        hw_orthogonality: hw_pair.abs() / w_total,
        hw_norm_residual: if dec.alpha > 0.0 {
            (hw_norm - 1.0).abs()
        } else {
            0.0
        },
        delta_bound_ratio: if dec.delta_w > 0.0 {
            dec.pairing.abs() / (dec.sup_constant * dec.delta_w * dec.cube_mass.sqrt())
        } else {
            // Delta = 0 forces (h, w) = 0
            dec.pairing.abs()
        },
        energy_residual: (dec.alpha * dec.alpha + dec.beta * dec.beta * w_total - h_energy).abs(),
    }
}
