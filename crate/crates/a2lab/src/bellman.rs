//! The Bellman function B(x, y) = x^a y^a on the domain
//! Omega_Q = { x, y > 0, 1 < xy <= Q }: the Hessian inequality, the
//! midpoint (father-to-sons) convexity gain, and the Carleson property of
//! the tau sequence it produces.
//!
//! The Hessian inequality is an algebraic identity for all x, y > 0:
//! -d^2 B - a(1-2a) x^a y^a ((dx/x)^2 + (dy/y)^2) = a^2 x^a y^a (dx/x - dy/y)^2,
//! so the slack vanishes exactly along dx/x = dy/y.

use crate::linalg::log_log_slope;
use crate::metric::DoublingMeasure;
use crate::rng::Rng;
use crate::tree::{CubeId, CubeTree};
use crate::weights::carleson_constant;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BellmanError {
    #[error("cube ({0}, {1}) average pair left Omega_Q (xy = {2}, Q = {3}); the A2 input is inconsistent")]
    DomainExit(usize, usize, f64, f64),
    #[error("alpha = {0} out of range (0, 1/2)")]
    AlphaOutOfRange(f64),
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BellmanParams {
    pub alpha: f64,
    /// The A2 bound: Omega_Q caps xy at Q.
    pub q: f64,
}

impl BellmanParams {
    pub fn new(alpha: f64, q: f64) -> Result<Self, BellmanError> {
        if !(alpha > 0.0 && alpha < 0.5) {
            return Err(BellmanError::AlphaOutOfRange(alpha));
        }
        Ok(BellmanParams { alpha, q })
    }
}

pub fn bell(x: f64, y: f64, alpha: f64) -> f64 {
    (x * y).powf(alpha)
}

/// Analytic Hessian entries of B at (x, y).
pub fn hessian(x: f64, y: f64, alpha: f64) -> (f64, f64, f64) {
    let b = bell(x, y, alpha);
    let bxx = alpha * (alpha - 1.0) * b / (x * x);
    let bxy = alpha * alpha * b / (x * y);
    let byy = alpha * (alpha - 1.0) * b / (y * y);
    (bxx, bxy, byy)
}

/// -d^2B(x, y)(v, v) for direction v = (dx, dy).
pub fn neg_second_differential(x: f64, y: f64, alpha: f64, dx: f64, dy: f64) -> f64 {
    let (bxx, bxy, byy) = hessian(x, y, alpha);
    -(bxx * dx * dx + 2.0 * bxy * dx * dy + byy * dy * dy)
}

/// The right-hand side a(1-2a) x^a y^a ((dx/x)^2 + (dy/y)^2).
pub fn hessian_lower_bound(x: f64, y: f64, alpha: f64, dx: f64, dy: f64) -> f64 {
    alpha * (1.0 - 2.0 * alpha) * bell(x, y, alpha) * (dx * dx / (x * x) + dy * dy / (y * y))
}

/// tau_I = <w>^a <s>^a (Delta w^2 / <w>^2 + Delta s^2 / <s>^2) mu(I).
pub fn tau_value(
    avg_w: f64,
    avg_sigma: f64,
    delta_w: f64,
    delta_sigma: f64,
    alpha: f64,
    mass: f64,
) -> f64 {
    (avg_w * avg_sigma).powf(alpha)
        * (delta_w * delta_w / (avg_w * avg_w) + delta_sigma * delta_sigma / (avg_sigma * avg_sigma))
        * mass
}

#[derive(Clone, Debug, Serialize)]
pub struct HessianReport {
    pub samples: usize,
    pub directions: usize,
    /// min over samples of lhs - rhs; the identity keeps this >= 0 up to
    /// roundoff, with exact zero along dx/x = dy/y.
    pub worst_slack: f64,
    /// max relative disagreement between the analytic Hessian and central
    /// finite differences.
    pub worst_fd_error: f64,
    /// min of -d^2 B over a wider positive-quadrant sample (global
    /// concavity, no Omega_Q restriction).
    pub worst_concavity: f64,
    /// max of B over Omega_Q samples relative to Q^alpha (stays <= 1).
    pub range_ratio: f64,
}

/// Sample Omega_Q log-uniformly (x in [Q^-2, Q^2], xy in (1, Q]) and check
/// the Hessian inequality in the given number of unit directions, the
/// global concavity, the 0 <= B <= Q^alpha range, and the finite-difference
/// agreement.
pub fn bellman_hessian_check(
    params: &BellmanParams,
    samples: usize,
    directions: usize,
    seed: u64,
) -> HessianReport {
    let alpha = params.alpha;
    let q = params.q;
    let mut rng = Rng::new(seed);
    let mut worst_slack = f64::INFINITY;
    let mut worst_fd = 0.0f64;
    let mut worst_concavity = f64::INFINITY;
    let mut range_ratio = 0.0f64;
    let dirs: Vec<(f64, f64)> = (0..directions)
        .map(|j| {
            let theta = std::f64::consts::PI * j as f64 / directions as f64;
            (theta.cos(), theta.sin())
        })
        .collect();
    for i in 0..samples {
        let x = (rng.range_f64(-2.0, 2.0) * q.ln()).exp();
        let s = (rng.next_f64() * q.ln()).exp().max(1.0 + 1e-12);
        let y = s / x;
        range_ratio = range_ratio.max(bell(x, y, alpha) / q.powf(alpha));
        for &(dx, dy) in &dirs {
            let lhs = neg_second_differential(x, y, alpha, dx, dy);
            let rhs = hessian_lower_bound(x, y, alpha, dx, dy);
            worst_slack = worst_slack.min(lhs - rhs);
        }
        // wider positive-quadrant sample for plain concavity
        let xc = (rng.range_f64(-3.0, 3.0)).exp();
        let yc = (rng.range_f64(-3.0, 3.0)).exp();
        let (dx, dy) = dirs[i % dirs.len()];
        worst_concavity = worst_concavity.min(neg_second_differential(xc, yc, alpha, dx, dy));
        // central finite differences on a subsample: the directional second
        // difference [B(p+hv) + B(p-hv) - 2B(p)] / h^2 evaluated through
        // expm1/ln_1p, which removes the cancellation that would otherwise
        // swamp a step of 1e-5
        if i % 31 == 0 {
            for &(dx, dy) in &dirs {
                // step 1e-5 in the dominant relative coordinate
                let h = 1e-5 / (dx.abs() / x).max(dy.abs() / y);
                let u = |s: f64| -> f64 {
                    alpha * ((s * dx / x).ln_1p() + (s * dy / y).ln_1p())
                };
                let fd = bell(x, y, alpha) * (u(h).exp_m1() + u(-h).exp_m1()) / (h * h);
                let (bxx, bxy, byy) = hessian(x, y, alpha);
                let analytic = bxx * dx * dx + 2.0 * bxy * dx * dy + byy * dy * dy;
                if analytic.abs() > 1e-300 {
                    worst_fd = worst_fd.max((analytic - fd).abs() / analytic.abs());
                }
            }
        }
    }
    HessianReport {
        samples,
        directions,
        worst_slack,
        worst_fd_error: worst_fd,
        worst_concavity,
        range_ratio,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MidpointReport {
    /// mu(I) B(a) - sum_i mu(s_i) B(b_i); nonnegative by concavity.
    pub difference: f64,
    pub tau: f64,
    /// difference / tau when tau > 0.
    pub gain_ratio: Option<f64>,
    /// Lower bound on the difference from integrating -q'' over [0, 1/2]
    /// only; difference >= this up to quadrature and roundoff.
    pub half_integral: f64,
    /// c with difference >= c tau, from the half integral.
    pub c_half: Option<f64>,
    /// |difference - full Taylor-remainder quadrature| (independent route).
    pub quadrature_residual: f64,
    /// max_i |a - sum_i (mu_i / mu) b_i| component-wise (exact identity).
    pub gradient_residual: f64,
    /// min over segments, t in [0, 1/2], of first coordinate / (<w>_I / 2)
    /// (>= 1: the left-half coordinate bound).
    pub left_half_coordinate_margin: f64,
    pub avg_product: f64,
}

/// One father-to-sons convexity check at a cube: a = (<w>_I, <s>_I),
/// b_i the son average pairs. Errors when an average pair leaves Omega_Q.
pub fn midpoint_inequality_check(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    id: CubeId,
    w: &[f64],
    sigma: &[f64],
    params: &BellmanParams,
) -> Result<MidpointReport, BellmanError> {
    let alpha = params.alpha;
    let cube = tree.cube(id);
    let averages = |members: &[usize]| -> (f64, f64, f64) {
        let mut mu = 0.0;
        let mut wm = 0.0;
        let mut sm = 0.0;
        for &x in members {
            let m = measure.mass(x);
            mu += m;
            wm += w[x] * m;
            sm += sigma[x] * m;
        }
        (mu, wm / mu, sm / mu)
    };
    let (mu_i, aw, asg) = averages(&cube.members);
    let check_domain = |gen: usize, pos: usize, x: f64, y: f64| -> Result<(), BellmanError> {
        let prod = x * y;
        if prod < 1.0 - 1e-12 || prod > params.q * (1.0 + 1e-9) {
            return Err(BellmanError::DomainExit(gen, pos, prod, params.q));
        }
        Ok(())
    };
    check_domain(id.0, id.1, aw, asg)?;
    let mut sons: Vec<(f64, f64, f64)> = Vec::with_capacity(cube.sons.len());
    for &s in &cube.sons {
        let son = &tree.cubes[id.0 + 1][s];
        let v = averages(&son.members);
        check_domain(id.0 + 1, s, v.1, v.2)?;
        sons.push(v);
    }
    let mut difference = mu_i * bell(aw, asg, alpha);
    let mut grad_resid = 0.0f64;
    let mut sum_w = 0.0;
    let mut sum_s = 0.0;
    let mut tau_dw = 0.0;
    let mut tau_ds = 0.0;
    for &(mu_s, bw, bs) in &sons {
        difference -= mu_s * bell(bw, bs, alpha);
        sum_w += mu_s * bw;
        sum_s += mu_s * bs;
        tau_dw += (bw - aw).abs();
        tau_ds += (bs - asg).abs();
    }
    if !sons.is_empty() {
        grad_resid = grad_resid
            .max((sum_w / mu_i - aw).abs() / aw.max(1.0))
            .max((sum_s / mu_i - asg).abs() / asg.max(1.0));
    }
    let tau = tau_value(aw, asg, tau_dw, tau_ds, alpha, mu_i);
    // Taylor-remainder quadrature: difference equals
    // sum_i mu(s_i) int_0^1 (1 - t)(-q_i''(t)) dt, since the gradient term
    // cancels under the convex combination.
    let simpson = |lo: f64, hi: f64, panels: usize, f: &dyn Fn(f64) -> f64| -> f64 {
        let h = (hi - lo) / panels as f64;
        let mut acc = f(lo) + f(hi);
        for j in 1..panels {
            let t = lo + j as f64 * h;
            acc += f(t) * if j % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let mut full_quad = 0.0;
    let mut half_integral = 0.0;
    let mut left_margin = f64::INFINITY;
    for &(mu_s, bw, bs) in &sons {
        let (dx, dy) = (bw - aw, bs - asg);
        let neg_qpp = |t: f64| -> f64 {
            let x = aw + t * dx;
            let y = asg + t * dy;
            neg_second_differential(x, y, alpha, dx, dy)
        };
        full_quad += mu_s * simpson(0.0, 1.0, 1024, &|t| (1.0 - t) * neg_qpp(t));
        half_integral += mu_s * simpson(0.0, 0.5, 512, &|t| (1.0 - t) * neg_qpp(t));
        // left-half coordinate bound: both coordinates at least half the
        // father averages
        for &t in &[0.0, 0.25, 0.5] {
            left_margin = left_margin
                .min((aw + t * dx) / (0.5 * aw))
                .min((asg + t * dy) / (0.5 * asg));
        }
    }
    if sons.is_empty() {
        left_margin = 1.0;
    }
    Ok(MidpointReport {
        difference,
        tau,
        gain_ratio: if tau > 0.0 { Some(difference / tau) } else { None },
        half_integral,
        c_half: if tau > 0.0 {
            Some(half_integral / tau)
        } else {
            None
        },
        quadrature_residual: (difference - full_quad).abs(),
        gradient_residual: grad_resid,
        left_half_coordinate_margin: left_margin,
        avg_product: aw * asg,
    })
}

/// tau values for every cube of the tree.
pub fn tau_sequence(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    w: &[f64],
    sigma: &[f64],
    alpha: f64,
) -> Vec<Vec<f64>> {
    tree.cubes
        .iter()
        .enumerate()
        .map(|(gen, level)| {
            level
                .iter()
                .enumerate()
                .map(|(_pos, cube)| {
                    if cube.sons.is_empty() {
                        return 0.0;
                    }
                    let sums = |vals: &[f64], members: &[usize]| -> (f64, f64) {
                        let mut mu = 0.0;
                        let mut vm = 0.0;
                        for &x in members {
                            mu += measure.mass(x);
                            vm += vals[x] * measure.mass(x);
                        }
                        (mu, vm)
                    };
                    let (mu_i, wm) = sums(w, &cube.members);
                    let (_, sm) = sums(sigma, &cube.members);
                    let (aw, asg) = (wm / mu_i, sm / mu_i);
                    let mut dw = 0.0;
                    let mut ds = 0.0;
                    for &s in &cube.sons {
                        let son = &tree.cubes[gen + 1][s];
                        let (smu, swm) = sums(w, &son.members);
                        let (_, ssm) = sums(sigma, &son.members);
                        dw += (swm / smu - aw).abs();
                        ds += (ssm / smu - asg).abs();
                    }
                    tau_value(aw, asg, dw, ds, alpha, mu_i)
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct TauScalingRow {
    pub a2: f64,
    pub carleson_constant: f64,
    pub midpoint_min: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TauScalingTable {
    pub rows: Vec<TauScalingRow>,
    /// log-log slope of the Carleson constant against [w]_2.
    pub slope: f64,
}

/// Carleson constant of the tau sequence across a weight family, with the
/// fitted growth exponent in [w]_2 (the claim: at most alpha).
pub fn tau_carleson_experiment(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    weights: &[(Vec<f64>, f64)],
    alpha: f64,
) -> Result<TauScalingTable, BellmanError> {
    let mut rows = Vec::new();
    for (w, a2) in weights {
        let sigma: Vec<f64> = w.iter().map(|v| 1.0 / v).collect();
        let tau = tau_sequence(tree, measure, w, &sigma, alpha);
        let constant = carleson_constant(tree, measure, &tau);
        // domain cap for the midpoint checks: cube averages can run
        // slightly past the ball characteristic
        let q_eff = crate::weights::a2_over_cubes(tree, measure, w).max(*a2);
        let params = BellmanParams::new(alpha, q_eff)?;
        let mut midpoint_min = f64::INFINITY;
        for id in tree.iter_ids() {
            if tree.cube(id).sons.is_empty() {
                continue;
            }
            let rep = midpoint_inequality_check(tree, measure, id, w, &sigma, &params)?;
            midpoint_min = midpoint_min.min(rep.difference);
        }
        rows.push(TauScalingRow {
            a2: *a2,
            carleson_constant: constant,
            midpoint_min,
        });
    }
    let slope = log_log_slope(
        &rows.iter().map(|r| r.a2).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.carleson_constant).collect::<Vec<_>>(),
    );
    Ok(TauScalingTable { rows, slope })
}
