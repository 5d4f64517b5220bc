//! Dense matrices and the two independent routes to spectral norms:
//! a cyclic Jacobi eigensolver on A^T A (dense route) and residual-checked
//! power iteration (fast route). Weighted operator norms go through the
//! explicit similarity D^{1/2} A D^{-1/2} with D the diagonal of w mu
//! masses, which avoids iterating in a non-Euclidean inner product.

use thiserror::Error;

use crate::rng::Rng;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("power iteration did not reach tolerance {tol} in {max_iter} iterations (residual {residual})")]
    NoConvergence {
        tol: f64,
        max_iter: usize,
        residual: f64,
    },
}

/// Row-major dense matrix.
#[derive(Clone, Debug)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows_data: Vec<Vec<f64>>) -> Self {
        let rows = rows_data.len();
        let cols = rows_data.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(rows * cols);
        for r in rows_data {
            assert_eq!(r.len(), cols);
            data.extend(r);
        }
        Mat { rows, cols, data }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }

    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }

    pub fn transpose_matvec(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for i in 0..self.rows {
            let vi = v[i];
            if vi == 0.0 {
                continue;
            }
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * vi;
            }
        }
    }

    /// Conjugate by a positive diagonal: D^{1/2} A D^{-1/2}.
    pub fn diagonal_similarity(&self, d: &[f64]) -> Mat {
        assert_eq!(self.rows, self.cols);
        let mut out = self.clone();
        for i in 0..self.rows {
            let si = d[i].sqrt();
            for j in 0..self.cols {
                *out.at_mut(i, j) *= si / d[j].sqrt();
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat {
        let mut out = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j);
            }
        }
        out
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// A^T A as a symmetric matrix.
fn gram(a: &Mat) -> Mat {
    let n = a.cols;
    let mut g = Mat::zeros(n, n);
    for r in 0..a.rows {
        let row = &a.data[r * n..(r + 1) * n];
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            for j in i..n {
                *g.at_mut(i, j) += ri * row[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            *g.at_mut(i, j) = g.at(j, i);
        }
    }
    g
}

/// Largest eigenvalue of a symmetric matrix by cyclic Jacobi sweeps.
/// Destroys its argument.
fn jacobi_max_eigenvalue(b: &mut Mat, tol: f64) -> f64 {
    let n = b.rows;
    if n == 0 {
        return 0.0;
    }
    if n == 1 {
        return b.at(0, 0);
    }
    let scale = b.frobenius().max(1e-300);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += b.at(p, q) * b.at(p, q);
            }
        }
        if (2.0 * off).sqrt() <= tol * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = b.at(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = b.at(p, p);
                let aqq = b.at(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // rotate rows/cols p and q
                for k in 0..n {
                    let akp = b.at(k, p);
                    let akq = b.at(k, q);
                    *b.at_mut(k, p) = c * akp - s * akq;
                    *b.at_mut(k, q) = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = b.at(p, k);
                    let aqk = b.at(q, k);
                    *b.at_mut(p, k) = c * apk - s * aqk;
                    *b.at_mut(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| b.at(i, i)).fold(f64::NEG_INFINITY, f64::max)
}

/// Largest singular value via the dense Jacobi route; relative accuracy
/// around 1e-10.
pub fn spectral_norm_dense(a: &Mat) -> f64 {
    let mut g = gram(a);
    jacobi_max_eigenvalue(&mut g, 1e-14).max(0.0).sqrt()
}

/// Largest singular value by power iteration on A^T A with a residual
/// stopping rule: accept theta when ||A^T A v - theta v|| <= tol * theta.
pub fn spectral_norm_power(
    a: &Mat,
    seed: u64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, LinalgError> {
    let n = a.cols;
    if n == 0 {
        return Ok(0.0);
    }
    let mut rng = Rng::new(seed ^ 0x5fec_7a11_u64);
    let mut v: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
    let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        v[0] = 1.0;
    } else {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    let mut av = vec![0.0; a.rows];
    let mut bv = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for it in 0..max_iter {
        a.matvec(&v, &mut av);
        a.transpose_matvec(&av, &mut bv);
        let theta: f64 = v.iter().zip(&bv).map(|(x, y)| x * y).sum();
        if it % 4 == 3 || it + 1 == max_iter {
            let residual: f64 = v
                .iter()
                .zip(&bv)
                .map(|(x, y)| (y - theta * x) * (y - theta * x))
                .sum::<f64>()
                .sqrt();
            last_residual = residual;
            if residual <= tol * theta.abs().max(1e-300) {
                return Ok(theta.max(0.0).sqrt());
            }
        }
        let bn: f64 = bv.iter().map(|x| x * x).sum::<f64>().sqrt();
        if bn == 0.0 {
            return Ok(0.0); // A^T A v = 0: v in the kernel of a zero map
        }
        for (x, y) in v.iter_mut().zip(&bv) {
            *x = y / bn;
        }
    }
    Err(LinalgError::NoConvergence {
        tol,
        max_iter,
        residual: last_residual,
    })
}

/// Which route computes a norm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormMethod {
    Dense,
    Power,
    /// Power iteration with a dense fallback on non-convergence.
    PowerThenDense,
}

/// Operator norm on L2(w dmu) of a point-space operator matrix: the
/// largest singular value of D^{1/2} A D^{-1/2} with D = diag(w mu).
pub fn weighted_operator_norm(
    op: &Mat,
    w: &[f64],
    mu: &[f64],
    method: NormMethod,
    seed: u64,
) -> Result<f64, LinalgError> {
    let d: Vec<f64> = w.iter().zip(mu).map(|(a, b)| a * b).collect();
    let conj = op.diagonal_similarity(&d);
    match method {
        NormMethod::Dense => Ok(spectral_norm_dense(&conj)),
        NormMethod::Power => spectral_norm_power(&conj, seed, 1e-11, 100_000),
        NormMethod::PowerThenDense => spectral_norm_power(&conj, seed, 1e-11, 30_000)
            .or_else(|_| Ok(spectral_norm_dense(&conj))),
    }
}

/// Least-squares slope of log(y) against log(x).
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pairs: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pairs.len() < 2 {
        return 0.0;
    }
    let n = pairs.len() as f64;
    let mx: f64 = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my: f64 = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
