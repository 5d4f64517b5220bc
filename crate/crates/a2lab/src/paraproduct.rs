//! Paraproducts: pi(f) = sum <f>_Q b_Q h_Q with Carleson coefficients
//! b_Q = (T chi_X, h_Q), the adjoint-shaped pi_*, and the rank-one piece
//! o(f) = <f><T chi_X> chi_X left over from the mean parts.

use crate::haar::HaarSystem;
use crate::linalg::{log_log_slope, weighted_operator_norm, Mat, NormMethod};
use crate::metric::DoublingMeasure;
use crate::shift::Weighted;
use crate::tree::CubeTree;
use crate::weights::carleson_constant;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ParaproductKind {
    Pi,
    PiStar,
    Rank1,
}

#[derive(Clone, Debug)]
pub struct Paraproduct {
    pub kind: ParaproductKind,
    /// Coefficient per Haar function (ignored by Rank1).
    pub b: Vec<f64>,
    /// <T chi_X> for the rank-one piece.
    pub mean_t: f64,
    pub matrix: Mat,
}

/// b_Q = (T chi_X, h_Q)_mu for every Haar function.
pub fn paraproduct_coefficients(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    op: &Mat,
) -> Vec<f64> {
    let n = op.rows;
    let ones = vec![1.0; n];
    let mut t_one = vec![0.0; n];
    op.matvec(&ones, &mut t_one);
    sys.coefficients(tree, measure, &t_one)
}

/// Carleson sequence of b^2 aggregated per cube.
pub fn b_squared_per_cube(tree: &CubeTree, sys: &HaarSystem, b: &[f64]) -> Vec<Vec<f64>> {
    let mut values: Vec<Vec<f64>> = tree
        .cubes
        .iter()
        .map(|level| vec![0.0; level.len()])
        .collect();
    for (idx, h) in sys.fns.iter().enumerate() {
        let (gen, pos) = h.cube;
        values[gen][pos] += b[idx] * b[idx];
    }
    values
}

pub fn build_paraproduct(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    b: Vec<f64>,
    mean_t: f64,
    kind: ParaproductKind,
    n_points: usize,
) -> Paraproduct {
    let mut matrix = Mat::zeros(n_points, n_points);
    match kind {
        ParaproductKind::Pi => {
            // M[x][y] += b h(x) mu(y) / mu(Q) over y in Q
            for (idx, h) in sys.fns.iter().enumerate() {
                if b[idx] == 0.0 {
                    continue;
                }
                let (gen, pos) = h.cube;
                let cube = &tree.cubes[gen][pos];
                let mu_q = sys.cube_mass[gen][pos];
                for (si, &son) in cube.sons.iter().enumerate() {
                    let hv = h.son_values[si];
                    if hv == 0.0 {
                        continue;
                    }
                    for &x in &tree.cubes[gen + 1][son].members {
                        let row = x * n_points;
                        for &y in &cube.members {
                            matrix.data[row + y] += b[idx] * hv * measure.mass(y) / mu_q;
                        }
                    }
                }
            }
        }
        ParaproductKind::PiStar => {
            // M[x][y] += b (chi_Q(x)/mu(Q)) h(y) mu(y)
            for (idx, h) in sys.fns.iter().enumerate() {
                if b[idx] == 0.0 {
                    continue;
                }
                let (gen, pos) = h.cube;
                let cube = &tree.cubes[gen][pos];
                let mu_q = sys.cube_mass[gen][pos];
                for &x in &cube.members {
                    let row = x * n_points;
                    for (si, &son) in cube.sons.iter().enumerate() {
                        let hv = h.son_values[si];
                        for &y in &tree.cubes[gen + 1][son].members {
                            matrix.data[row + y] += b[idx] * hv * measure.mass(y) / mu_q;
                        }
                    }
                }
            }
        }
        ParaproductKind::Rank1 => {
            let total = measure.total();
            for x in 0..n_points {
                for y in 0..n_points {
                    matrix.data[x * n_points + y] = mean_t * measure.mass(y) / total;
                }
            }
        }
    }
    Paraproduct {
        kind,
        b,
        mean_t,
        matrix,
    }
}

impl Paraproduct {
    pub fn apply(&self, f: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.matrix.rows];
        self.matrix.matvec(f, &mut out);
        out
    }

    pub fn weighted_norm(
        &self,
        measure: &DoublingMeasure,
        w: &[f64],
        method: NormMethod,
        seed: u64,
    ) -> Result<f64, crate::linalg::LinalgError> {
        let mu: Vec<f64> = (0..self.matrix.rows).map(|x| measure.mass(x)).collect();
        weighted_operator_norm(&self.matrix, w, &mu, method, seed)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ParaproductScalingRow {
    pub a2: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ParaproductScaling {
    pub rows: Vec<ParaproductScalingRow>,
    pub slope: f64,
    pub carleson_b: f64,
}

/// ||pi||_{L2(w dmu)} across a weight family with the fitted slope in
/// [w]_2; the claim is linear growth.
pub fn paraproduct_norm_experiment(
    tree: &CubeTree,
    measure: &DoublingMeasure,
    sys: &HaarSystem,
    b: &[f64],
    weights: &[Weighted],
    n_points: usize,
    seed: u64,
) -> Result<ParaproductScaling, crate::linalg::LinalgError> {
    let pp = build_paraproduct(
        tree,
        measure,
        sys,
        b.to_vec(),
        0.0,
        ParaproductKind::Pi,
        n_points,
    );
    let b_sq = b_squared_per_cube(tree, sys, b);
    let carleson_b = carleson_constant(tree, measure, &b_sq);
    let mut rows = Vec::new();
    for (i, weight) in weights.iter().enumerate() {
        let norm = pp.weighted_norm(measure, &weight.w, NormMethod::PowerThenDense, seed + i as u64)?;
        rows.push(ParaproductScalingRow {
            a2: weight.a2,
            norm,
        });
    }
    let slope = log_log_slope(
        &rows.iter().map(|r| r.a2).collect::<Vec<_>>(),
        &rows.iter().map(|r| r.norm).collect::<Vec<_>>(),
    );
    Ok(ParaproductScaling {
        rows,
        slope,
        carleson_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::build_haar_system;
    use crate::rng::Rng;
    use crate::tree::uniform_mary_tree;

    fn setup() -> (usize, CubeTree, DoublingMeasure, HaarSystem) {
        let (space, tree) = uniform_mary_tree(2, 4);
        let n = space.len();
        let measure = DoublingMeasure::uniform(n);
        let sys = build_haar_system(&tree, &measure).unwrap();
        (n, tree, measure, sys)
    }

    #[test]
    fn zero_coefficients_zero_operator() {
        let (n, tree, measure, sys) = setup();
        let pp = build_paraproduct(
            &tree,
            &measure,
            &sys,
            vec![0.0; sys.len()],
            0.0,
            ParaproductKind::Pi,
            n,
        );
        assert_eq!(pp.matrix.frobenius(), 0.0);
    }

    #[test]
    fn pi_of_constant_recovers_mean_zero_part() {
        // with b from an operator T, pi(chi_X) = T chi_X - <T chi_X>
        let (n, tree, measure, sys) = setup();
        let mut rng = Rng::new(3);
        let mut t = Mat::zeros(n, n);
        for v in t.data.iter_mut() {
            *v = rng.symmetric();
        }
        let b = paraproduct_coefficients(&tree, &measure, &sys, &t);
        let pp = build_paraproduct(&tree, &measure, &sys, b, 0.0, ParaproductKind::Pi, n);
        let ones = vec![1.0; n];
        let got = pp.apply(&ones);
        let mut t_one = vec![0.0; n];
        t.matvec(&ones, &mut t_one);
        let mean: f64 = t_one
            .iter()
            .enumerate()
            .map(|(x, v)| v * measure.mass(x))
            .sum::<f64>()
            / measure.total();
        for (x, g) in got.iter().enumerate() {
            assert!(
                (g - (t_one[x] - mean)).abs() < 1e-10,
                "x {x}: {g} vs {}",
                t_one[x] - mean
            );
        }
    }

    #[test]
    fn adjoint_consistency() {
        // (pi f, g)_mu = (f, pi_* g)_mu with shared b
        let (n, tree, measure, sys) = setup();
        let mut rng = Rng::new(9);
        let b: Vec<f64> = (0..sys.len()).map(|_| rng.symmetric()).collect();
        let pi = build_paraproduct(&tree, &measure, &sys, b.clone(), 0.0, ParaproductKind::Pi, n);
        let pi_star =
            build_paraproduct(&tree, &measure, &sys, b, 0.0, ParaproductKind::PiStar, n);
        for _ in 0..10 {
            let f: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
            let lhs: f64 = pi
                .apply(&f)
                .iter()
                .zip(&g)
                .enumerate()
                .map(|(x, (a, c))| a * c * measure.mass(x))
                .sum();
            let rhs: f64 = pi_star
                .apply(&g)
                .iter()
                .zip(&f)
                .enumerate()
                .map(|(x, (a, c))| a * c * measure.mass(x))
                .sum();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn rank_one_norm_closed_form() {
        // ||o||_{2,w} = |<T chi>| sqrt(<w> <sigma>) exactly, which is below
        // sqrt(C0 [w]_2)
        let (n, tree, measure, sys) = setup();
        let mean_t = 1.7;
        let o = build_paraproduct(
            &tree,
            &measure,
            &sys,
            vec![0.0; sys.len()],
            mean_t,
            ParaproductKind::Rank1,
            n,
        );
        let mut rng = Rng::new(21);
        let w: Vec<f64> = (0..n).map(|_| (rng.symmetric() * 1.2).exp()).collect();
        let norm = o
            .weighted_norm(&measure, &w, NormMethod::Dense, 0)
            .unwrap();
        let avg_w: f64 = w
            .iter()
            .enumerate()
            .map(|(x, v)| v * measure.mass(x))
            .sum::<f64>()
            / measure.total();
        let avg_s: f64 = w
            .iter()
            .enumerate()
            .map(|(x, v)| measure.mass(x) / v)
            .sum::<f64>()
            / measure.total();
        let closed = mean_t.abs() * (avg_w * avg_s).sqrt();
        assert!((norm - closed).abs() < 1e-9 * closed, "{norm} vs {closed}");
    }

    #[test]
    fn carleson_b_zero_norm_zero() {
        let (n, tree, measure, sys) = setup();
        let scaling = paraproduct_norm_experiment(
            &tree,
            &measure,
            &sys,
            &vec![0.0; sys.len()],
            &[Weighted {
                w: vec![1.0; n],
                a2: 1.0,
            }],
            n,
            0,
        )
        .unwrap();
        assert_eq!(scaling.carleson_b, 0.0);
        assert_eq!(scaling.rows[0].norm, 0.0);
    }
}
