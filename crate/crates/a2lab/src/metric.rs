//! Finite metric spaces with doubling measures, balls and kernel scale
//! functions.
//!
//! All spaces are finite, so suprema are maxima and every scan over "all
//! radii" is a scan over the finite set of pairwise distances (plus the
//! whole space). Spaces are rescaled to diameter 1 at load; the original
//! diameter is recorded, never silently dropped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("distance matrix is not square or does not match point count")]
    BadShape,
    #[error("distance matrix not symmetric at ({0}, {1})")]
    NonSymmetric(usize, usize),
    #[error("dist({0}, {0}) must be 0, and dist({0}, {1}) must be > 0 for distinct points")]
    BadDiagonal(usize, usize),
    #[error("triangle inequality violated on ({i}, {j}, {k}): d(i,k) > d(i,j) + d(j,k)")]
    TriangleViolation { i: usize, j: usize, k: usize },
    #[error("point mass {0} is not positive")]
    NonPositiveMass(usize),
    #[error("space JSON must contain either \"coords\" or \"distance_matrix\"")]
    MissingGeometry,
    #[error("unsupported metric {0:?} (only \"euclidean\")")]
    UnsupportedMetric(String),
}

/// A finite metric space, stored as a dense symmetric distance matrix,
/// rescaled so that the diameter is 1 (single-point spaces are kept as is).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    n: usize,
    dist: Vec<f64>,
    diameter: f64,
    /// Original diameter before normalization; multiply distances by this
    /// to recover the input scale.
    pub scale: f64,
    /// Kept when the space was built from coordinates (used by signed
    /// one-dimensional kernels).
    pub coords: Option<Vec<Vec<f64>>>,
}

impl FiniteMetricSpace {
    /// Build from a full distance matrix. Validates symmetry, positivity
    /// and the triangle inequality over all triples, then rescales to
    /// diameter 1.
    pub fn from_matrix(matrix: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = matrix.len();
        if n == 0 || matrix.iter().any(|row| row.len() != n) {
            return Err(MetricError::BadShape);
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                dist[i * n + j] = matrix[i][j];
            }
        }
        Self::from_flat(n, dist, None)
    }

    /// Build from coordinates with the Euclidean metric.
    pub fn from_coords(coords: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = coords.len();
        if n == 0 {
            return Err(MetricError::BadShape);
        }
        let dim = coords[0].len();
        if coords.iter().any(|c| c.len() != dim) {
            return Err(MetricError::BadShape);
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let d2: f64 = coords[i]
                    .iter()
                    .zip(&coords[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                dist[i * n + j] = d2.sqrt();
            }
        }
        Self::from_flat(n, dist, Some(coords))
    }

    fn from_flat(
        n: usize,
        mut dist: Vec<f64>,
        coords: Option<Vec<Vec<f64>>>,
    ) -> Result<Self, MetricError> {
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(MetricError::BadDiagonal(i, i));
            }
            for j in 0..n {
                if i != j && dist[i * n + j] <= 0.0 {
                    return Err(MetricError::BadDiagonal(i, j));
                }
                if (dist[i * n + j] - dist[j * n + i]).abs()
                    > 1e-12 * (1.0 + dist[i * n + j].abs())
                {
                    return Err(MetricError::NonSymmetric(i, j));
                }
            }
        }
        // exact triangle scan over all triples; slack absorbs roundoff only
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let lhs = dist[i * n + k];
                    let rhs = dist[i * n + j] + dist[j * n + k];
                    if lhs > rhs * (1.0 + 1e-12) + 1e-15 {
                        return Err(MetricError::TriangleViolation { i, j, k });
                    }
                }
            }
        }
        let diameter = dist.iter().cloned().fold(0.0, f64::max);
        let scale = if diameter > 0.0 { diameter } else { 1.0 };
        if diameter > 0.0 {
            for d in dist.iter_mut() {
                *d /= diameter;
            }
        }
        // scale coords consistently so signed-kernel computations agree
        let coords = coords.map(|cs| {
            cs.into_iter()
                .map(|c| c.into_iter().map(|x| x / scale).collect())
                .collect()
        });
        Ok(FiniteMetricSpace {
            n,
            dist,
            diameter: if n == 1 { 0.0 } else { 1.0 },
            scale,
            coords,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dist(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.n + j]
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Open ball `{y : |yx| < r}`.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.n).filter(|&j| self.dist(center, j) < r).collect()
    }

    /// Sorted deduplicated set of positive pairwise distances. On a finite
    /// space every distinct ball is realized at one of these radii (plus
    /// the whole space at radius infinity).
    pub fn distance_set(&self) -> Vec<f64> {
        let mut ds: Vec<f64> = Vec::with_capacity(self.n * (self.n - 1) / 2 + 1);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                ds.push(self.dist(i, j));
            }
        }
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ds.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        ds
    }

    /// min over (a, b) in A x B of dist(a, b); +inf if either side is empty.
    pub fn set_distance(&self, a: &[usize], b: &[usize]) -> f64 {
        let mut best = f64::INFINITY;
        for &x in a {
            for &y in b {
                let d = self.dist(x, y);
                if d < best {
                    best = d;
                }
            }
        }
        best
    }

    /// min over s in set of dist(x, s); +inf on the empty set.
    pub fn point_set_distance(&self, x: usize, set: &[usize]) -> f64 {
        set.iter()
            .map(|&s| self.dist(x, s))
            .fold(f64::INFINITY, f64::min)
    }

    /// Greedy estimate of the geometric doubling constant: the maximum,
    /// over centers x and scanned radii r, of the size of a greedily built
    /// maximal (r/2)-separated subset of B(x, r). Greedy gives maximality
    /// by inclusion; exact packing is NP-hard.
    ///
    /// The packing count changes only when r crosses a pairwise distance
    /// (ball membership) or twice one (separation threshold), so scanning
    /// those critical values plus midpoints loses nothing.
    pub fn doubling_constant_estimate(&self) -> usize {
        let ds = self.distance_set();
        let mut critical: Vec<f64> = ds.iter().flat_map(|&d| [d, 2.0 * d]).collect();
        critical.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut radii: Vec<f64> = critical.clone();
        for pair in critical.windows(2) {
            radii.push(0.5 * (pair[0] + pair[1]));
        }
        if let Some(&last) = critical.last() {
            radii.push(last + 1.0);
        }
        let mut best = 1;
        for &r in &radii {
            for x in 0..self.n {
                let ball = self.ball(x, r);
                let mut picked: Vec<usize> = Vec::new();
                for &p in &ball {
                    if picked.iter().all(|&q| self.dist(p, q) > r / 2.0) {
                        picked.push(p);
                    }
                }
                best = best.max(picked.len());
            }
        }
        best
    }

    /// Uniform net of [0, 1] with n points (a standard test space).
    pub fn unit_interval_net(n: usize) -> Self {
        let coords: Vec<Vec<f64>> = if n == 1 {
            vec![vec![0.0]]
        } else {
            (0..n).map(|i| vec![i as f64 / (n - 1) as f64]).collect()
        };
        Self::from_coords(coords).expect("net is a valid metric space")
    }

    /// Random tree metric on n points: node i > 0 attaches to a uniformly
    /// chosen earlier node with edge length in [0.5, 1.5]; distances are
    /// path lengths (normalized to diameter 1 on load like everything else).
    pub fn random_tree_metric(n: usize, seed: u64) -> Self {
        let mut rng = crate::rng::Rng::new(seed);
        let mut dist = vec![vec![0.0f64; n]; n];
        for i in 1..n {
            let parent = rng.below(i);
            let edge = 0.5 + rng.next_f64();
            for j in 0..i {
                let through = dist[parent][j] + edge;
                dist[i][j] = through;
                dist[j][i] = through;
            }
            dist[i][parent] = edge;
            dist[parent][i] = edge;
        }
        Self::from_matrix(dist).expect("tree metric is a valid metric space")
    }

    /// k x k uniform net of the unit square.
    pub fn unit_square_net(k: usize) -> Self {
        let step = if k > 1 { 1.0 / (k - 1) as f64 } else { 0.0 };
        let mut coords = Vec::with_capacity(k * k);
        for i in 0..k {
            for j in 0..k {
                coords.push(vec![i as f64 * step, j as f64 * step]);
            }
        }
        Self::from_coords(coords).expect("net is a valid metric space")
    }
}

/// Report produced by [`validate_space`]; records what the load did.
#[derive(Clone, Debug, Serialize)]
pub struct SpaceReport {
    pub points: usize,
    pub original_diameter: f64,
    pub rescaled: bool,
    pub doubling_estimate: usize,
}

/// Confirm the space invariants and report the normalization carried out
/// at load. Construction already rejects invalid matrices, so this mostly
/// re-states what `from_matrix`/`from_coords` enforced.
pub fn validate_space(space: &FiniteMetricSpace) -> SpaceReport {
    SpaceReport {
        points: space.len(),
        original_diameter: space.scale,
        rescaled: (space.scale - 1.0).abs() > 1e-15,
        doubling_estimate: space.doubling_constant_estimate(),
    }
}

/// A strictly positive point measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DoublingMeasure {
    mass: Vec<f64>,
    total: f64,
}

impl DoublingMeasure {
    pub fn new(mass: Vec<f64>) -> Result<Self, MetricError> {
        for (i, &m) in mass.iter().enumerate() {
            if !(m > 0.0) {
                return Err(MetricError::NonPositiveMass(i));
            }
        }
        let total = mass.iter().sum();
        Ok(DoublingMeasure { mass, total })
    }

    pub fn uniform(n: usize) -> Self {
        DoublingMeasure {
            mass: vec![1.0 / n as f64; n],
            total: 1.0,
        }
    }

    #[inline]
    pub fn mass(&self, i: usize) -> f64 {
        self.mass[i]
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn set_mass(&self, set: &[usize]) -> f64 {
        set.iter().map(|&i| self.mass[i]).sum()
    }

    /// Empirical measure-doubling constant: max over sampled (x, r) of
    /// mu(B(x, 2r)) / mu(B(x, r)), radii from the pairwise-distance set.
    pub fn doubling_ratio(&self, space: &FiniteMetricSpace) -> f64 {
        let mut worst: f64 = 1.0;
        for r in space.distance_set() {
            for x in 0..space.len() {
                let small = self.set_mass(&space.ball(x, r));
                let big = self.set_mass(&space.ball(x, 2.0 * r));
                if small > 0.0 {
                    worst = worst.max(big / small);
                }
            }
        }
        worst
    }
}

/// The scale function lambda(x, r) a Calderon-Zygmund kernel is measured
/// against, together with its doubling constant and Holder exponent.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum LambdaKind {
    /// lambda(x, r) = r (the canonical choice on nets of the line).
    Radius,
    /// lambda(x, r) = mu(B(x, r)), clamped below by the smallest point mass.
    BallMass,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelProfile {
    pub kind: LambdaKind,
    /// C with lambda(x, 2r) <= C lambda(x, r) on all sampled arguments.
    pub doubling_const: f64,
    /// Holder exponent eps in (0, 1].
    pub holder_eps: f64,
}

impl KernelProfile {
    pub fn radius() -> Self {
        KernelProfile {
            kind: LambdaKind::Radius,
            doubling_const: 2.0,
            holder_eps: 1.0,
        }
    }

    pub fn ball_mass(space: &FiniteMetricSpace, measure: &DoublingMeasure) -> Self {
        KernelProfile {
            kind: LambdaKind::BallMass,
            doubling_const: measure.doubling_ratio(space),
            holder_eps: 1.0,
        }
    }

    pub fn lambda(
        &self,
        space: &FiniteMetricSpace,
        measure: &DoublingMeasure,
        x: usize,
        r: f64,
    ) -> f64 {
        match self.kind {
            LambdaKind::Radius => r,
            LambdaKind::BallMass => {
                let m = measure.set_mass(&space.ball(x, r));
                let floor = (0..space.len())
                    .map(|i| measure.mass(i))
                    .fold(f64::INFINITY, f64::min);
                m.max(floor)
            }
        }
    }

    /// Verify lambda is increasing and doubling in r over the sampled radii
    /// and report the empirical constant relating mu(B(x, r)) and lambda.
    pub fn check(&self, space: &FiniteMetricSpace, measure: &DoublingMeasure) -> ProfileReport {
        let radii = space.distance_set();
        let mut doubling: f64 = 1.0;
        let mut mu_over_lambda: f64 = 0.0;
        let mut monotone = true;
        for x in 0..space.len() {
            let mut prev = 0.0;
            for &r in &radii {
                let l = self.lambda(space, measure, x, r);
                if l + 1e-15 < prev {
                    monotone = false;
                }
                prev = l;
                let l2 = self.lambda(space, measure, x, 2.0 * r);
                if l > 0.0 {
                    doubling = doubling.max(l2 / l);
                }
                let mu_ball = measure.set_mass(&space.ball(x, r));
                if l > 0.0 {
                    mu_over_lambda = mu_over_lambda.max(mu_ball / l);
                }
            }
        }
        ProfileReport {
            monotone,
            doubling_const: doubling,
            mu_over_lambda,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProfileReport {
    pub monotone: bool,
    pub doubling_const: f64,
    /// Empirical C with mu(B(x, r)) <= C lambda(x, r). The relation is a
    /// hypothesis on the pair (mu, lambda); we report it per space.
    pub mu_over_lambda: f64,
}

/// Wire format for spaces: `{"coords": [[..], ..], "metric": "euclidean"}`
/// or `{"distance_matrix": [[..], ..]}`, optional `{"mass": [..]}`
/// defaulting to uniform.
#[derive(Deserialize)]
struct SpaceJson {
    coords: Option<Vec<Vec<f64>>>,
    metric: Option<String>,
    distance_matrix: Option<Vec<Vec<f64>>>,
    mass: Option<Vec<f64>>,
}

pub fn space_from_json(text: &str) -> Result<(FiniteMetricSpace, DoublingMeasure), MetricError> {
    let parsed: SpaceJson =
        serde_json::from_str(text).map_err(|_| MetricError::MissingGeometry)?;
    let space = if let Some(coords) = parsed.coords {
        if let Some(metric) = &parsed.metric {
            if metric != "euclidean" {
                return Err(MetricError::UnsupportedMetric(metric.clone()));
            }
        }
        FiniteMetricSpace::from_coords(coords)?
    } else if let Some(matrix) = parsed.distance_matrix {
        FiniteMetricSpace::from_matrix(matrix)?
    } else {
        return Err(MetricError::MissingGeometry);
    };
    let measure = match parsed.mass {
        Some(mass) => {
            if mass.len() != space.len() {
                return Err(MetricError::BadShape);
            }
            DoublingMeasure::new(mass)?
        }
        None => DoublingMeasure::uniform(space.len()),
    };
    Ok((space, measure))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_three_points_valid() {
        let s = FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.5], vec![1.0]]).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.diameter(), 1.0);
        assert_eq!(s.scale, 1.0);
        let report = validate_space(&s);
        assert!(!report.rescaled);
    }

    #[test]
    fn forced_triangle_violation() {
        // dist(0,1)=10 with dist(0,2)=dist(2,1)=1
        let m = vec![
            vec![0.0, 10.0, 1.0],
            vec![10.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        match FiniteMetricSpace::from_matrix(m) {
            Err(MetricError::TriangleViolation { .. }) => {}
            other => panic!("expected TriangleViolation, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn nonsymmetric_rejected() {
        let m = vec![vec![0.0, 1.0], vec![2.0, 0.0]];
        assert!(matches!(
            FiniteMetricSpace::from_matrix(m),
            Err(MetricError::NonSymmetric(..))
        ));
    }

    #[test]
    fn rescaling_recorded() {
        let s = FiniteMetricSpace::from_coords(vec![vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(s.scale, 2.0);
        assert_eq!(s.dist(0, 1), 1.0);
    }

    // brute-force triangle check over all triples of the 64-point net
    #[test]
    fn net64_valid_with_doubling_report() {
        let s = FiniteMetricSpace::unit_interval_net(64);
        for i in 0..64 {
            for j in 0..64 {
                for k in 0..64 {
                    assert!(s.dist(i, k) <= s.dist(i, j) + s.dist(j, k) + 1e-12);
                }
            }
        }
        let report = validate_space(&s);
        assert!(report.doubling_estimate >= 2);
    }

    #[test]
    fn ball_strict_inequality() {
        let s = FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.3], vec![0.5], vec![1.0]])
            .unwrap();
        assert!(s.ball(0, 0.0).is_empty());
        assert_eq!(s.ball(0, 2.0).len(), 4);
        // center 0.3, r = 0.35 -> {0, 0.3, 0.5}
        assert_eq!(s.ball(1, 0.35), vec![0, 1, 2]);
        // point at distance exactly r is excluded
        assert_eq!(s.ball(0, 0.3), vec![0]);
    }

    #[test]
    fn ball_monotone_and_exhausts() {
        let s = FiniteMetricSpace::unit_interval_net(16);
        let radii = s.distance_set();
        for x in 0..s.len() {
            let mut prev = 0;
            for &r in &radii {
                let b = s.ball(x, r).len();
                assert!(b >= prev);
                prev = b;
            }
            assert_eq!(s.ball(x, s.diameter() + 1.0).len(), s.len());
        }
    }

    #[test]
    fn doubling_estimate_trivial_spaces() {
        let single = FiniteMetricSpace::from_matrix(vec![vec![0.0]]).unwrap();
        assert_eq!(single.doubling_constant_estimate(), 1);
        let two = FiniteMetricSpace::from_coords(vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(two.doubling_constant_estimate(), 2);
    }

    // greedy packing oracle at both sizes: the estimate stays small and
    // does not grow under refinement
    #[test]
    fn doubling_estimate_stable_under_refinement() {
        let a = FiniteMetricSpace::unit_interval_net(64).doubling_constant_estimate();
        let b = FiniteMetricSpace::unit_interval_net(128).doubling_constant_estimate();
        assert!(a <= 5, "64-net estimate {}", a);
        assert!(b <= 5, "128-net estimate {}", b);
        assert!(b <= a + 1);
    }

    #[test]
    fn doubling_estimate_scale_invariant() {
        let a = FiniteMetricSpace::from_coords((0..32).map(|i| vec![i as f64]).collect())
            .unwrap()
            .doubling_constant_estimate();
        let b = FiniteMetricSpace::from_coords((0..32).map(|i| vec![7.0 * i as f64]).collect())
            .unwrap()
            .doubling_constant_estimate();
        assert_eq!(a, b);
    }

    #[test]
    fn measure_rejects_nonpositive() {
        assert!(matches!(
            DoublingMeasure::new(vec![1.0, 0.0]),
            Err(MetricError::NonPositiveMass(1))
        ));
    }

    #[test]
    fn space_json_both_forms() {
        let (s, m) =
            space_from_json(r#"{"coords": [[0.0], [0.5], [1.0]], "metric": "euclidean"}"#)
                .unwrap();
        assert_eq!(s.len(), 3);
        assert!((m.total() - 1.0).abs() < 1e-15);

        let (s2, m2) = space_from_json(
            r#"{"distance_matrix": [[0.0, 1.0], [1.0, 0.0]], "mass": [1.0, 3.0]}"#,
        )
        .unwrap();
        assert_eq!(s2.len(), 2);
        assert_eq!(m2.mass(1), 3.0);
        assert!(space_from_json(r#"{"metric": "euclidean"}"#).is_err());
    }

    #[test]
    fn lambda_profile_check() {
        let s = FiniteMetricSpace::unit_interval_net(32);
        let m = DoublingMeasure::uniform(32);
        let p = KernelProfile::radius();
        let rep = p.check(&s, &m);
        assert!(rep.monotone);
        assert!(rep.doubling_const <= 2.0 + 1e-12);
        assert!(rep.mu_over_lambda.is_finite());
    }
}
