//! Proper red/green colorings of a finite metric space (1-lattices), the
//! membership-fraction bound, and the injective recoloring map that proves
//! it.
//!
//! A coloring is proper when no two red points are at distance < t and
//! every green point has a red point at distance < t. The red sets are
//! exactly the maximal subsets with pairwise distances >= t. Open balls
//! (strict < t) are used throughout.
//!
//! Thresholds are expressed in the space's internal (diameter-one) units;
//! callers converting from raw inputs divide by `space.scale`.

use crate::lattice::bron_kerbosch;
use crate::metric::FiniteMetricSpace;
use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_POINT_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum ColoringError {
    #[error("space has {0} points, above the enumeration cap {1}")]
    TooLarge(usize, usize),
    #[error("requested S is not a subset of B(v, t) minus v")]
    SNotInBall,
    #[error("coloring does not lie in W_S for the given instance")]
    NotInWS,
}

/// Open-ball masks: `balls[y]` has bit z set iff dist(z, y) < threshold
/// (bit y itself is always set).
pub fn ball_masks(space: &FiniteMetricSpace, threshold: f64) -> Vec<u32> {
    let n = space.len();
    (0..n)
        .map(|y| {
            let mut mask = 0u32;
            for z in 0..n {
                if space.dist(z, y) < threshold {
                    mask |= 1 << z;
                }
            }
            mask
        })
        .collect()
}

/// Both properness conditions for a red-set mask.
pub fn is_proper(balls: &[u32], red: u32) -> bool {
    let n = balls.len();
    for y in 0..n {
        let bit = 1u32 << y;
        if red & bit != 0 {
            // no other red point strictly inside the ball
            if balls[y] & red & !bit != 0 {
                return false;
            }
        } else if balls[y] & red == 0 {
            return false;
        }
    }
    true
}

/// All proper colorings, as red-set masks sorted ascending. These are the
/// maximal subsets with pairwise distances >= threshold.
pub fn enumerate_proper_colorings(
    space: &FiniteMetricSpace,
    threshold: f64,
    point_cap: usize,
) -> Result<Vec<u32>, ColoringError> {
    let n = space.len();
    if n > point_cap.min(32) {
        return Err(ColoringError::TooLarge(n, point_cap.min(32)));
    }
    let full: u64 = if n == 64 { !0 } else { (1u64 << n) - 1 };
    let mut compat = vec![0u64; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && space.dist(i, j) >= threshold {
                compat[i] |= 1 << j;
            }
        }
    }
    let mut out: Vec<u64> = Vec::new();
    bron_kerbosch(&compat, 0, full, 0, &mut out, usize::MAX)
        .expect("cap is usize::MAX");
    let mut masks: Vec<u32> = out.into_iter().map(|m| m as u32).collect();
    masks.sort_unstable();
    Ok(masks)
}

/// Occupancy: the largest number of points in any open ball of radius
/// `threshold` (the d of the membership bound a >= 2^(1-d)).
pub fn occupancy(balls: &[u32]) -> usize {
    balls.iter().map(|b| b.count_ones() as usize).max().unwrap_or(0)
}

/// Fraction of proper colorings in which v is red.
pub fn membership_fraction(colorings: &[u32], v: usize) -> f64 {
    if colorings.is_empty() {
        return 0.0;
    }
    let hits = colorings.iter().filter(|&&c| c & (1 << v) != 0).count();
    hits as f64 / colorings.len() as f64
}

/// One recoloring instance: the distinguished point v, the red pattern S
/// inside B(v, t) \ {v}, and the shell S~ of outside points within < t of S.
#[derive(Clone, Copy, Debug)]
pub struct RecolorInstance {
    pub v: usize,
    pub s: u32,
    pub s_tilde: u32,
    pub ball_v: u32,
}

impl RecolorInstance {
    pub fn new(balls: &[u32], v: usize, s: u32) -> Result<Self, ColoringError> {
        let ball_v = balls[v];
        if s & !(ball_v & !(1 << v)) != 0 {
            return Err(ColoringError::SNotInBall);
        }
        let mut s_tilde = 0u32;
        for (y, &ball) in balls.iter().enumerate() {
            if ball_v & (1 << y) != 0 {
                continue;
            }
            if ball & s != 0 {
                s_tilde |= 1 << y;
            }
        }
        Ok(RecolorInstance {
            v,
            s,
            s_tilde,
            ball_v,
        })
    }

    /// Membership in W_S: v green, S red, and the rest of B(v, t) green;
    /// equivalently, the red set meets B(v, t) exactly in S.
    pub fn in_w_s(&self, red: u32) -> bool {
        red & self.ball_v == self.s
    }
}

/// The recoloring map W_S -> B, steps 1-6:
/// color v red; S green; find the yellow set Z in S~ (outside points whose
/// open ball is now all green); walk Z in ascending index order recoloring
/// yellow to red unless within < t of a previously recolored one; remaining
/// yellow go back to green.
pub fn recolor(inst: &RecolorInstance, balls: &[u32], red_in: u32) -> Result<u32, ColoringError> {
    if !inst.in_w_s(red_in) {
        return Err(ColoringError::NotInWS);
    }
    let mut red = (red_in & !inst.s) | (1 << inst.v);
    let mut yellow = Vec::new();
    let mut pool = inst.s_tilde;
    while pool != 0 {
        let y = pool.trailing_zeros() as usize;
        pool &= pool - 1;
        if balls[y] & red == 0 {
            yellow.push(y);
        }
    }
    let mut newly = 0u32;
    for &y in &yellow {
        if balls[y] & newly == 0 {
            newly |= 1 << y;
        }
    }
    red |= newly;
    Ok(red)
}

#[derive(Clone, Debug, Serialize)]
pub struct SEntry {
    pub s_mask: u32,
    pub card_ws: usize,
    pub distinct_images: usize,
    pub images_proper: bool,
    pub images_in_b: bool,
    pub untouched_outside: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusReport {
    pub points: usize,
    pub v: usize,
    pub total_colorings: usize,
    pub card_b: usize,
    pub fraction: f64,
    pub occupancy_d: usize,
    /// 2^(1 - d); the fraction must not fall below this.
    pub lower_bound: f64,
    pub ws_sum: usize,
    pub injective_everywhere: bool,
    pub per_s: Vec<SEntry>,
}

/// Full census at one distinguished point: enumerate colorings, partition
/// the v-green ones into the W_S buckets, run the recoloring map on every
/// bucket and check it is proper-valued and injective into B.
pub fn census(
    space: &FiniteMetricSpace,
    threshold: f64,
    v: usize,
    point_cap: usize,
) -> Result<CensusReport, ColoringError> {
    let balls = ball_masks(space, threshold);
    let colorings = enumerate_proper_colorings(space, threshold, point_cap)?;
    let card_b = colorings.iter().filter(|&&c| c & (1 << v) != 0).count();
    let d = occupancy(&balls);
    let ball_v = balls[v];
    let others = ball_v & !(1u32 << v);
    let mut per_s = Vec::new();
    let mut ws_sum = 0usize;
    let mut injective_everywhere = true;
    // iterate over subsets of B(v,t) \ {v}
    let mut s = others;
    loop {
        let inst = RecolorInstance::new(&balls, v, s).expect("s drawn from the ball");
        let bucket: Vec<u32> = colorings
            .iter()
            .copied()
            .filter(|&c| inst.in_w_s(c))
            .collect();
        if !bucket.is_empty() {
            let mut images = Vec::with_capacity(bucket.len());
            let mut images_proper = true;
            let mut images_in_b = true;
            let mut untouched = true;
            for &c in &bucket {
                let img = recolor(&inst, &balls, c).expect("bucket members are in W_S");
                images_proper &= is_proper(&balls, img);
                images_in_b &= img & (1 << v) != 0;
                let touched_zone = inst.ball_v | inst.s_tilde;
                untouched &= (img ^ c) & !touched_zone == 0;
                images.push(img);
            }
            let mut dedup = images.clone();
            dedup.sort_unstable();
            dedup.dedup();
            let injective = dedup.len() == images.len();
            injective_everywhere &= injective && images_proper && images_in_b && untouched;
            ws_sum += bucket.len();
            per_s.push(SEntry {
                s_mask: s,
                card_ws: bucket.len(),
                distinct_images: dedup.len(),
                images_proper,
                images_in_b,
                untouched_outside: untouched,
            });
        }
        if s == 0 {
            break;
        }
        s = (s - 1) & others;
    }
    Ok(CensusReport {
        points: space.len(),
        v,
        total_colorings: colorings.len(),
        card_b,
        fraction: card_b as f64 / colorings.len() as f64,
        occupancy_d: d,
        lower_bound: (2.0f64).powi(1 - d as i32),
        ws_sum,
        injective_everywhere,
        per_s,
    })
}

/// The grid-survival claim behind the chain argument, at one scale: over
/// all 1-lattices of Y at the coarser threshold, the fraction containing a
/// fixed point is at least 2^(1-d). Returns (fraction, bound).
pub fn survival_fraction(
    space: &FiniteMetricSpace,
    threshold: f64,
    v: usize,
    point_cap: usize,
) -> Result<(f64, f64), ColoringError> {
    let balls = ball_masks(space, threshold);
    let colorings = enumerate_proper_colorings(space, threshold, point_cap)?;
    let d = occupancy(&balls);
    Ok((
        membership_fraction(&colorings, v),
        (2.0f64).powi(1 - d as i32),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn line(points: &[f64]) -> FiniteMetricSpace {
        FiniteMetricSpace::from_coords(points.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    // brute force over all subsets: the oracle for the enumeration
    fn brute_force_colorings(balls: &[u32]) -> Vec<u32> {
        let n = balls.len();
        let mut out = Vec::new();
        for red in 0u32..(1 << n) {
            if is_proper(balls, red) {
                out.push(red);
            }
        }
        out
    }

    #[test]
    fn single_point_space() {
        let s = FiniteMetricSpace::from_matrix(vec![vec![0.0]]).unwrap();
        let colorings = enumerate_proper_colorings(&s, 1.0, 20).unwrap();
        assert_eq!(colorings, vec![0b1]);
        assert_eq!(membership_fraction(&colorings, 0), 1.0);
    }

    #[test]
    fn three_point_line_exact() {
        // {0, 0.9, 1.8}, threshold 1 in raw units = 1/1.8 normalized
        let s = line(&[0.0, 0.9, 1.8]);
        let thr = 1.0 / s.scale;
        let colorings = enumerate_proper_colorings(&s, thr, 20).unwrap();
        // {0, 1.8} = 0b101 and {0.9} = 0b010
        assert_eq!(colorings, vec![0b010, 0b101]);
        assert!((membership_fraction(&colorings, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn five_random_points_match_brute_force() {
        let mut rng = Rng::new(23);
        for _ in 0..40 {
            let pts: Vec<f64> = {
                let mut p: Vec<f64> = (0..5).map(|_| rng.next_f64() * 3.0).collect();
                p.sort_by(|a, b| a.partial_cmp(b).unwrap());
                p.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                p
            };
            if pts.len() < 2 {
                continue;
            }
            let s = line(&pts);
            let thr = 1.0 / s.scale;
            let balls = ball_masks(&s, thr);
            let fast = enumerate_proper_colorings(&s, thr, 20).unwrap();
            let slow = brute_force_colorings(&balls);
            assert_eq!(fast, slow);
            for &c in &fast {
                assert!(is_proper(&balls, c));
            }
        }
    }

    #[test]
    fn fraction_dominates_occupancy_bound() {
        let mut rng = Rng::new(31);
        for _ in 0..60 {
            let n = 2 + rng.below(5);
            let pts: Vec<f64> = {
                let mut p: Vec<f64> = (0..n).map(|_| rng.next_f64() * 2.5).collect();
                p.sort_by(|a, b| a.partial_cmp(b).unwrap());
                p.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                p
            };
            if pts.len() < 2 {
                continue;
            }
            let s = line(&pts);
            let thr = 1.0 / s.scale;
            for v in 0..s.len() {
                let (fraction, bound) = survival_fraction(&s, thr, v, 20).unwrap();
                assert!(
                    fraction >= bound - 1e-12,
                    "fraction {fraction} below bound {bound}"
                );
            }
        }
    }

    #[test]
    fn recolor_three_point_trace() {
        let s = line(&[0.0, 0.9, 1.8]);
        let thr = 1.0 / s.scale;
        let balls = ball_masks(&s, thr);
        // v = 0.9 (index 1); every point is within raw distance 1 of v, so
        // the coloring {0, 1.8} lies in W_S for S = {0, 1.8}
        let inst = RecolorInstance::new(&balls, 1, 0b101).unwrap();
        assert!(inst.in_w_s(0b101));
        let out = recolor(&inst, &balls, 0b101).unwrap();
        assert_eq!(out, 0b010, "0.9 red, everything else green");
        assert!(is_proper(&balls, out));
        // S = {} does not match this coloring (red points sit inside the ball)
        let inst_empty = RecolorInstance::new(&balls, 1, 0).unwrap();
        assert!(matches!(
            recolor(&inst_empty, &balls, 0b101),
            Err(ColoringError::NotInWS)
        ));
    }

    #[test]
    fn recolor_minimal_instance() {
        // S empty and nothing red inside B(v, t): output must be proper
        // with v red and the rest untouched
        let s = line(&[0.0, 0.4, 1.0, 2.6]);
        let thr = 1.0 / s.scale;
        let balls = ball_masks(&s, thr);
        let colorings = enumerate_proper_colorings(&s, thr, 20).unwrap();
        for &c in &colorings {
            for v in 0..s.len() {
                if c & balls[v] != 0 {
                    continue;
                }
                let inst = RecolorInstance::new(&balls, v, 0).unwrap();
                let out = recolor(&inst, &balls, c).unwrap();
                assert!(is_proper(&balls, out));
                assert!(out & (1 << v) != 0);
            }
        }
    }

    #[test]
    fn census_vacuous_on_singleton() {
        let s = FiniteMetricSpace::from_matrix(vec![vec![0.0]]).unwrap();
        let rep = census(&s, 1.0, 0, 20).unwrap();
        assert_eq!(rep.card_b, 1);
        assert!(rep.injective_everywhere);
        assert_eq!(rep.fraction, 1.0);
    }

    // the grid-survival bridge: in a two-level hierarchy, the enumeration
    // frequency of a fixed fine grid point having a next-level grid point
    // within delta^{k-1}/1000 matches its lattice-membership fraction and
    // clears the occupancy bound
    #[test]
    fn survival_frequency_in_two_level_hierarchies() {
        use crate::lattice::{enumerate_hierarchies, HierarchyParams};
        let s = line(&[0.0, 0.3, 0.55, 1.0]);
        let params = HierarchyParams {
            delta: 0.25,
            levels: 1,
            seed: 0,
        };
        let events = enumerate_hierarchies(&s, &params, 100_000).unwrap();
        // G_1 is the full net here; the coloring-level occupancy bound
        let balls = ball_masks(&s, 1.0);
        let d = occupancy(&balls);
        let bound = (2.0f64).powi(1 - d as i32);
        for (x, _) in events[0].grids[1].iter().enumerate() {
            let x_pt = events[0].grids[1][x];
            let near: f64 = events
                .iter()
                .filter(|e| {
                    e.grids[0]
                        .iter()
                        .any(|&g| s.dist(g, x_pt) < 1.0 / 1000.0)
                })
                .map(|e| e.weight)
                .sum();
            // grid points are delta-separated, so "within 1/1000" means
            // the point itself survived into the coarse grid
            let survived: f64 = events
                .iter()
                .filter(|e| e.grids[0].contains(&x_pt))
                .map(|e| e.weight)
                .sum();
            assert!((near - survived).abs() < 1e-12);
            assert!(
                near >= bound - 1e-12,
                "point {x_pt}: frequency {near} below bound {bound}"
            );
        }
    }

    #[test]
    fn injectivity_on_random_spaces() {
        let mut rng = Rng::new(77);
        let mut ran = 0;
        for _ in 0..200 {
            let n = 2 + rng.below(6);
            let pts: Vec<f64> = {
                let mut p: Vec<f64> = (0..n).map(|_| rng.next_f64() * 3.0).collect();
                p.sort_by(|a, b| a.partial_cmp(b).unwrap());
                p.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                p
            };
            if pts.len() < 2 {
                continue;
            }
            let s = line(&pts);
            let thr = 1.0 / s.scale;
            let v = rng.below(s.len());
            let rep = census(&s, thr, v, 20).unwrap();
            ran += 1;
            assert!(rep.injective_everywhere, "space {pts:?} v {v}");
            for e in &rep.per_s {
                assert!(e.card_ws <= rep.card_b, "card W_S > card B");
            }
            // every coloring is v-red or in exactly one W_S
            assert_eq!(rep.ws_sum + rep.card_b, rep.total_colorings);
            // which yields the occupancy bound
            let max_buckets = (1usize << (rep.occupancy_d - 1)) - 1;
            assert!(rep.ws_sum <= max_buckets.max(1) * rep.card_b);
            assert!(rep.fraction >= rep.lower_bound - 1e-12);
        }
        assert!(ran > 100);
    }
}
