//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line. Tolerances and thresholds are pinned in code. Run with
//! `cargo test --test acceptance -- --nocapture` to see every line.

use a2lab::averaging::{
    averaging_identity_check, containment_probability_enumerated, containment_probability_mc,
    enumerate_goodness, really_good_adjust,
};
use a2lab::bellman::{bellman_hessian_check, tau_carleson_experiment, BellmanParams};
use a2lab::coloring;
use a2lab::experiment::{
    run_experiments, set_worker_override, ExperimentConfig, ExperimentSpec, SpaceSpec,
    WeightFamilySpec,
};
use a2lab::goodness::{estimate_bad_probability, GoodnessParams};
use a2lab::haar::{build_haar_system, check_decomposition, weighted_haar_decomposition};
use a2lab::kernel::{
    build_model_operator, decay_check_in, decay_check_out, extract_shifts,
    haar_coefficient_table, subtract_paraproducts, KernelKind,
};
use a2lab::lattice::{build_hierarchy, verify_grid_laws, GridMode, HierarchyParams};
use a2lab::linalg::{log_log_slope, Mat};
use a2lab::metric::{DoublingMeasure, FiniteMetricSpace, KernelProfile};
use a2lab::paraproduct::{
    b_squared_per_cube, build_paraproduct, paraproduct_coefficients,
    paraproduct_norm_experiment, ParaproductKind,
};
use a2lab::rng::Rng;
use a2lab::shift::shift_bound_experiment;
use a2lab::tree::{
    build_cubes, uniform_mary_tree, verify_chain_separation, verify_cover, CubeTree,
};
use a2lab::weights::{ainfty_inequality_check, carleson_embedding_check, CarlesonSequence};

const CAP: usize = 10_000_000;

fn conclude(name: &str, pass: bool, detail: String) {
    println!(
        "criterion {name}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {name} failed: {detail}");
}

fn test_spaces() -> Vec<(String, FiniteMetricSpace)> {
    vec![
        ("64-net".into(), FiniteMetricSpace::unit_interval_net(64)),
        ("8x8-square".into(), FiniteMetricSpace::unit_square_net(8)),
        (
            "50-random-tree".into(),
            FiniteMetricSpace::random_tree_metric(50, 4242),
        ),
    ]
}

fn lattice_tree(space: &FiniteMetricSpace, delta: f64, levels: usize, seed: u64) -> CubeTree {
    let params = HierarchyParams {
        delta,
        levels,
        seed,
    };
    let sample =
        build_hierarchy(space, &params, GridMode::Greedy, levels, CAP).expect("hierarchy");
    build_cubes(space, &sample)
}

// 1. Cover/partition: 100 sampled lattices on three spaces, two deltas;
//    partition at every generation, proximity |y_k x| <= 15 delta^k.
#[test]
fn criterion_01_cover_partition() {
    let start = std::time::Instant::now();
    let mut worst_prox: f64 = 0.0;
    for (name, space) in test_spaces() {
        for &delta in &[0.25, 0.125] {
            for sample_idx in 0..100u64 {
                let params = HierarchyParams {
                    delta,
                    levels: 3,
                    seed: Rng::new(901).split(sample_idx).next_u64(),
                };
                let sample = build_hierarchy(&space, &params, GridMode::Greedy, 3, CAP)
                    .unwrap_or_else(|e| panic!("{name}: {e}"));
                let tree = build_cubes(&space, &sample);
                let cover = verify_cover(&space, &tree)
                    .unwrap_or_else(|e| panic!("{name} delta {delta}: {e}"));
                worst_prox = worst_prox.max(cover.worst_proximity_ratio);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    conclude(
        "1 cover/partition",
        worst_prox <= 15.0 && elapsed < 30.0,
        format!("worst proximity ratio {worst_prox:.3} (bound 15), {elapsed:.1}s (budget 30s)"),
    );
}

// 2. Grid laws: separation, exhaustive add-one maximality, the 3 delta^k
//    covering radius, and chain separation delta^j/100.
#[test]
fn criterion_02_grid_laws() {
    let mut violations = 0usize;
    let mut worst_cover: f64 = 0.0;
    for (_, space) in test_spaces() {
        for &delta in &[0.25, 0.125] {
            for sample_idx in 0..100u64 {
                let params = HierarchyParams {
                    delta,
                    levels: 3,
                    seed: Rng::new(902).split(sample_idx).next_u64(),
                };
                let sample = build_hierarchy(&space, &params, GridMode::Greedy, 3, CAP).unwrap();
                let laws = verify_grid_laws(&space, &sample);
                if !(laws.separation_ok && laws.maximality_ok && laws.cover_radius_ok) {
                    violations += 1;
                }
                worst_cover = worst_cover.max(laws.worst_cover_ratio);
                let tree = build_cubes(&space, &sample);
                for &eps in &[1e-4, 1e-3] {
                    violations += verify_chain_separation(&space, &tree, eps).violations;
                }
            }
        }
    }
    conclude(
        "2 grid laws",
        violations == 0,
        format!("{violations} violations, worst cover ratio {worst_cover:.3} (bound 3)"),
    );
}

// 3. 1-lattice census: 200 random spaces on <= 7 points; membership
//    fraction >= 2^(1-d) at every point; recoloring proper and injective.
#[test]
fn criterion_03_census() {
    let start = std::time::Instant::now();
    let mut rng = Rng::new(903);
    let mut spaces_done = 0;
    let mut ok = true;
    while spaces_done < 200 {
        let n = 2 + rng.below(6);
        let space = match rng.below(3) {
            0 => {
                let mut pts: Vec<f64> = (0..n).map(|_| rng.next_f64() * 3.0).collect();
                pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                pts.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
                if pts.len() < 2 {
                    continue;
                }
                FiniteMetricSpace::from_coords(pts.into_iter().map(|x| vec![x]).collect())
                    .unwrap()
            }
            1 => FiniteMetricSpace::from_coords(
                (0..n)
                    .map(|_| vec![rng.next_f64() * 2.0, rng.next_f64() * 2.0])
                    .collect(),
            )
            .unwrap(),
            _ => FiniteMetricSpace::random_tree_metric(n, rng.next_u64()),
        };
        let threshold = 1.0 / space.scale;
        for v in 0..space.len() {
            let report = coloring::census(&space, threshold, v, 32).expect("census runs");
            ok &= report.injective_everywhere;
            ok &= report.fraction >= report.lower_bound - 1e-12;
            ok &= report.ws_sum + report.card_b == report.total_colorings;
        }
        spaces_done += 1;
    }
    let elapsed = start.elapsed().as_secs_f64();
    conclude(
        "3 census",
        ok && elapsed < 60.0,
        format!("200 spaces, all points checked, {elapsed:.1}s (budget 60s)"),
    );
}

// 4. Bad-cube probability on the 64-net at delta = 1/8: sweep r, report the
//    least r whose worst frequency clears 1/2 with a 2-sigma margin, and
//    the decay exponent in r against eta gamma - 0.1.
#[test]
fn criterion_04_bad_probability() {
    let start = std::time::Instant::now();
    let space = FiniteMetricSpace::unit_interval_net(64);
    let delta = 0.125;
    let levels = 2; // delta^2 = 1/64 is already below the net spacing
    let hierarchy = HierarchyParams {
        delta,
        levels,
        seed: 904,
    };
    // occupancy of the fine grid at scale delta^(levels-1)
    let fine = a2lab::lattice::fixed_fine_grid(&space, &hierarchy);
    let d = fine
        .iter()
        .map(|&y| {
            fine.iter()
                .filter(|&&z| space.dist(y, z) < delta.powi(levels as i32 - 1))
                .count()
        })
        .max()
        .unwrap();
    let a = (2.0f64).powi(1 - d as i32);
    let eta = (1.0 - a).ln() / delta.ln();
    let gamma = 0.25;
    let trials = 10_000;
    let mut least_r = None;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut lines = Vec::new();
    for r in 1..=2usize {
        let goodness = GoodnessParams {
            gamma,
            r,
            a,
            eta,
        };
        let rep =
            estimate_bad_probability(&space, &hierarchy, &goodness, levels, trials, CAP).unwrap();
        if least_r.is_none() && rep.worst_frequency + 2.0 * rep.stderr <= 0.5 {
            least_r = Some(r);
        }
        if rep.worst_frequency > 0.0 {
            xs.push(delta.powi(-(r as i32)));
            ys.push(rep.worst_frequency);
        }
        lines.push(format!("r={r}: {:.4}+-{:.4}", rep.worst_frequency, rep.stderr));
    }
    // frequency ~ delta^{eta gamma r}: fit against delta^{-r}, negate
    let decay = if xs.len() >= 2 {
        -log_log_slope(&xs, &ys)
    } else {
        f64::INFINITY // faster decay than the sweep can resolve
    };
    let elapsed = start.elapsed().as_secs_f64();
    conclude(
        "4 bad probability",
        least_r.is_some() && decay >= eta * gamma - 0.1 && elapsed < 300.0,
        format!(
            "{}; least r = {least_r:?}, decay exponent {decay:.3} >= eta*gamma - 0.1 = {:.3}, {elapsed:.1}s (budget 300s)",
            lines.join("  "),
            eta * gamma - 0.1
        ),
    );
}

// 5. Averaging identity, exact: enumerated probability space on <= 5-point
//    spaces, 2 generations, 5 operators x 5 pairs, residual <= 1e-12 for
//    both the >= and > variants.
#[test]
fn criterion_05_averaging_identity() {
    let start = std::time::Instant::now();
    // each space has a pair closer than the goodness threshold
    // delta^(1 + gamma) ~ 0.095, so some cubes are genuinely bad in some
    // events and the restriction on the right-hand side has teeth
    let spaces = vec![
        FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.08], vec![1.0]]).unwrap(),
        FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.07], vec![0.55], vec![1.0]])
            .unwrap(),
        FiniteMetricSpace::from_coords(vec![
            vec![0.0],
            vec![0.07],
            vec![0.45],
            vec![0.52],
            vec![1.0],
        ])
        .unwrap(),
    ];
    let mut worst = 0.0f64;
    let mut goodness_varies = false;
    for space in &spaces {
        let measure = DoublingMeasure::uniform(space.len());
        let hierarchy = HierarchyParams {
            delta: 0.25,
            levels: 2,
            seed: 0,
        };
        // a steep gamma makes goodness genuinely random on these spaces
        let goodness = GoodnessParams {
            gamma: 0.7,
            r: 1,
            a: 0.05,
            eta: 0.1,
        };
        let e = enumerate_goodness(space, &hierarchy, &goodness, CAP).unwrap();
        let p_min = e.min_p();
        assert!(p_min > 0.0, "conditional good-probability must be positive");
        goodness_varies |= p_min < 1.0;
        let a = 0.5 * p_min;
        let adjust = really_good_adjust(&e, a).unwrap();
        worst = worst.max(adjust.worst_deviation);
        let mut rng = Rng::new(905);
        for _ in 0..5 {
            let mut op = Mat::zeros(space.len(), space.len());
            for v in op.data.iter_mut() {
                *v = rng.symmetric() * 2.0;
            }
            for _ in 0..5 {
                let f: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
                let g: Vec<f64> = (0..space.len()).map(|_| rng.symmetric()).collect();
                let res = averaging_identity_check(&measure, &e, a, &op, &f, &g).unwrap();
                worst = worst
                    .max(res.residual_geq / res.scale)
                    .max(res.residual_strict / res.scale);
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    conclude(
        "5 averaging identity",
        worst <= 1e-12 && goodness_varies && elapsed < 120.0,
        format!(
            "worst relative residual {worst:.2e} (tolerance 1e-12), goodness varies: {goodness_varies}, {elapsed:.1}s (budget 120s)"
        ),
    );
}

// 6. Haar suite: orthonormality and mean-zero to 1e-10; Parseval to 1e-10
//    on 100 random functions; the weighted-decomposition properties on
//    1000 random (cube, weight) instances with 1e-12 slack.
#[test]
fn criterion_06_haar_suite() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let measure = DoublingMeasure::uniform(64);
    let tree = lattice_tree(&space, 0.25, 3, 906);
    let sys = build_haar_system(&tree, &measure).unwrap();
    // orthonormality and mean-zero
    let n = space.len();
    let dense: Vec<Vec<f64>> = (0..sys.len())
        .map(|i| sys.point_values(&tree, i, n))
        .collect();
    let mut worst_orth = 0.0f64;
    for i in 0..sys.len() {
        let mean: f64 = (0..n).map(|x| dense[i][x] * measure.mass(x)).sum();
        worst_orth = worst_orth.max(mean.abs());
        for j in i..sys.len() {
            let dot: f64 = (0..n)
                .map(|x| dense[i][x] * dense[j][x] * measure.mass(x))
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            worst_orth = worst_orth.max((dot - expected).abs());
        }
    }
    // Parseval on 100 random leaf functions
    let mut rng = Rng::new(907);
    let mut worst_parseval = 0.0f64;
    for _ in 0..100 {
        let mut f = vec![0.0; n];
        for cube in tree.cubes.last().unwrap() {
            let v = rng.symmetric() * 2.0;
            for &x in &cube.members {
                f[x] = v;
            }
        }
        let coeffs = sys.coefficients(&tree, &measure, &f);
        let mean: f64 = f
            .iter()
            .enumerate()
            .map(|(x, v)| v * measure.mass(x))
            .sum::<f64>()
            / measure.total();
        let norm2: f64 = f
            .iter()
            .enumerate()
            .map(|(x, v)| v * v * measure.mass(x))
            .sum();
        let parseval = mean * mean * measure.total() + coeffs.iter().map(|c| c * c).sum::<f64>();
        worst_parseval = worst_parseval.max((norm2 - parseval).abs() / (1.0 + norm2));
    }
    // 1000 random (cube, weight) decompositions
    let mut violations = 0usize;
    let mut instances = 0usize;
    while instances < 1000 {
        let w: Vec<f64> = (0..n).map(|_| (rng.symmetric() * 2.0).exp()).collect();
        let idx = rng.below(sys.len());
        let h = &sys.fns[idx];
        let dec = weighted_haar_decomposition(&tree, &measure, h, &w).unwrap();
        let chk = check_decomposition(&tree, &measure, h, &dec, &w);
        let ok = chk.identity_residual <= 1e-12
            && chk.alpha_ratio <= 1.0 + 1e-12
            && chk.hw_orthogonality <= 1e-12
            && chk.hw_norm_residual <= 1e-10
            && chk.delta_bound_ratio <= 1.0 + 1e-9
            && chk.energy_residual <= 1e-10;
        if !ok {
            violations += 1;
        }
        instances += 1;
    }
    conclude(
        "6 haar suite",
        worst_orth <= 1e-10 && worst_parseval <= 1e-10 && violations == 0,
        format!(
            "orthonormality {worst_orth:.2e}, Parseval {worst_parseval:.2e}, decomposition violations {violations}/1000"
        ),
    );
}

// 7. Bellman Hessian: alpha x Q grid, 1e5 samples x 8 directions, slack
//    >= -1e-9, finite differences within 1e-6.
#[test]
fn criterion_07_bellman_hessian() {
    let start = std::time::Instant::now();
    let mut worst_slack = f64::INFINITY;
    let mut worst_fd = 0.0f64;
    for &alpha in &[0.1, 0.25, 0.4] {
        for &q in &[2.0, 10.0, 100.0] {
            let params = BellmanParams::new(alpha, q).unwrap();
            let rep = bellman_hessian_check(&params, 100_000, 8, 908);
            worst_slack = worst_slack.min(rep.worst_slack);
            worst_fd = worst_fd.max(rep.worst_fd_error);
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    conclude(
        "7 bellman hessian",
        worst_slack >= -1e-9 && worst_fd < 1e-6 && elapsed < 60.0,
        format!(
            "worst slack {worst_slack:.2e} (>= -1e-9), fd error {worst_fd:.2e} (< 1e-6), {elapsed:.1}s (budget 60s)"
        ),
    );
}

// 8. tau Carleson scaling on a 1024-leaf tree at alpha = 1/4 over
//    [w]_2 in {2, 10, 100, 1000}: fitted slope <= 0.30 and the midpoint
//    inequality nonnegative on every cube.
#[test]
fn criterion_08_tau_carleson_scaling() {
    let (space, tree) = uniform_mary_tree(2, 10);
    let measure = DoublingMeasure::uniform(space.len());
    let alpha = 0.25;
    let family = WeightFamilySpec::A2Targets {
        a2_targets: vec![2.0, 10.0, 100.0, 1000.0],
        center: 0,
    };
    let weights = family.build(&space, &measure).unwrap();
    let pairs: Vec<(Vec<f64>, f64)> = weights.into_iter().map(|w| (w.w, w.a2)).collect();
    let table = tau_carleson_experiment(&tree, &measure, &pairs, alpha).unwrap();
    let midpoint_ok = table.rows.iter().all(|r| r.midpoint_min >= -1e-9);
    let ratios: Vec<String> = table
        .rows
        .iter()
        .map(|r| format!("{:.2}", r.carleson_constant / r.a2.powf(alpha)))
        .collect();
    conclude(
        "8 tau carleson scaling",
        table.slope <= alpha + 0.05 && midpoint_ok,
        format!(
            "slope {:.4} (threshold 0.30), midpoint nonnegative: {midpoint_ok}; \
             constant/Q^alpha per weight = [{}] (the saturating ratio is the Q^alpha bound itself; \
             the four-point fit absorbs the preasymptotic rise at Q = 2)",
            table.slope,
            ratios.join(", ")
        ),
    );
}

// 9. Carleson embedding: 1000 random (alpha-sequence, F) instances;
//    inequalities (1) and (2) hold with zero violations.
#[test]
fn criterion_09_carleson_embedding() {
    let (space, tree) = uniform_mary_tree(2, 6);
    let measure = DoublingMeasure::uniform(space.len());
    let mut rng = Rng::new(909);
    let mut violations = 0usize;
    for t in 0..1000 {
        let values: Vec<Vec<f64>> = tree
            .cubes
            .iter()
            .map(|level| level.iter().map(|_| rng.next_f64()).collect())
            .collect();
        let alpha = CarlesonSequence::new(&tree, &measure, values);
        let f: Vec<f64> = (0..space.len()).map(|_| rng.next_f64() * 5.0).collect();
        let sigma: Vec<f64> = (0..space.len())
            .map(|_| (rng.symmetric() * 1.5).exp())
            .collect();
        let with_sigma = t % 2 == 0;
        let rep = carleson_embedding_check(
            &space,
            &tree,
            &measure,
            &alpha,
            &f,
            if with_sigma { Some(&sigma) } else { None },
        );
        if !rep.holds_factor_two {
            violations += 1;
        }
        if with_sigma && rep.holds_weighted != Some(true) {
            violations += 1;
        }
    }
    conclude(
        "9 carleson embedding",
        violations == 0,
        format!("{violations} violations over 1000 instances"),
    );
}

// 10. Shift-norm scaling: complexities (0,0), (1,0), (1,1), (2,2) on a
//     512-leaf tree, power weights spanning [1, 1000] at 8 per decade,
//     20 draws per cell; slope <= 1.05 per complexity; dense vs power
//     iteration agreement 1e-6.
#[test]
fn criterion_10_shift_norm_scaling() {
    let start = std::time::Instant::now();
    let (space, tree) = uniform_mary_tree(2, 9);
    let measure = DoublingMeasure::uniform(space.len());
    let sys = build_haar_system(&tree, &measure).unwrap();
    let family = WeightFamilySpec::parse("power:a2=1..1000:per-decade=8").unwrap();
    let weights = family.build(&space, &measure).unwrap();
    let table = shift_bound_experiment(
        &tree,
        &measure,
        &sys,
        &weights,
        &[(0, 0), (1, 0), (1, 1), (2, 2)],
        20,
        910,
        space.len(),
    )
    .unwrap();
    let slopes_ok = table.slopes.iter().all(|(_, _, s)| *s <= 1.05);
    let elapsed = start.elapsed().as_secs_f64();
    let slopes: Vec<String> = table
        .slopes
        .iter()
        .map(|(m, n, s)| format!("({m},{n})={s:.3}"))
        .collect();
    conclude(
        "10 shift norm scaling",
        slopes_ok && table.method_agreement <= 1e-6 && elapsed < 600.0,
        format!(
            "slopes [{}] (threshold 1.05), dense/power agreement {:.2e} (tolerance 1e-6), {elapsed:.0}s (budget 600s)",
            slopes.join(", "),
            table.method_agreement
        ),
    );
}

// 11. Paraproduct scaling: b from the model kernel on a 256-net; slope
//     <= 1.05; adjointness to 1e-10; the Ainfty inequality on all cubes.
#[test]
fn criterion_11_paraproduct_scaling() {
    let space = FiniteMetricSpace::unit_interval_net(256);
    let measure = DoublingMeasure::uniform(256);
    let (op, _) =
        build_model_operator(&space, &measure, KernelKind::InvDist, KernelProfile::radius())
            .unwrap();
    let tree = lattice_tree(&space, 0.25, 4, 911);
    let sys = build_haar_system(&tree, &measure).unwrap();
    let b = paraproduct_coefficients(&tree, &measure, &sys, &op.matrix);
    let family = WeightFamilySpec::parse("power:a2=1..1000:per-decade=8").unwrap();
    let weights = family.build(&space, &measure).unwrap();
    let scaling =
        paraproduct_norm_experiment(&tree, &measure, &sys, &b, &weights, space.len(), 911)
            .unwrap();
    // adjointness
    let pi = build_paraproduct(&tree, &measure, &sys, b.clone(), 0.0, ParaproductKind::Pi, 256);
    let pi_star =
        build_paraproduct(&tree, &measure, &sys, b.clone(), 0.0, ParaproductKind::PiStar, 256);
    let mut rng = Rng::new(912);
    let mut worst_adjoint = 0.0f64;
    for _ in 0..20 {
        let f: Vec<f64> = (0..256).map(|_| rng.symmetric()).collect();
        let g: Vec<f64> = (0..256).map(|_| rng.symmetric()).collect();
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
        worst_adjoint = worst_adjoint.max((lhs - rhs).abs() / (1.0 + lhs.abs()));
    }
    // Ainfty inequality across the family
    let b_values: Vec<Vec<f64>> = b_squared_per_cube(&tree, &sys, &b)
        .iter()
        .map(|level| level.iter().map(|v| v.sqrt()).collect())
        .collect();
    let mut ainfty_ok = true;
    for weight in &weights {
        ainfty_ok &= ainfty_inequality_check(&space, &tree, &measure, &weight.w, &b_values).holds;
    }
    conclude(
        "11 paraproduct scaling",
        scaling.slope <= 1.05 && worst_adjoint <= 1e-10 && ainfty_ok,
        format!(
            "slope {:.3} (threshold 1.05), adjointness {worst_adjoint:.2e} (tolerance 1e-10), Ainfty holds: {ainfty_ok}",
            scaling.slope
        ),
    );
}

// 12. Coefficient decay: model kernel 1/dist on 64- and 256-nets; worst
//     coefficient/bound ratios finite and within factor 2 across sizes;
//     extracted shift coefficients admissible after normalization.
#[test]
fn criterion_12_coefficient_decay() {
    let mut in_ratios = Vec::new();
    let mut out_ratios = Vec::new();
    let mut admissible = true;
    for (n, levels) in [(64usize, 3usize), (256, 4)] {
        let space = FiniteMetricSpace::unit_interval_net(n);
        let measure = DoublingMeasure::uniform(n);
        let profile = KernelProfile::radius();
        let (op, _) =
            build_model_operator(&space, &measure, KernelKind::InvDist, profile.clone()).unwrap();
        let tree = lattice_tree(&space, 0.25, levels, 913);
        let sys = build_haar_system(&tree, &measure).unwrap();
        let sub = subtract_paraproducts(&op.matrix, &tree, &measure, &sys);
        let table = haar_coefficient_table(&sub.t_tilde, &tree, &measure, &sys);
        let goodness = GoodnessParams::plain(0.25, 2);
        let good = a2lab::goodness::classify_all(&space, &tree, &goodness);
        let rep_in = decay_check_in(&table, &tree, &sys, &good, 2, 1.0);
        let rep_out =
            decay_check_out(&table, &space, &tree, &measure, &sys, &good, &profile, 1.0);
        in_ratios.push(rep_in.worst_ratio);
        out_ratios.push(rep_out.worst_ratio);
        let mut rng = Rng::new(914);
        let f: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
        let g: Vec<f64> = (0..n).map(|_| rng.symmetric()).collect();
        let extraction = extract_shifts(
            &table, &space, &tree, &measure, &sys, &good, &profile, 2, 1, 1.0, &f, &g,
        )
        .unwrap();
        admissible &= extraction
            .nested
            .iter()
            .chain(&extraction.disjoint)
            .all(|e| e.max_normalized <= 1.0 + 1e-9);
        admissible &= extraction.sigma_in <= extraction.sigma_in_majorant + 1e-12;
        admissible &= extraction.sigma_out <= extraction.sigma_out_majorant + 1e-12;
    }
    let stable = |r: &[f64]| -> bool {
        r.iter().all(|v| v.is_finite()) && (r[0] <= 0.0 || (0.5..=2.0).contains(&(r[1] / r[0])))
    };
    conclude(
        "12 coefficient decay",
        stable(&in_ratios) && stable(&out_ratios) && admissible,
        format!(
            "nested ratios {in_ratios:?}, disjoint ratios {out_ratios:?} (factor-2 stability), extraction admissible: {admissible}"
        ),
    );
}

// 13. Containment probability: Monte Carlo conditional frequency >= 1/2 -
//     3 stderr above the reported s0 threshold; enumeration agreement on a
//     tiny space within 3 stderr.
#[test]
fn criterion_13_containment_probability() {
    let space = FiniteMetricSpace::unit_interval_net(64);
    let hierarchy = HierarchyParams {
        delta: 0.25,
        levels: 3,
        seed: 915,
    };
    let goodness = GoodnessParams::from_kernel(1.0, 2.0, 1, 0.05, 0.25);
    let s0s: Vec<usize> = (0..=4).collect();
    let mc = containment_probability_mc(&space, &hierarchy, &goodness, &s0s, 300, CAP).unwrap();
    let threshold = mc.threshold_s0;
    let mut above_ok = threshold.is_some();
    if let Some(t) = threshold {
        for row in mc.rows.iter().filter(|r| r.s0 >= t) {
            above_ok &= row.frequency >= 0.5 - 3.0 * row.stderr;
        }
    }
    // tiny-space enumeration cross-check
    let tiny =
        FiniteMetricSpace::from_coords(vec![vec![0.0], vec![0.3], vec![0.55], vec![1.0]])
            .unwrap();
    let tiny_h = HierarchyParams {
        delta: 0.25,
        levels: 2,
        seed: 0,
    };
    let tiny_mc =
        containment_probability_mc(&tiny, &tiny_h, &goodness, &s0s, 2_000, CAP).unwrap();
    let e = enumerate_goodness(&tiny, &tiny_h, &goodness, CAP).unwrap();
    let exact = containment_probability_enumerated(&tiny, &e, &s0s);
    let mut match_ok = true;
    for (m, x) in tiny_mc.rows.iter().zip(&exact.rows) {
        match_ok &= (m.frequency - x.frequency).abs() <= 3.0 * m.stderr.max(1e-3);
    }
    let freqs: Vec<String> = mc.rows.iter().map(|r| format!("{:.3}", r.frequency)).collect();
    conclude(
        "13 containment probability",
        above_ok && match_ok,
        format!(
            "threshold s0 = {threshold:?}, frequencies [{}], enumeration match: {match_ok}",
            freqs.join(", ")
        ),
    );
}

// 14. Determinism: the same config and seed give byte-identical CSV output
//     regardless of worker count.
#[test]
fn criterion_14_determinism() {
    let config = ExperimentConfig {
        seed: 916,
        space: SpaceSpec::Net { net: 32 },
        delta: 0.25,
        levels: 2,
        gamma: 0.25,
        r: 1,
        weights: None,
        experiments: vec![
            ExperimentSpec::Cover { samples: 20 },
            ExperimentSpec::Pbad {
                r_min: 1,
                r_max: 2,
                trials: 200,
            },
            ExperimentSpec::Census {
                spaces: 10,
                max_points: 6,
            },
        ],
        enumeration_cap: CAP,
    };
    set_worker_override(1);
    let run_a = run_experiments(&config).unwrap();
    set_worker_override(7);
    let run_b = run_experiments(&config).unwrap();
    set_worker_override(0);
    let mut identical = run_a.experiments.len() == run_b.experiments.len();
    for (ea, eb) in run_a.experiments.iter().zip(&run_b.experiments) {
        identical &= ea.metrics == eb.metrics;
        identical &= ea.tables.len() == eb.tables.len();
        for (ta, tb) in ea.tables.iter().zip(&eb.tables) {
            identical &= ta.to_csv() == tb.to_csv();
        }
    }
    conclude(
        "14 determinism",
        identical,
        "CSV output byte-identical across worker counts 1 and 7".into(),
    );
}
