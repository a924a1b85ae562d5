//! Seeded Monte Carlo checks. Every test is deterministic; thresholds are the
//! calibrated rates, not single-draw guarantees.

use lewisrows::convex::{determinant_objective, lewis_quadratic_form, saturate, ConvexConfig};
use lewisrows::generate::{gaussian_matrix, gaussian_vec, stream_rng};
use lewisrows::iterative::{approx_lewis_weights, IterConfig};
use lewisrows::linalg::{leverage_scores_exact, weighted_gram, QuadForm, WeightVector};
use lewisrows::recursion::{approx_lewis_form, approx_lewis_weights_from_form, RecursionConfig};
use lewisrows::sampler::{apply_sketch, draw_sketch, sampling_plan, DeltaMode, PlanConfig};
use lewisrows::sketch::{leverage_scores_approx, SketchConfig};
use lewisrows::verify::{brute_force_lewis, distortion_estimate, form_eigen_range};
use lewisrows::Matrix;

#[test]
fn draw_multiplicities_pass_chi_square() {
    let w = WeightVector::new((1..=20).map(|i| i as f64 / 21.0).collect()).unwrap();
    let mut cfg = PlanConfig::new(0.5, DeltaMode::Constant);
    // Pick C_s so the table count is 10^5.
    cfg.oversample_constant = 1e5 * 0.25 / (10.0 * 10f64.ln());
    let plan = sampling_plan(&w, 1.0, &cfg).unwrap();
    assert_eq!(plan.total, 100_000);
    let counts = draw_sketch(&plan, 42).unwrap().multiplicities();
    let chi2: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            let e = plan.total as f64 * plan.probability(i);
            (c as f64 - e).powi(2) / e
        })
        .sum();
    // 99th percentile of chi-square with 19 degrees of freedom.
    assert!(chi2 < 36.191, "chi2 = {chi2}");
}

#[test]
fn leverage_plan_gives_l2_subspace_embedding() {
    let a = gaussian_matrix(3000, 8, 21);
    let lev = leverage_scores_exact(&a).unwrap();
    let plan = sampling_plan(&lev, 2.0, &PlanConfig::new(0.5, DeltaMode::Constant)).unwrap();
    let sa = apply_sketch(&draw_sketch(&plan, 5).unwrap(), &a).unwrap();
    let report = distortion_estimate(&a, &sa, 2.0, 500, 5).unwrap();
    assert!(report.distortion() <= 1.5f64.ln(), "{}", report.to_text());
}

#[test]
fn probe_estimates_stay_within_one_and_a_half() {
    let a = gaussian_matrix(2000, 10, 8);
    let exact = leverage_scores_exact(&a).unwrap();
    let ones = WeightVector::ones(a.rows());
    let good = (0..100)
        .filter(|&seed| {
            let cfg = SketchConfig::new(1.5, 512, seed).unwrap();
            let approx = leverage_scores_approx(&a, &ones, 2.0, &cfg).unwrap();
            approx.log_distance(&exact) <= 1.5f64.ln()
        })
        .count();
    assert!(good >= 95, "{good}/100");
}

fn form_guarantee_rate(p: f64, drop_dimension_factor: bool) -> (usize, usize) {
    let (n, d) = (8000, 6);
    let a = gaussian_matrix(n, d, 30 + (10.0 * p) as u64);
    let exact = brute_force_lewis(&a, p, 1e-10).unwrap();
    let g = weighted_gram(&a, &exact, p).unwrap();
    let runs = 40;
    let mut inside = 0;
    for seed in 0..runs {
        let mut cfg = RecursionConfig::new(p, 0.5, seed).unwrap();
        cfg.drop_dimension_factor = drop_dimension_factor;
        let (q, trace) = approx_lewis_form(&a, &cfg).unwrap();
        let (lo, hi) = form_eigen_range(&q, &g);
        inside += (lo >= 0.45 && hi <= 2.05) as usize;
        for level in &trace.levels {
            assert!(level.base_rows <= level.input_rows);
        }
        assert!(trace.top().base_rows < trace.top().input_rows);
    }
    (inside, runs as usize)
}

#[test]
fn recursive_form_is_two_approximate() {
    for p in [1.0, 1.5, 2.5] {
        let (inside, runs) = form_guarantee_rate(p, false);
        assert!(inside * 100 >= 95 * runs, "p = {p}: {inside}/{runs}");
    }
}

#[test]
fn recursive_form_without_dimension_factor_for_small_p() {
    for p in [1.0, 1.5, 2.0] {
        let (inside, runs) = form_guarantee_rate(p, true);
        assert!(inside * 100 >= 95 * runs, "p = {p}: {inside}/{runs}");
    }
}

#[test]
fn weights_from_exact_form_inherit_probe_accuracy() {
    let a = gaussian_matrix(1500, 6, 12);
    for p in [1.0, 3.0] {
        let exact = brute_force_lewis(&a, p, 1e-10).unwrap();
        let q = weighted_gram(&a, &exact, p).unwrap().inverse().unwrap();
        let beta = 1.5;
        let cfg = SketchConfig::new(beta, 1024, 3).unwrap();
        let w = approx_lewis_weights_from_form(&a, &q, p, &cfg).unwrap();
        // A beta-accurate u_i gives weights within beta^{p/2}.
        assert!(w.log_distance(&exact) <= (p / 2.0) * beta.ln());
    }
}

fn symmetric_trace_free(d: usize, seed: u64) -> Vec<f64> {
    let g = gaussian_vec(&mut stream_rng(seed, 4), d * d);
    let mut e = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            e[i * d + j] = 0.5 * (g[i * d + j] + g[j * d + i]);
        }
    }
    let tr = (0..d).map(|i| e[i * d + i]).sum::<f64>() / d as f64;
    for i in 0..d {
        e[i * d + i] -= tr;
    }
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    e.iter().map(|v| v / norm).collect()
}

#[test]
fn near_optimal_objective_means_near_optimal_form() {
    let a = gaussian_matrix(120, 5, 40);
    let d = a.cols();
    let p = 3.0;
    let best = lewis_quadratic_form(&a, &ConvexConfig::new(p, 1e-9).unwrap()).unwrap();
    let f_best = determinant_objective(&a, &best.form, p).unwrap();
    let c = best.form.factorization().sqrt_factor();
    let inv = best.form.inverse().unwrap();
    let mut ratios = Vec::new();
    for seed in 0..10 {
        let e = symmetric_trace_free(d, seed);
        for t in [0.1, 0.03, 0.01] {
            // M_t = C (I + tE)^2 C^T, then put back on the constraint surface.
            let mut k = e.iter().map(|v| t * v).collect::<Vec<_>>();
            for i in 0..d {
                k[i * d + i] += 1.0;
            }
            let ck = Matrix::new(d, d, c.clone()).unwrap().matmul(&Matrix::new(d, d, k).unwrap()).unwrap();
            let m = ck.matmul(&ck.transpose()).unwrap();
            let m = saturate(&a, &QuadForm::from_matrix(&m).unwrap(), p).unwrap();
            let loss = f_best - determinant_objective(&a, &m, p).unwrap();
            assert!(loss > 0.0, "perturbation improved the objective by {}", -loss);
            let (lo, hi) = form_eigen_range(&m, &inv);
            let deviation = lo.ln().abs().max(hi.ln().abs());
            ratios.push(deviation / loss.sqrt());
        }
    }
    let worst = ratios.iter().cloned().fold(0.0, f64::max);
    assert!(worst <= 10.0, "eigenvalue deviation / sqrt(loss) reached {worst}");
}

#[test]
fn iterative_weights_feed_sampler_without_bias() {
    let a = gaussian_matrix(40, 4, 50);
    let x = gaussian_vec(&mut stream_rng(50, 1), 4);
    let w = approx_lewis_weights(&a, &IterConfig::new(1.5, 1e-10).unwrap(), 0)
        .unwrap()
        .weights;
    let plan = sampling_plan(&w, 1.5, &PlanConfig::new(0.7, DeltaMode::Constant)).unwrap();
    let target = a.norm_pow(&x, 1.5);
    let draws = 10_000;
    let mean = (0..draws)
        .map(|seed| apply_sketch(&draw_sketch(&plan, seed).unwrap(), &a).unwrap().norm_pow(&x, 1.5))
        .sum::<f64>()
        / draws as f64;
    assert!((mean - target).abs() <= 0.01 * target);
}
