//! Acceptance suite. Runs every criterion at its pinned tolerance, prints one
//! PASS/FAIL line each and exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use rand::Rng;

use lewisrows::convex::{lewis_quadratic_form, ConvexConfig};
use lewisrows::generate::{
    duplicated_row_matrix, gaussian_matrix, gaussian_vec, spiky_matrix, stream_rng,
};
use lewisrows::iterative::{
    almost_lewis_residual, approx_lewis_weights, iteration_count, lewis_iterate, IterConfig,
};
use lewisrows::linalg::{leverage_scores_exact, quadratic_forms, weighted_gram};
use lewisrows::recursion::{approx_lewis_form, default_f, RecursionConfig};
use lewisrows::sampler::{
    apply_sketch, draw_sketch, row_count_bound, sampling_plan, DeltaMode, PlanConfig,
    SamplingPlan,
};
use lewisrows::sketch::{leverage_scores_approx, SketchConfig};
use lewisrows::verify::{
    brute_force_lewis, check_monotonicity, check_split_invariance, check_stability,
    check_weight_inflation, distortion_estimate, form_eigen_range, split_row,
    BRUTE_FORCE_TOLERANCE, WEIGHT_TOLERANCE,
};
use lewisrows::{Matrix, Result, WeightVector};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn within_time(limit: Duration, start: Instant) -> bool {
    start.elapsed() < limit
}

fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

fn p2_coincidence() -> Result<Outcome> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut iterations_ok = true;
    for seed in 0..20 {
        let a = gaussian_matrix(500, 20, seed);
        let res = approx_lewis_weights(&a, &IterConfig::new(2.0, 0.1)?, seed)?;
        let lev = leverage_scores_exact(&a)?;
        iterations_ok &= res.iterations_used == 1;
        for (w, t) in res.weights.as_slice().iter().zip(lev.as_slice()) {
            worst = worst.max(rel_err(*w, *t));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-10 && iterations_ok && secs < 5.0,
        format!("max rel err {worst:.2e}, one iteration: {iterations_ok}, {secs:.2}s"),
    )
}

fn sum_law() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for (k, p) in [1.0, 1.5, 3.0, 6.0].into_iter().enumerate() {
        let a = gaussian_matrix(300, 7, 100 + k as u64);
        let w = if p < 4.0 {
            approx_lewis_weights(&a, &IterConfig::new(p, 1e-9)?, 0)?.weights
        } else {
            lewis_quadratic_form(&a, &ConvexConfig::new(p, 1e-7)?)?.weights
        };
        worst = worst.max(rel_err(w.sum(), 7.0));
    }
    outcome(worst <= 1e-6, format!("max rel deviation of sum from 7: {worst:.2e}"))
}

fn closed_form_fixture() -> Result<Outcome> {
    let res = approx_lewis_weights(&duplicated_row_matrix(), &IterConfig::new(1.0, 1e-9)?, 0)?;
    let err = res
        .weights
        .as_slice()
        .iter()
        .zip([0.5, 0.5, 1.0])
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    outcome(err <= 1e-8, format!("weights {:?}, max err {err:.2e}", res.weights.as_slice()))
}

fn contraction_rate() -> Result<Outcome> {
    let a = gaussian_matrix(200, 6, 7);
    let fixed = brute_force_lewis(&a, 1.0, 1e-13)?;
    let mut rng = stream_rng(7, 1);
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for _ in 0..20 {
        let mut w = WeightVector::new((0..200).map(|_| rng.random_range(-4.0f64..4.0).exp()).collect())?;
        let mut dist = w.log_distance(&fixed);
        // Stop before the distance reaches the oracle's own accuracy.
        while dist > 1e-9 {
            w = lewis_iterate(&a, 1.0, 1.0, &w, 0)?;
            let next = w.log_distance(&fixed);
            worst = worst.max(next / dist);
            dist = next;
            steps += 1;
        }
    }
    outcome(
        worst <= 0.5 + 1e-6,
        format!("worst per-step ratio {worst:.6} over {steps} steps"),
    )
}

fn iteration_budget() -> Result<Outcome> {
    let t = iteration_count(1.0, 0.01)?;
    let mut worst: f64 = 0.0;
    let bound = 0.01 * 1000f64.ln();
    for seed in 0..5 {
        let a = gaussian_matrix(1000, 10, 200 + seed);
        let cfg = IterConfig::new(1.0, 0.01)?.with_max_iterations(t)?;
        let w = approx_lewis_weights(&a, &cfg, seed)?.weights;
        let exact = brute_force_lewis(&a, 1.0, BRUTE_FORCE_TOLERANCE)?;
        worst = worst.max(w.log_distance(&exact));
    }
    outcome(
        t == 11 && worst <= bound,
        format!("T = {t}, worst log distance {worst:.2e} vs bound {bound:.4}"),
    )
}

fn cross_solver() -> Result<Outcome> {
    let mut worst_dist: f64 = 0.0;
    let mut worst_cert: f64 = 0.0;
    for seed in 0..10 {
        let a = gaussian_matrix(100, 8, 300 + seed);
        let it = approx_lewis_weights(&a, &IterConfig::new(3.0, 1e-9)?, 0)?.weights;
        let cv = lewis_quadratic_form(&a, &ConvexConfig::new(3.0, 1e-6)?)?;
        worst_dist = worst_dist.max(it.log_distance(&cv.weights));
        worst_cert = worst_cert.max(cv.certificate);
    }
    outcome(
        worst_dist <= 1e-4 && worst_cert <= 1.001,
        format!("max log distance {worst_dist:.2e}, max certificate {worst_cert:.8}"),
    )
}

fn convex_p6() -> Result<Outcome> {
    let a = gaussian_matrix(80, 6, 400);
    let cfg = ConvexConfig::new(6.0, 1e-7)?;
    let first = lewis_quadratic_form(&a, &cfg.with_seed(1))?;
    let second = lewis_quadratic_form(&a, &cfg.with_seed(2))?;
    let saturation: f64 = quadratic_forms(&a, &first.form)?.iter().map(|u| u.powi(3)).sum();
    let cert = almost_lewis_residual(&a, &first.weights, 6.0)?;
    let dist = first.weights.log_distance(&second.weights);
    outcome(
        cert <= 1.01 && (saturation - 6.0).abs() <= 1e-6 && dist <= 1e-5,
        format!("certificate {cert:.8}, saturation {saturation:.10}, restart distance {dist:.2e}"),
    )
}

/// Uniform sampling with `rows` draws: `p_i = rows / n`.
fn uniform_sketch(a: &Matrix, rows: usize, seed: u64) -> Result<Matrix> {
    let n = a.rows();
    let plan = SamplingPlan {
        p: 1.0,
        values: vec![rows as f64 / n as f64; n],
        total: rows,
        epsilon: 0.25,
        oversample_constant: 4.0,
        delta_mode: DeltaMode::Constant,
        dimension: a.cols(),
    };
    apply_sketch(&draw_sketch(&plan, seed)?, a)
}

fn spiky_fixture() -> Matrix {
    spiky_matrix(4000, 10, 5, 1000.0, 500)
}

fn l1_concentration() -> Result<Outcome> {
    let start = Instant::now();
    let a = spiky_fixture();
    let eps = 0.25;
    let n_rows = row_count_bound(10, 1.0, eps, 4.0, DeltaMode::Constant)?;
    let w = approx_lewis_weights(&a, &IterConfig::new(1.0, 1e-6)?, 0)?.weights;
    let plan = sampling_plan(&w, 1.0, &PlanConfig::new(eps, DeltaMode::Constant))?;
    let mut lewis_pass = 0;
    let mut uniform_fail = 0;
    let mut worst_lewis: f64 = 0.0;
    for seed in 0..20 {
        let s = draw_sketch(&plan, seed)?;
        let report = distortion_estimate(&a, &apply_sketch(&s, &a)?, 1.0, 2000, seed)?;
        worst_lewis = worst_lewis.max(report.distortion());
        lewis_pass += report.passes(eps) as usize;
        let u = uniform_sketch(&a, plan.total, seed)?;
        let report = distortion_estimate(&a, &u, 1.0, 2000, seed)?;
        uniform_fail += !report.passes(eps) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        plan.total == n_rows && lewis_pass >= 18 && uniform_fail >= 10 && secs < 60.0,
        format!(
            "N = {}, Lewis passes {lewis_pass}/20 (worst log distortion {worst_lewis:.3}), \
             uniform fails {uniform_fail}/20, {secs:.1}s",
            plan.total
        ),
    )
}

fn monotonicity() -> Result<Outcome> {
    let mut violations = 0;
    let mut trials = 0;
    for (k, p) in [1.0, 1.5, 2.0].into_iter().enumerate() {
        for t in 0..200u64 {
            let seed = 1000 * k as u64 + t;
            let a = gaussian_matrix(12, 5, seed);
            let row = gaussian_vec(&mut stream_rng(seed, 77), 5);
            trials += 1;
            violations += !check_monotonicity(&a, &row, p, 1e-8)? as usize;
        }
    }
    outcome(violations == 0, format!("{violations} violations in {trials} trials"))
}

fn stability() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut worst_weights: f64 = 0.0;
    for t in 0..100u64 {
        let a = gaussian_matrix(15, 5, 2000 + t);
        let mut rng = stream_rng(t, 88);
        let scalars: Vec<f64> = (0..15).map(|_| rng.random_range(0.9..=1.1)).collect();
        let r = check_stability(&a, &scalars, 1.0)?;
        worst = worst.max(r.reweighted_exponent);
        worst_weights = worst_weights.max(r.weight_exponent);
    }
    outcome(
        worst <= 1.0 + 1e-6,
        format!(
            "max reweighted-row exponent {worst:.6} (weight-ratio exponent {worst_weights:.6}, \
             not asserted)"
        ),
    )
}

fn weight_inflation() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    let mut violations = 0;
    for t in 0..100u64 {
        let a = gaussian_matrix(10, 4, 3000 + t);
        let extra_rows = 1 + (t as usize % 5);
        let extra = gaussian_matrix(extra_rows, 4, 9000 + t).scaled(1.0 + (t % 7) as f64)?;
        let r = check_weight_inflation(&a, Some(&extra), 3.0)?;
        worst = worst.max(r);
        violations += (r > 2.0 * (1.0 + WEIGHT_TOLERANCE)) as usize;
    }
    outcome(violations == 0, format!("max ratio {worst:.6}, {violations} violations"))
}

fn splitting() -> Result<Outcome> {
    let mut failures = 0;
    let mut worst_norm: f64 = 0.0;
    let a = gaussian_matrix(20, 4, 4000);
    for k in [2, 5] {
        for p in [1.0, 3.0] {
            for i in [0, 7, 19] {
                failures += !check_split_invariance(&a, i, k, p, WEIGHT_TOLERANCE, i as u64)? as usize;
                let s = split_row(&a, i, k, p)?;
                let mut rng = stream_rng(k as u64, i as u64);
                for _ in 0..100 {
                    let x = gaussian_vec(&mut rng, 4);
                    worst_norm = worst_norm.max(rel_err(s.norm(&x, p), a.norm(&x, p)));
                }
            }
        }
    }
    outcome(
        failures == 0 && worst_norm <= 1e-12,
        format!("{failures} failed cases, max norm rel err {worst_norm:.2e}"),
    )
}

fn recursion_form() -> Result<Outcome> {
    let start = Instant::now();
    let (n, d, p, theta) = (50_000usize, 10usize, 1.0, 0.5);
    let a = gaussian_matrix(n, d, 5000);
    let exact = brute_force_lewis(&a, p, BRUTE_FORCE_TOLERANCE)?;
    let g = weighted_gram(&a, &exact, p)?;
    let mut inside = 0;
    let mut extremes = (f64::INFINITY, 0.0f64);
    let mut total_rows = 0.0;
    let runs = 40;
    for seed in 0..runs {
        let cfg = RecursionConfig::new(p, theta, seed)?;
        let (q, trace) = approx_lewis_form(&a, &cfg)?;
        let (lo, hi) = form_eigen_range(&q, &g);
        extremes = (extremes.0.min(lo), extremes.1.max(hi));
        inside += (lo >= 0.45 && hi <= 2.05) as usize;
        total_rows += trace.top().sampled_rows as f64;
    }
    let mean_rows = total_rows / runs as f64;
    let (nf, df) = (n as f64, d as f64);
    let bound = default_f(p) * nf.powf(theta / 2.0) * df.powf(p / 2.0 + 1.0) * df.ln();
    let secs = start.elapsed().as_secs_f64();
    let part1 = inside * 100 >= 95 * runs as usize;
    let part2 = mean_rows <= 1.2 * bound;
    outcome(
        part1 && part2 && within_time(Duration::from_secs(120), start),
        format!(
            "part 1: {inside}/{runs} within [0.45, 2.05] (eigenvalues {:.3}..{:.3}) {}; \
             part 2: mean top-level rows {mean_rows:.1} = {:.2} x bound, limit 1.2 x bound = {:.1} {}; \
             {secs:.1}s",
            extremes.0,
            extremes.1,
            if part1 { "ok" } else { "FAIL" },
            mean_rows / bound,
            1.2 * bound,
            if part2 { "ok" } else { "FAIL" },
        ),
    )
}

fn sketch_calibration() -> Result<Outcome> {
    let a = gaussian_matrix(2000, 20, 6000);
    let exact = leverage_scores_exact(&a)?;
    let ones = WeightVector::ones(2000);
    let mut good = 0;
    for seed in 0..100 {
        let cfg = SketchConfig::new(2.0, 512, seed)?;
        let approx = leverage_scores_approx(&a, &ones, 2.0, &cfg)?;
        good += (approx.log_distance(&exact) <= 2f64.ln()) as usize;
    }
    outcome(good >= 99, format!("{good}/100 seeds within factor 2 on every row"))
}

fn sampler_unbiasedness() -> Result<Outcome> {
    let a = gaussian_matrix(50, 5, 7000);
    let x = gaussian_vec(&mut stream_rng(7000, 1), 5);
    let mut worst: f64 = 0.0;
    for p in [1.0, 2.0, 3.0] {
        let w = brute_force_lewis(&a, p, BRUTE_FORCE_TOLERANCE)?;
        let plan = sampling_plan(&w, p, &PlanConfig::new(0.5, DeltaMode::Constant))?;
        let target = a.norm_pow(&x, p);
        let draws = 10_000u64;
        let mean = (0..draws)
            .map(|seed| {
                let s = draw_sketch(&plan, seed).expect("valid plan");
                apply_sketch(&s, &a).expect("matching rows").norm_pow(&x, p)
            })
            .sum::<f64>()
            / draws as f64;
        worst = worst.max(rel_err(mean, target));
    }
    outcome(worst <= 0.01, format!("max relative bias {worst:.2e} over 10^4 draws"))
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 15] = [
        ("p = 2 coincidence with leverage scores", p2_coincidence),
        ("weights sum to d", sum_law),
        ("closed-form duplicated-row fixture", closed_form_fixture),
        ("contraction rate of the exact iteration", contraction_rate),
        ("iteration budget", iteration_budget),
        ("convex and iterative solvers agree at p = 3", cross_solver),
        ("convex solver at p = 6", convex_p6),
        ("l1 sampling concentration", l1_concentration),
        ("monotonicity under row addition", monotonicity),
        ("stability under row scaling", stability),
        ("weight inflation under row addition", weight_inflation),
        ("splitting invariance", splitting),
        ("recursive form approximation", recursion_form),
        ("sketch estimator calibration", sketch_calibration),
        ("sampler unbiasedness", sampler_unbiasedness),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += !pass as usize;
        println!(
            "criterion {:>2} {}: {name}: {detail} [{secs:.2}s]",
            k + 1,
            if pass { "PASS" } else { "FAIL" }
        );
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
