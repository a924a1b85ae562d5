use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use lewisrows::convex::{lewis_quadratic_form, weights_from_form, ConvexConfig};
use lewisrows::generate::Generator;
use lewisrows::io::{read_matrix, read_weights, write_matrix, write_matrix_market, write_weights};
use lewisrows::iterative::{approx_lewis_weights, IterConfig};
use lewisrows::linalg::leverage_scores_exact;
use lewisrows::recursion::{approx_lewis_form, RecursionConfig};
use lewisrows::sampler::{
    apply_sketch, draw_sketch, row_count_bound, sampling_plan, DeltaMode, PlanConfig, SamplingPlan,
};
use lewisrows::verify::distortion_estimate;
use lewisrows::{LewisError, Matrix, Result, WeightVector};

use crate::manifest::RunManifest;
use crate::{
    BenchArgs, Cli, Command, GenerateArgs, InputArgs, LeverageArgs, LewisArgs, Method, RecurseArgs,
    SampleArgs, VerifyArgs,
};

pub fn run(cli: &Cli) -> Result<()> {
    let manifest = match &cli.command {
        Command::Leverage(args) => leverage(args)?,
        Command::Lewis(args) => lewis(args)?,
        Command::Sample(args) => sample(args)?,
        Command::Verify(args) => verify(args)?,
        Command::Recurse(args) => recurse(args)?,
        Command::Bench(args) => bench(args)?,
        Command::Generate(args) => generate(args)?,
    };
    if let Some(path) = &cli.manifest {
        manifest.write(path)?;
    }
    Ok(())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn load(input: &InputArgs) -> Result<Matrix> {
    read_matrix(&input.input, input.format.map(Into::into))
}

fn solve_lewis(a: &Matrix, p: f64, method: Method, theta: f64, tolerance: f64, beta: f64, seed: u64) -> Result<WeightVector> {
    let method = match method {
        Method::Auto if p < 4.0 => Method::Iterative,
        Method::Auto => Method::Convex,
        m => m,
    };
    if method == Method::Iterative {
        let cfg = IterConfig::new(p, theta)?.with_beta(beta)?;
        let r = approx_lewis_weights(a, &cfg, seed)?;
        eprintln!(
            "method=iterative iterations={} residual={:e} clamped_rows={}",
            r.iterations_used, r.final_residual, r.clamped_rows
        );
        Ok(r.weights)
    } else {
        let sol = lewis_quadratic_form(a, &ConvexConfig::new(p, tolerance)?)?;
        eprintln!(
            "method=convex steps={} certificate={:e} gradient_norm={:e}",
            sol.steps, sol.certificate, sol.gradient_norm
        );
        Ok(sol.weights)
    }
}

fn leverage(args: &LeverageArgs) -> Result<RunManifest> {
    let a = load(&args.input)?;
    let lev = leverage_scores_exact(&a)?;
    write_weights(&lev, output(args.output.as_deref())?)?;
    Ok(RunManifest::new("leverage", Some(&args.input.input)))
}

fn lewis(args: &LewisArgs) -> Result<RunManifest> {
    let a = load(&args.input)?;
    let w = solve_lewis(&a, args.p, args.method, args.theta, args.tolerance, args.beta, args.seed)?;
    write_weights(&w, output(args.output.as_deref())?)?;
    let mut m = RunManifest::new("lewis", Some(&args.input.input));
    m.p = Some(args.p);
    m.theta = Some(args.theta);
    m.beta = Some(args.beta);
    m.seed = Some(args.seed);
    Ok(m)
}

fn sample(args: &SampleArgs) -> Result<RunManifest> {
    let a = load(&args.input)?;
    let mode: DeltaMode = args.mode.into();
    if args.refine && (args.p != 1.0 || mode != DeltaMode::HighProbability) {
        return Err(LewisError::InvalidInput("--refine needs p = 1 and --mode high".into()));
    }
    let w = match &args.weights {
        Some(path) => {
            let w = read_weights(BufReader::new(File::open(path)?))?;
            if w.len() != a.rows() {
                return Err(LewisError::DimensionMismatch {
                    expected: a.rows(),
                    found: w.len(),
                });
            }
            w
        }
        None => solve_lewis(&a, args.p, Method::Auto, 1e-8, 1e-6, 1.0, args.seed)?,
    };
    let cfg = PlanConfig {
        epsilon: args.epsilon,
        oversample_constant: args.oversample,
        delta_mode: mode,
        refine_count: args.refine,
    };
    let plan = sampling_plan(&w, args.p, &cfg)?;
    let s = draw_sketch(&plan, args.seed)?;
    eprintln!("N={} distinct_rows={}", s.len(), s.multiplicities().iter().filter(|&&c| c > 0).count());
    if let Some(path) = &args.output {
        write_matrix(&apply_sketch(&s, &a)?, path, None)?;
    }
    if args.sketch.is_some() || args.output.is_none() {
        let mut out = output(args.sketch.as_deref())?;
        s.write_to(&mut out)?;
        out.flush()?;
    }
    let mut m = RunManifest::new("sample", Some(&args.input.input));
    m.p = Some(args.p);
    m.epsilon = Some(args.epsilon);
    m.seed = Some(args.seed);
    Ok(m)
}

fn verify(args: &VerifyArgs) -> Result<RunManifest> {
    let a = load(&args.input)?;
    let sa = read_matrix(&args.sketch_matrix, None)?;
    let report = distortion_estimate(&a, &sa, args.p, args.num_dirs, args.seed)?;
    let mut out = output(args.report.as_deref())?;
    out.write_all(report.to_text().as_bytes())?;
    if let Some(eps) = args.epsilon {
        writeln!(out, "epsilon={eps:e}\npasses={}", report.passes(eps))?;
    }
    out.flush()?;
    let mut m = RunManifest::new("verify", Some(&args.input.input));
    m.p = Some(args.p);
    m.epsilon = args.epsilon;
    m.seed = Some(args.seed);
    Ok(m)
}

fn recurse(args: &RecurseArgs) -> Result<RunManifest> {
    let a = load(&args.input)?;
    let mut cfg = RecursionConfig::new(args.p, args.theta, args.seed)?;
    if let Some(f) = args.f_p {
        cfg.f_p = f;
    }
    cfg.base_case_rows = args.base_rows;
    cfg.drop_dimension_factor = args.no_dimension_factor;
    cfg.probe_count = args.probes;
    cfg.trace = args.trace.is_some();
    cfg.validate()?;
    let (q, trace) = approx_lewis_form(&a, &cfg)?;
    eprintln!("depth={} top_sampled_rows={}", trace.depth(), trace.top().sampled_rows);
    let d = q.dim();
    let form = Matrix::new(d, d, q.matrix().to_vec())?;
    match &args.output_form {
        Some(path) => write_matrix(&form, path, None)?,
        None => {
            let mut out = output(None)?;
            write_matrix_market(&form, &mut out)?;
            out.flush()?;
        }
    }
    if let Some(path) = &args.trace {
        std::fs::write(path, trace.to_text())?;
    }
    if let Some(path) = &args.weights_output {
        write_weights(&weights_from_form(&a, &q, args.p)?, output(Some(path))?)?;
    }
    let mut m = RunManifest::new("recurse", Some(&args.input.input));
    m.p = Some(args.p);
    m.theta = Some(args.theta);
    m.seed = Some(args.seed);
    Ok(m)
}

/// Same row count as `template`, probabilities proportional to `scores`.
fn plan_like(template: &SamplingPlan, scores: &[f64]) -> SamplingPlan {
    let sum: f64 = scores.iter().sum();
    let n = template.total as f64;
    SamplingPlan {
        values: scores.iter().map(|s| s * n / sum).collect(),
        ..template.clone()
    }
}

fn bench(args: &BenchArgs) -> Result<RunManifest> {
    let generators = args
        .generators
        .iter()
        .map(|g| Generator::parse(g))
        .collect::<Result<Vec<_>>>()?;
    let mode: DeltaMode = args.mode.into();
    let mut out = output(args.report.as_deref())?;
    writeln!(out, "generator,n,d,p,epsilon,N,method,seed,distortion")?;
    for gen in &generators {
        let a = gen.build(args.matrix_seed);
        let (n, d) = (a.rows(), a.cols());
        let lev = leverage_scores_exact(&a)?;
        for &p in &args.p {
            let w = solve_lewis(&a, p, Method::Auto, 1e-8, 1e-6, 1.0, 0)?;
            for &eps in &args.epsilon {
                let cfg = PlanConfig {
                    epsilon: eps,
                    oversample_constant: args.oversample,
                    delta_mode: mode,
                    refine_count: false,
                };
                let lewis_plan = sampling_plan(&w, p, &cfg)?;
                debug_assert_eq!(lewis_plan.total, row_count_bound(d, p, eps, args.oversample, mode)?);
                let plans = [
                    ("lewis", lewis_plan.clone()),
                    ("uniform", plan_like(&lewis_plan, &vec![1.0; n])),
                    ("leverage", plan_like(&lewis_plan, lev.as_slice())),
                ];
                for seed in args.seed..args.seed + args.seeds {
                    for (name, plan) in &plans {
                        let sa = apply_sketch(&draw_sketch(plan, seed)?, &a)?;
                        let r = distortion_estimate(&a, &sa, p, args.num_dirs, seed)?;
                        writeln!(
                            out,
                            "{},{n},{d},{p},{eps},{},{name},{seed},{:e}",
                            gen.name(),
                            plan.total,
                            r.distortion()
                        )?;
                    }
                }
            }
        }
    }
    out.flush()?;
    let mut m = RunManifest::new("bench", None);
    m.seed = Some(args.seed);
    Ok(m)
}

fn generate(args: &GenerateArgs) -> Result<RunManifest> {
    let a = Generator::parse(&args.generator)?.build(args.seed);
    write_matrix(&a, &args.output, args.format.map(Into::into))?;
    let mut m = RunManifest::new("generate", None);
    m.seed = Some(args.seed);
    Ok(m)
}
