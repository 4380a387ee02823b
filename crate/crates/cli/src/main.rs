use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use egf::bundle::{
    load_dataset, load_model, save_dataset, save_model, DatasetBundle, InterpolationRecord,
    ModelManifest,
};
use egf::egf::{relative_kernel_error, relative_model_error, test_error, EgfModel};
use egf::experiments::{benchmark_grid, run_experiment, write_report, Overrides};
use egf::forcing::{GpSampler, KernelConfig};
use egf::interp::{interpolate_egf, select_origin, InterpolationScheme, InterpolationSet};
use egf::learn_pod::learn_pod;
use egf::learn_rsvd::{learn_rsvd_with, RsvdConfig};
use egf::rng::derive_seed;
use egf::solvers::{add_noise, solve_ensemble, NoiseConfig, ProblemKind, ProblemSpec};
use egf::{EgfError, Result};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "egf", version, about = "Learn, evaluate and interpolate empirical Green's functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample forcings, solve, and save a dataset bundle.
    Generate(GenerateArgs),
    /// Fit a POD model to a dataset bundle.
    LearnPod(LearnPodArgs),
    /// Learn a model with the two-pass randomized SVD.
    LearnRsvd(LearnRsvdArgs),
    /// Score a model against the closed form, a test dataset, or another model.
    Evaluate(EvaluateArgs),
    /// Interpolate saved models to a new parameter value.
    Interpolate(InterpolateArgs),
    /// Run a named experiment recipe and write report.csv / report.json.
    Report(ReportArgs),
}

#[derive(Args)]
struct ProblemArgs {
    /// poisson1d, helmholtz1d, airy1d, multiphysics1d, fractional-laplacian1d,
    /// poisson2d-disk or helmholtz2d-square.
    #[arg(long)]
    problem: String,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    #[arg(long, default_value_t = 2000)]
    sensors: usize,
    /// Lattice spacing of the 2D problems.
    #[arg(long, default_value_t = 0.05)]
    spacing: f64,
    #[arg(long, default_value_t = 5e-3)]
    lengthscale: f64,
}

impl ProblemArgs {
    fn problem(&self) -> Result<ProblemSpec> {
        let kind = ProblemKind::from_name(&self.problem, self.theta)?;
        ProblemSpec::new(kind, benchmark_grid(kind, self.sensors, self.spacing)?)
    }

    fn kernel(&self) -> KernelConfig {
        KernelConfig::squared_exponential(self.lengthscale)
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Relative noise level applied to the responses.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnPodArgs {
    /// Dataset bundle directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 100)]
    rank: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LearnRsvdArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 100)]
    rank: usize,
    /// Relative noise level applied to the responses of both passes.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model bundle directory.
    #[arg(long)]
    model: PathBuf,
    /// Dataset bundle used as the test set.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Reference model bundle for a kernel-to-kernel comparison.
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct InterpolateArgs {
    /// Model bundle directories of the knots.
    #[arg(long, num_args = 2.., required = true)]
    models: Vec<PathBuf>,
    /// Target parameter value.
    #[arg(long)]
    theta: f64,
    #[arg(long, default_value = "full-lagrange")]
    scheme: InterpolationScheme,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    /// Recipe name, e.g. poisson1d-clean, table1, sweep-rank, airy-interp.
    #[arg(long)]
    recipe: String,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    sensors: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    lengthscale: Option<f64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    scheme: Option<InterpolationScheme>,
    /// Further overrides as key=value (e.g. rsvd-samples=200, replicates=3).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

fn noise_config(level: Option<f64>, seed: u64, label: &str) -> Result<Option<NoiseConfig>> {
    level
        .map(|l| NoiseConfig::new(l, derive_seed(seed, label)))
        .transpose()
}

fn generate(a: &GenerateArgs) -> Result<Value> {
    let problem = a.problem.problem()?;
    let kernel = a.problem.kernel();
    let sampler = GpSampler::new(&problem.grid, &kernel)?;
    let f = sampler.sample(a.samples, a.seed)?;
    let mut e = solve_ensemble(&problem, &f)?;
    if let Some(cfg) = noise_config(a.noise, a.seed, "noise")? {
        e = add_noise(&e, cfg)?;
    }
    let bundle = DatasetBundle::new(kernel.with_jitter(sampler.jitter()), f, e)?;
    save_dataset(&a.out, &bundle)?;
    Ok(json!({ "dataset": a.out, "manifest": bundle.manifest }))
}

fn save(out: &Path, model: &EgfModel, manifest: &ModelManifest) -> Result<Value> {
    save_model(out, model, manifest)?;
    Ok(json!({ "model": out, "manifest": manifest }))
}

fn learn_pod_cmd(a: &LearnPodArgs) -> Result<Value> {
    let data = load_dataset(&a.data)?;
    let model = learn_pod(&data.forcing, &data.responses, a.rank)?;
    let mut manifest = ModelManifest::for_model(&model);
    manifest.problem = Some(data.manifest.problem);
    manifest.lineage = json!({ "dataset": a.data, "dataset_manifest": data.manifest });
    save(&a.out, &model, &manifest)
}

fn learn_rsvd_cmd(a: &LearnRsvdArgs) -> Result<Value> {
    let problem = a.problem.problem()?;
    let kernel = a.problem.kernel();
    let f = GpSampler::new(&problem.grid, &kernel)?.sample(a.samples, a.seed)?;
    let mut cfg = RsvdConfig::new(a.rank).with_oversampling(a.samples.saturating_sub(a.rank));
    let pass1 = noise_config(a.noise, a.seed, "noise-pass1")?;
    let pass2 = noise_config(a.noise, a.seed, "noise-pass2")?;
    if let (Some(p1), Some(p2)) = (pass1, pass2) {
        cfg = cfg.with_noise(p1, p2);
    }
    let op = problem.operator()?;
    let out = learn_rsvd_with(op.as_ref(), problem.theta().unwrap_or(0.0), &f, &cfg)?;
    let mut manifest = ModelManifest::for_model(&out.model);
    manifest.problem = Some(problem.kind);
    manifest.lineage = json!({
        "kernel": kernel,
        "samples": a.samples,
        "seed": a.seed,
        "config": cfg,
        "diagnostics": out.diagnostics,
    });
    save(&a.out, &out.model, &manifest)
}

fn evaluate(a: &EvaluateArgs) -> Result<Value> {
    let (model, manifest) = load_model(&a.model)?;
    let mut result = json!({ "model": a.model, "theta": model.theta(), "rank": model.rank() });
    if let Some(kind) = manifest.problem {
        let problem = ProblemSpec::new(kind, model.grid().clone())?;
        if let Some(k) = problem.exact_kernel() {
            result["epsilon_percent"] = json!(relative_kernel_error(&model, &k)?);
        }
    }
    if let Some(path) = &a.reference {
        let (reference, _) = load_model(path)?;
        result["epsilon_vs_reference_percent"] = json!(relative_model_error(&model, &reference)?);
    }
    if let Some(path) = &a.data {
        let data = load_dataset(path)?;
        if data.manifest.noise.is_some() {
            log::warn!("test dataset responses carry noise");
        }
        let report = test_error(&model, &data.forcing, &data.responses)?;
        result["test_error_percent"] = json!(report.test_error.map(|e| 100.0 * e));
        result["excluded_samples"] = json!(report.excluded_samples);
    }
    Ok(result)
}

fn interpolate(a: &InterpolateArgs) -> Result<Value> {
    let mut knots = Vec::with_capacity(a.models.len());
    let mut problem = None;
    for path in &a.models {
        let (m, manifest) = load_model(path)?;
        problem = problem.or(manifest.problem);
        knots.push(m);
    }
    let set = InterpolationSet::new(knots, a.theta)?;
    let origin = set.knots()[select_origin(&set)].theta();
    let model = interpolate_egf(&set, a.scheme)?;
    let mut manifest = ModelManifest::for_model(&model);
    manifest.problem = problem.map(|k| k.with_theta(a.theta));
    manifest.interpolation = Some(InterpolationRecord {
        knot_thetas: set.thetas(),
        origin_theta: origin,
        scheme: a.scheme,
    });
    manifest.lineage = json!({ "knots": a.models });
    save(&a.out, &model, &manifest)
}

fn report(a: &ReportArgs) -> Result<Value> {
    let mut o = Overrides {
        theta: a.theta,
        sensors: a.sensors,
        samples: a.samples,
        rank: a.rank,
        length_scale: a.lengthscale,
        noise: a.noise,
        seed: a.seed,
        scheme: a.scheme,
        ..Overrides::default()
    };
    for kv in &a.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| {
            EgfError::InvalidArgument(format!("override `{kv}` is not KEY=VALUE"))
        })?;
        o.set(k, v)?;
    }
    let r = run_experiment(&a.recipe, &o)?;
    write_report(&a.out, &r)?;
    Ok(json!({ "report": a.out, "rows": r.rows }))
}

fn run(cli: &Cli) -> Result<Value> {
    match &cli.command {
        Command::Generate(a) => generate(a),
        Command::LearnPod(a) => learn_pod_cmd(a),
        Command::LearnRsvd(a) => learn_rsvd_cmd(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Interpolate(a) => interpolate(a),
        Command::Report(a) => report(a),
    }
}

fn fail(kind: &str, message: String, code: u8) -> ExitCode {
    eprintln!("{}", json!({ "error": kind, "message": message }));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => return fail("usage", e.to_string(), 2),
    };
    match run(&cli) {
        Ok(v) => {
            println!("{}", serde_json::to_string_pretty(&v).expect("json value"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), e.to_string(), 1),
    }
}
