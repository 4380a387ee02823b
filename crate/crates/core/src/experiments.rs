//! Named experiment recipes. Each recipe generates data, learns models,
//! evaluates them (and interpolates where applicable), and collects report
//! rows plus plot-ready data files.

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bundle::write_atomic;
use crate::egf::{relative_kernel_error, relative_model_error, test_error, EgfModel};
use crate::error::{EgfError, Result};
use crate::forcing::{ForcingEnsemble, GpSampler, KernelConfig};
use crate::grid::{
    make_disk_grid, make_interval_grid, make_periodic_grid, make_square_grid, Domain, SensorGrid,
};
use crate::interp::{interpolate_egf, InterpolationScheme, InterpolationSet};
use crate::learn_pod::learn_pod_ranks;
use crate::learn_rsvd::{learn_rsvd_with, RsvdConfig};
use crate::linalg::orthonormality_defect;
use crate::rng::derive_seed;
use crate::solvers::{
    add_noise, solve_ensemble, GreenKernel, NoiseConfig, ProblemKind, ProblemSpec,
    ResponseEnsemble,
};

pub const RECIPES: [&str; 17] = [
    "poisson1d-clean",
    "poisson1d-noisy",
    "helmholtz1d",
    "airy1d",
    "multiphysics1d",
    "table1",
    "helmholtz1d-modeswap",
    "sweep-nsamples",
    "sweep-lengthscale",
    "sweep-rank",
    "sweep-sensors",
    "poisson2d-disk",
    "airy-interp",
    "airy-extrap",
    "helmholtz2d-interp",
    "fraclap-interp",
    "fraclap1d",
];

/// Sweep points used when no `values` override is given.
pub const SWEEP_NSAMPLES: [f64; 10] = [
    25.0, 50.0, 100.0, 200.0, 300.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0,
];
pub const SWEEP_LENGTHSCALE: [f64; 5] = [0.04, 0.02, 0.01, 0.005, 0.0025];
pub const SWEEP_RANK: [f64; 11] = [
    5.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 80.0, 100.0, 150.0, 200.0,
];
pub const SWEEP_SENSORS: [f64; 6] = [250.0, 500.0, 1000.0, 1500.0, 2000.0, 3000.0];

/// Parameters that replace a recipe's defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub sensors: Option<usize>,
    /// Grid spacing of the 2D problems.
    pub spacing: Option<f64>,
    /// Training samples of the POD learner (and of swept learners).
    pub samples: Option<usize>,
    /// Training samples of the randomized SVD learner.
    pub rsvd_samples: Option<usize>,
    pub rank: Option<usize>,
    pub length_scale: Option<f64>,
    pub noise: Option<f64>,
    pub seed: Option<u64>,
    pub theta: Option<f64>,
    pub scheme: Option<InterpolationScheme>,
    /// Seeds averaged per sweep point.
    pub replicates: Option<usize>,
    pub test_samples: Option<usize>,
    /// Sweep points.
    pub values: Option<Vec<f64>>,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .trim()
        .parse()
        .map_err(|e| EgfError::InvalidArgument(format!("bad value `{value}` for `{key}`: {e}")))
}

impl Overrides {
    /// Sets one parameter from its textual form, e.g. `("rank", "50")`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key.replace('-', "_").as_str() {
            "sensors" => self.sensors = Some(parse(key, value)?),
            "spacing" => self.spacing = Some(parse(key, value)?),
            "samples" => self.samples = Some(parse(key, value)?),
            "rsvd_samples" => self.rsvd_samples = Some(parse(key, value)?),
            "rank" => self.rank = Some(parse(key, value)?),
            "length_scale" | "lengthscale" => self.length_scale = Some(parse(key, value)?),
            "noise" => self.noise = Some(parse(key, value)?),
            "seed" => self.seed = Some(parse(key, value)?),
            "theta" => self.theta = Some(parse(key, value)?),
            "scheme" => self.scheme = Some(parse(key, value)?),
            "replicates" => self.replicates = Some(parse(key, value)?),
            "test_samples" => self.test_samples = Some(parse(key, value)?),
            "values" => {
                self.values = Some(
                    value
                        .split(',')
                        .map(|v| parse(key, v))
                        .collect::<Result<_>>()?,
                )
            }
            _ => {
                return Err(EgfError::InvalidArgument(format!(
                    "unknown override `{key}`"
                )))
            }
        }
        Ok(())
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut o = Overrides::default();
        for (k, v) in pairs {
            o.set(k, v)?;
        }
        Ok(o)
    }
}

/// Everything needed to regenerate one report row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowParams {
    pub problem: ProblemKind,
    pub sensors: usize,
    pub samples: usize,
    pub rank: usize,
    pub oversampling: usize,
    pub length_scale: f64,
    pub noise: Option<f64>,
    /// Base seed of the row; training, test and noise seeds derive from it.
    pub seed: u64,
    pub train_seed: u64,
    pub test_seed: Option<u64>,
    pub test_samples: usize,
    /// One seed for POD, one per pass for the randomized SVD.
    pub noise_seeds: Vec<u64>,
    pub knots: Option<Vec<f64>>,
    pub scheme: Option<InterpolationScheme>,
    /// Number of seeds averaged; replicate `r` uses
    /// `derive_seed(seed, "replicate-{r}")` as its base seed.
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub method: String,
    pub theta: Option<f64>,
    /// Relative kernel error in percent, against the closed form or the
    /// target model.
    pub epsilon: Option<f64>,
    /// Test error in percent.
    pub test_error: Option<f64>,
    /// Informational only; excluded from reproducibility comparisons.
    pub wall_time_s: f64,
    /// `max |Φ^T W Φ - I|` of the model (largest over replicates).
    pub orthonormality_defect: f64,
    pub params: RowParams,
}

impl ReportRow {
    /// The row without its timing, for reproducibility checks.
    pub fn untimed(&self) -> ReportRow {
        ReportRow {
            wall_time_s: 0.0,
            ..self.clone()
        }
    }
}

/// A plot-ready table: a kernel heatmap, a slice, or an x–y series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DataFile {
    fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        DataFile {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Values of a named column.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub recipe: String,
    pub overrides: Overrides,
    pub rows: Vec<ReportRow>,
    #[serde(skip)]
    pub data: Vec<DataFile>,
}

impl ExperimentReport {
    pub fn row(&self, experiment: &str, method: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.experiment == experiment && r.method == method)
    }

    pub fn data_file(&self, name: &str) -> Option<&DataFile> {
        self.data.iter().find(|d| d.name == name)
    }
}

/// Runs a named recipe. Errors carry the recipe name.
pub fn run_experiment(recipe: &str, overrides: &Overrides) -> Result<ExperimentReport> {
    if !RECIPES.contains(&recipe) {
        return Err(EgfError::UnknownRecipe(recipe.to_string()));
    }
    let mut report = ExperimentReport {
        recipe: recipe.to_string(),
        overrides: overrides.clone(),
        rows: Vec::new(),
        data: Vec::new(),
    };
    run(recipe, overrides, &mut report).map_err(|e| EgfError::Recipe {
        recipe: recipe.to_string(),
        source: Box::new(e),
    })?;
    Ok(report)
}

/// Writes `report.csv`, `report.json` and `data/<name>.csv` under `dir`.
pub fn write_report(dir: &Path, report: &ExperimentReport) -> Result<()> {
    let data_dir = dir.join("data");
    std::fs::create_dir_all(&data_dir).map_err(|e| EgfError::io(&data_dir, e))?;

    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "experiment",
        "method",
        "problem",
        "theta",
        "epsilon_percent",
        "test_error_percent",
        "wall_time_s",
        "orthonormality_defect",
        "sensors",
        "samples",
        "rank",
        "oversampling",
        "length_scale",
        "noise",
        "seed",
        "train_seed",
        "test_seed",
        "test_samples",
        "noise_seeds",
        "knots",
        "scheme",
        "replicates",
    ];
    let path = dir.join("report.csv");
    let csv_err = |e: csv::Error| EgfError::InvalidArgument(format!("csv: {e}"));
    w.write_record(header).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let join = |v: &[f64]| {
        v.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(";")
    };
    for r in &report.rows {
        let p = &r.params;
        let record = [
            r.experiment.clone(),
            r.method.clone(),
            p.problem.name().to_string(),
            opt(r.theta),
            opt(r.epsilon),
            opt(r.test_error),
            format!("{:.3}", r.wall_time_s),
            format!("{:e}", r.orthonormality_defect),
            p.sensors.to_string(),
            p.samples.to_string(),
            p.rank.to_string(),
            p.oversampling.to_string(),
            p.length_scale.to_string(),
            opt(p.noise),
            p.seed.to_string(),
            p.train_seed.to_string(),
            p.test_seed.map(|s| s.to_string()).unwrap_or_default(),
            p.test_samples.to_string(),
            p.noise_seeds
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            p.knots.as_deref().map(join).unwrap_or_default(),
            p.scheme.map(|s| s.name().to_string()).unwrap_or_default(),
            p.replicates.to_string(),
        ];
        w.write_record(&record).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| EgfError::InvalidArgument(format!("csv: {e}")))?;
    write_atomic(&path, &bytes)?;

    let json = serde_json::json!({
        "recipe": report.recipe,
        "overrides": report.overrides,
        "rows": report.rows,
        "data_files": report.data.iter().map(|d| format!("data/{}.csv", d.name)).collect::<Vec<_>>(),
    });
    write_atomic(&dir.join("report.json"), serde_json::to_string_pretty(&json)?.as_bytes())?;

    for d in &report.data {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&d.columns).map_err(csv_err)?;
        for row in &d.rows {
            w.write_record(row.iter().map(|v| format!("{v:.10e}")))
                .map_err(csv_err)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| EgfError::InvalidArgument(format!("csv: {e}")))?;
        write_atomic(&data_dir.join(format!("{}.csv", d.name)), &bytes)?;
    }
    Ok(())
}

/// Resolved settings of one recipe run.
#[derive(Debug, Clone, Copy)]
struct Setup {
    sensors: usize,
    spacing: f64,
    samples: usize,
    rsvd_samples: usize,
    rank: usize,
    length_scale: f64,
    noise: Option<f64>,
    seed: u64,
    replicates: usize,
    test_samples: usize,
    scheme: InterpolationScheme,
}

impl Setup {
    fn defaults() -> Self {
        Setup {
            sensors: 2000,
            spacing: 0.05,
            samples: 2000,
            rsvd_samples: 100,
            rank: 100,
            length_scale: 5e-3,
            noise: None,
            seed: 1,
            replicates: 10,
            test_samples: 100,
            scheme: InterpolationScheme::FullLagrange,
        }
    }

    fn apply(mut self, o: &Overrides) -> Self {
        self.sensors = o.sensors.unwrap_or(self.sensors);
        self.spacing = o.spacing.unwrap_or(self.spacing);
        self.samples = o.samples.unwrap_or(self.samples);
        self.rsvd_samples = o.rsvd_samples.unwrap_or(self.rsvd_samples);
        self.rank = o.rank.unwrap_or(self.rank);
        self.length_scale = o.length_scale.unwrap_or(self.length_scale);
        self.noise = o.noise.or(self.noise);
        self.seed = o.seed.unwrap_or(self.seed);
        self.replicates = o.replicates.unwrap_or(self.replicates);
        self.test_samples = o.test_samples.unwrap_or(self.test_samples);
        self.scheme = o.scheme.unwrap_or(self.scheme);
        self
    }

    fn params(&self, problem: &ProblemSpec) -> RowParams {
        RowParams {
            problem: problem.kind,
            sensors: problem.grid.len(),
            samples: self.samples,
            rank: self.rank,
            oversampling: 0,
            length_scale: self.length_scale,
            noise: self.noise,
            seed: self.seed,
            train_seed: derive_seed(self.seed, "train"),
            test_seed: None,
            test_samples: 0,
            noise_seeds: Vec::new(),
            knots: None,
            scheme: None,
            replicates: 1,
        }
    }
}

/// The benchmark grid of a problem: `[0, 1]` with `sensors` points for the
/// 1D Dirichlet problems, `[-1, 1)` periodic for the fractional Laplacian,
/// and lattices of the given spacing for the disk and the square.
pub fn benchmark_grid(kind: ProblemKind, sensors: usize, spacing: f64) -> Result<SensorGrid> {
    match kind {
        ProblemKind::FractionalLaplacian1D { .. } => make_periodic_grid(-1.0, 1.0, sensors),
        ProblemKind::Poisson2DDisk => make_disk_grid(spacing),
        ProblemKind::Helmholtz2DSquare { .. } => {
            if !(spacing > 0.0 && spacing <= 0.5) {
                return Err(EgfError::InvalidArgument(format!(
                    "square spacing must be in (0, 0.5], got {spacing}"
                )));
            }
            make_square_grid((1.0 / spacing).round() as usize + 1)
        }
        _ => make_interval_grid(0.0, 1.0, sensors),
    }
}

fn grid_for(kind: ProblemKind, s: &Setup) -> Result<SensorGrid> {
    benchmark_grid(kind, s.sensors, s.spacing)
}

/// A problem together with its forcing sampler.
struct Bench {
    problem: ProblemSpec,
    sampler: GpSampler,
}

impl Bench {
    fn new(kind: ProblemKind, s: &Setup) -> Result<Self> {
        let grid = grid_for(kind, s)?;
        let sampler = GpSampler::new(&grid, &KernelConfig::squared_exponential(s.length_scale))?;
        Ok(Bench {
            problem: ProblemSpec::new(kind, grid)?,
            sampler,
        })
    }

    /// Same grid and sampler, different parameter.
    fn at(&self, theta: f64) -> Result<Bench> {
        Ok(Bench {
            problem: self.problem.with_theta(theta)?,
            sampler: self.sampler.clone(),
        })
    }

    fn test_set(&self, s: &Setup, seed: u64) -> Result<TestSet> {
        let f = self.sampler.sample(s.test_samples, derive_seed(seed, "test"))?;
        let e = solve_ensemble(&self.problem, &f)?;
        Ok(TestSet { f, e })
    }
}

struct TestSet {
    f: ForcingEnsemble,
    e: ResponseEnsemble,
}

fn learn_pod_at(b: &Bench, s: &Setup, seed: u64, ranks: &[usize]) -> Result<(Vec<EgfModel>, RowParams)> {
    let mut params = s.params(&b.problem);
    params.seed = seed;
    params.train_seed = derive_seed(seed, "train");
    let f = b.sampler.sample(s.samples, params.train_seed)?;
    let mut e = solve_ensemble(&b.problem, &f)?;
    if let Some(level) = s.noise {
        let ns = derive_seed(seed, "noise");
        e = add_noise(&e, NoiseConfig::new(level, ns)?)?;
        params.noise_seeds = vec![ns];
    }
    Ok((learn_pod_ranks(&f, &e, ranks)?, params))
}

fn learn_rsvd_at(b: &Bench, s: &Setup, seed: u64) -> Result<(EgfModel, RowParams)> {
    let mut params = s.params(&b.problem);
    params.seed = seed;
    params.train_seed = derive_seed(seed, "train");
    params.samples = s.rsvd_samples;
    params.oversampling = s.rsvd_samples.saturating_sub(s.rank);
    let f = b.sampler.sample(s.rsvd_samples, params.train_seed)?;
    let mut cfg = RsvdConfig::new(s.rank).with_oversampling(params.oversampling);
    if let Some(level) = s.noise {
        let (n1, n2) = (derive_seed(seed, "noise-pass1"), derive_seed(seed, "noise-pass2"));
        cfg = cfg.with_noise(NoiseConfig::new(level, n1)?, NoiseConfig::new(level, n2)?);
        params.noise_seeds = vec![n1, n2];
    }
    let op = b.problem.operator()?;
    let out = learn_rsvd_with(op.as_ref(), b.problem.theta().unwrap_or(0.0), &f, &cfg)?;
    Ok((out.model, params))
}

/// Scores a model against the closed-form kernel (if any) or a reference
/// model, and against a test set.
fn score(
    experiment: &str,
    method: &str,
    model: &EgfModel,
    problem: &ProblemSpec,
    reference: Option<&EgfModel>,
    test: Option<(&TestSet, u64)>,
    mut params: RowParams,
    started: Instant,
) -> Result<ReportRow> {
    let epsilon = match (reference, problem.exact_kernel()) {
        (Some(r), _) => Some(relative_model_error(model, r)?),
        (None, Some(k)) => Some(relative_kernel_error(model, &k)?),
        (None, None) => None,
    };
    let test_error = match test {
        Some((t, seed)) => {
            params.test_seed = Some(derive_seed(seed, "test"));
            params.test_samples = t.f.n_samples();
            test_error(model, &t.f, &t.e)?.test_error.map(|e| 100.0 * e)
        }
        None => None,
    };
    Ok(ReportRow {
        experiment: experiment.to_string(),
        method: method.to_string(),
        theta: problem.theta(),
        epsilon,
        test_error,
        wall_time_s: started.elapsed().as_secs_f64(),
        orthonormality_defect: orthonormality_defect(model.phi(), model.grid().weights()),
        params,
    })
}

/// Kernel values `G(x_i, x_j) = Σ_k φ_k(x_i) σ_k φ_k(x_j)`.
fn model_entry(m: &EgfModel, i: usize, j: usize) -> f64 {
    let phi = m.phi();
    m.sigma()
        .iter()
        .enumerate()
        .map(|(k, s)| phi[(i, k)] * s * phi[(j, k)])
        .sum()
}

const HEATMAP_POINTS: usize = 101;

fn heatmap_indices(n: usize) -> Vec<usize> {
    if n <= HEATMAP_POINTS {
        return (0..n).collect();
    }
    (0..HEATMAP_POINTS)
        .map(|i| (i * (n - 1) + (HEATMAP_POINTS - 1) / 2) / (HEATMAP_POINTS - 1))
        .collect()
}

/// Kernel plot data: a subsampled heatmap in 1D, and in 2D the slices
/// `G(x, 0)` and `G((x₁, 0), (s₁, 0))`.
fn kernel_plots(name: &str, grid: &SensorGrid, value: &dyn Fn(usize, usize) -> f64) -> Vec<DataFile> {
    if grid.dim() == 1 {
        let idx = heatmap_indices(grid.len());
        let mut d = DataFile::new(format!("{name}_heatmap"), &["x", "s", "g"]);
        for &i in &idx {
            for &j in &idx {
                d.rows.push(vec![grid.point(i)[0], grid.point(j)[0], value(i, j)]);
            }
        }
        return vec![d];
    }
    let centre = match grid.domain() {
        Domain::UnitSquare => [0.5, 0.5],
        _ => [0.0, 0.0],
    };
    let dist = |i: usize| {
        let p = grid.point(i);
        (p[0] - centre[0]).hypot(p[1] - centre[1])
    };
    let o = (0..grid.len())
        .min_by(|&a, &b| dist(a).total_cmp(&dist(b)))
        .unwrap_or(0);
    let mut slice = DataFile::new(format!("{name}_slice_point"), &["x1", "x2", "g"]);
    for i in 0..grid.len() {
        let p = grid.point(i);
        if i != o {
            slice.rows.push(vec![p[0], p[1], value(i, o)]);
        }
    }
    let line: Vec<usize> = (0..grid.len())
        .filter(|&i| (grid.point(i)[1] - grid.point(o)[1]).abs() < 1e-12)
        .collect();
    let mut axis = DataFile::new(format!("{name}_slice_axis"), &["x1", "s1", "g"]);
    for &i in &line {
        for &j in &line {
            if i != j {
                axis.rows.push(vec![grid.point(i)[0], grid.point(j)[0], value(i, j)]);
            }
        }
    }
    vec![slice, axis]
}

fn model_plots(name: &str, m: &EgfModel) -> Vec<DataFile> {
    kernel_plots(name, m.grid(), &|i, j| model_entry(m, i, j))
}

fn exact_plots(name: &str, problem: &ProblemSpec) -> Vec<DataFile> {
    match problem.exact_kernel() {
        Some(k) => kernel_plots(name, &problem.grid, &|i, j| {
            k.eval(problem.grid.point(i), problem.grid.point(j))
                .unwrap_or(f64::NAN)
        }),
        None => Vec::new(),
    }
}

fn sigma_series(name: &str, models: &[(&str, &EgfModel)]) -> DataFile {
    let mut cols = vec!["k"];
    cols.extend(models.iter().map(|(n, _)| *n));
    let mut d = DataFile::new(name, &cols);
    let rank = models.iter().map(|(_, m)| m.rank()).min().unwrap_or(0);
    for k in 0..rank {
        let mut row = vec![(k + 1) as f64];
        row.extend(models.iter().map(|(_, m)| m.sigma()[k]));
        d.rows.push(row);
    }
    d
}

fn run(recipe: &str, o: &Overrides, report: &mut ExperimentReport) -> Result<()> {
    let base = Setup::defaults();
    match recipe {
        "poisson1d-clean" => table_cell(report, "poisson1d-clean", ProblemKind::Poisson1D, base.apply(o), true),
        "poisson1d-noisy" => {
            let s = Setup { noise: Some(0.1), ..base }.apply(o);
            table_cell(report, "poisson1d-noisy", ProblemKind::Poisson1D, s, true)
        }
        "helmholtz1d" | "airy1d" | "multiphysics1d" | "fraclap1d" => {
            let kind = one_d_kind(recipe, o.theta)?;
            table_cell(report, recipe, kind, base.apply(o), true)
        }
        "table1" => {
            for (clean, label) in [(true, "clean"), (false, "noisy")] {
                for name in ["poisson1d", "helmholtz1d", "airy1d", "multiphysics1d"] {
                    let kind = one_d_kind(name, None)?;
                    let s = Setup {
                        noise: (!clean).then_some(0.1),
                        ..base
                    }
                    .apply(o);
                    table_cell(report, &format!("table1-{name}-{label}"), kind, s, false)?;
                }
            }
            Ok(())
        }
        "helmholtz1d-modeswap" => mode_swap(report, base.apply(o), o),
        "sweep-nsamples" | "sweep-lengthscale" | "sweep-rank" | "sweep-sensors" => {
            let s = Setup {
                length_scale: 0.0025,
                ..base
            }
            .apply(o);
            sweep(report, recipe, s, o.values.clone())
        }
        "poisson2d-disk" => {
            let s = Setup {
                length_scale: 0.2,
                rank: 200,
                rsvd_samples: 300,
                ..base
            }
            .apply(o);
            table_cell(report, recipe, ProblemKind::Poisson2DDisk, s, true)
        }
        "airy-interp" => interpolation(
            report,
            recipe,
            ProblemKind::Airy1D { theta: 7.0 },
            &[1.0, 5.0, 10.0],
            o.theta.unwrap_or(7.0),
            base.apply(o),
        ),
        "airy-extrap" => interpolation(
            report,
            recipe,
            ProblemKind::Airy1D { theta: 9.0 },
            &[6.0, 7.0, 8.0],
            o.theta.unwrap_or(9.0),
            base.apply(o),
        ),
        "fraclap-interp" => interpolation(
            report,
            recipe,
            ProblemKind::FractionalLaplacian1D { theta: 0.75 },
            &[0.6, 0.7, 0.8],
            o.theta.unwrap_or(0.75),
            base.apply(o),
        ),
        "helmholtz2d-interp" => {
            let s = Setup {
                spacing: 1.0 / 51.0,
                length_scale: 0.05,
                ..base
            }
            .apply(o);
            interpolation(
                report,
                recipe,
                ProblemKind::Helmholtz2DSquare { theta: 4.5 },
                &[4.2, 4.4, 4.6],
                o.theta.unwrap_or(4.5),
                s,
            )
        }
        _ => Err(EgfError::UnknownRecipe(recipe.to_string())),
    }
}

fn one_d_kind(name: &str, theta: Option<f64>) -> Result<ProblemKind> {
    Ok(match name {
        "poisson1d" => ProblemKind::Poisson1D,
        "helmholtz1d" => ProblemKind::Helmholtz1D {
            theta: theta.unwrap_or(15.0),
        },
        "airy1d" => ProblemKind::Airy1D {
            theta: theta.unwrap_or(7.0),
        },
        "multiphysics1d" => ProblemKind::MultiPhysics1D {
            theta: theta.unwrap_or(15.0),
        },
        "fraclap1d" => ProblemKind::FractionalLaplacian1D {
            theta: theta.unwrap_or(0.75),
        },
        other => return Err(EgfError::UnknownRecipe(other.to_string())),
    })
}

/// POD and randomized SVD on one problem, scored on a shared test set.
fn table_cell(
    report: &mut ExperimentReport,
    experiment: &str,
    kind: ProblemKind,
    s: Setup,
    plots: bool,
) -> Result<()> {
    let started = Instant::now();
    let b = Bench::new(kind, &s)?;
    let test = b.test_set(&s, s.seed)?;
    let setup_time = started.elapsed();

    let t = Instant::now() - setup_time;
    let (mut pods, params) = learn_pod_at(&b, &s, s.seed, &[s.rank])?;
    let pod = pods.remove(0);
    report.rows.push(score(experiment, "pod", &pod, &b.problem, None, Some((&test, s.seed)), params, t)?);

    let t = Instant::now() - setup_time;
    let (rsvd, params) = learn_rsvd_at(&b, &s, s.seed)?;
    report.rows.push(score(experiment, "rsvd", &rsvd, &b.problem, None, Some((&test, s.seed)), params, t)?);

    if plots {
        report.data.extend(model_plots(&format!("{experiment}_pod"), &pod));
        report.data.extend(model_plots(&format!("{experiment}_rsvd"), &rsvd));
        report.data.extend(exact_plots(&format!("{experiment}_exact"), &b.problem));
        report.data.push(sigma_series(
            &format!("{experiment}_sigma"),
            &[("pod", &pod), ("rsvd", &rsvd)],
        ));
    }
    Ok(())
}

/// Leading eigenvalues of learned Helmholtz models across the first
/// mode swap.
fn mode_swap(report: &mut ExperimentReport, s: Setup, o: &Overrides) -> Result<()> {
    let thetas: Vec<f64> = o
        .values
        .clone()
        .unwrap_or_else(|| (0..=16).map(|i| 3.0 + 0.25 * i as f64).collect());
    let b = Bench::new(ProblemKind::Helmholtz1D { theta: thetas[0] }, &s)?;
    let mut d = DataFile::new("modeswap_sigma", &["theta", "sigma1", "sigma2"]);
    for &theta in &thetas {
        let started = Instant::now();
        let bt = b.at(theta)?;
        let (m, params) = learn_rsvd_at(&bt, &s, s.seed)?;
        d.rows.push(vec![theta, m.sigma()[0], m.sigma()[1]]);
        report.rows.push(score("helmholtz1d-modeswap", "rsvd", &m, &bt.problem, None, None, params, started)?);
    }
    report.data.push(d);
    Ok(())
}

/// One panel of the hyperparameter study: POD on the 1D Poisson problem,
/// relative kernel error averaged over `replicates` seeds per point.
fn sweep(report: &mut ExperimentReport, recipe: &str, s: Setup, values: Option<Vec<f64>>) -> Result<()> {
    let (values, x_name): (Vec<f64>, &str) = match recipe {
        "sweep-nsamples" => (values.unwrap_or(SWEEP_NSAMPLES.to_vec()), "n_samples"),
        "sweep-lengthscale" => (values.unwrap_or(SWEEP_LENGTHSCALE.to_vec()), "length_scale"),
        "sweep-rank" => (values.unwrap_or(SWEEP_RANK.to_vec()), "rank"),
        _ => (values.unwrap_or(SWEEP_SENSORS.to_vec()), "n_sensors"),
    };
    if s.replicates == 0 {
        return Err(EgfError::InvalidArgument("replicates must be positive".into()));
    }
    let mut series = DataFile::new(
        recipe.replace('-', "_"),
        &[x_name, "epsilon_mean", "epsilon_std"],
    );
    let seeds: Vec<u64> = (0..s.replicates)
        .map(|r| derive_seed(s.seed, &format!("replicate-{r}")))
        .collect();

    if recipe == "sweep-rank" {
        // One SVD per seed serves every rank.
        let ranks: Vec<usize> = values.iter().map(|&v| v as usize).collect();
        let started = Instant::now();
        let b = Bench::new(ProblemKind::Poisson1D, &s)?;
        let mut errors = vec![Vec::new(); ranks.len()];
        let mut defect: f64 = 0.0;
        for &seed in &seeds {
            let (models, _) = learn_pod_at(&b, &s, seed, &ranks)?;
            let exact = b.problem.exact_kernel().expect("poisson kernel");
            for (k, m) in models.iter().enumerate() {
                errors[k].push(relative_kernel_error(m, &exact)?);
                defect = defect.max(orthonormality_defect(m.phi(), m.grid().weights()));
            }
        }
        let per_point = started.elapsed().as_secs_f64() / ranks.len() as f64;
        for (k, &rank) in ranks.iter().enumerate() {
            let st = Setup { rank, ..s };
            push_sweep_row(report, &mut series, recipe, rank as f64, &errors[k], per_point, defect, &st, &b.problem);
        }
        report.data.push(series);
        return Ok(());
    }

    let mut bench: Option<Bench> = None;
    for &v in &values {
        let started = Instant::now();
        let mut st = s;
        match recipe {
            "sweep-nsamples" => st.samples = v as usize,
            "sweep-lengthscale" => st.length_scale = v,
            _ => st.sensors = v as usize,
        }
        // Too few samples for the default rank: cap the rank.
        st.rank = st.rank.min(st.samples);
        if bench.is_none() || recipe != "sweep-nsamples" {
            bench = Some(Bench::new(ProblemKind::Poisson1D, &st)?);
        }
        let b = bench.as_ref().expect("bench built above");
        let exact = b.problem.exact_kernel().expect("poisson kernel");
        let mut errors = Vec::with_capacity(seeds.len());
        let mut defect: f64 = 0.0;
        for &seed in &seeds {
            let (m, _) = learn_pod_at(b, &st, seed, &[st.rank])?;
            errors.push(relative_kernel_error(&m[0], &exact)?);
            defect = defect.max(orthonormality_defect(m[0].phi(), m[0].grid().weights()));
        }
        let elapsed = started.elapsed().as_secs_f64();
        push_sweep_row(report, &mut series, recipe, v, &errors, elapsed, defect, &st, &b.problem);
    }
    report.data.push(series);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn push_sweep_row(
    report: &mut ExperimentReport,
    series: &mut DataFile,
    recipe: &str,
    x: f64,
    errors: &[f64],
    wall: f64,
    defect: f64,
    s: &Setup,
    problem: &ProblemSpec,
) {
    let n = errors.len() as f64;
    let mean = errors.iter().sum::<f64>() / n;
    let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
    series.rows.push(vec![x, mean, var.sqrt()]);
    let mut params = s.params(problem);
    params.replicates = errors.len();
    report.rows.push(ReportRow {
        experiment: recipe.to_string(),
        method: "pod".into(),
        theta: None,
        epsilon: Some(mean),
        test_error: None,
        wall_time_s: wall,
        orthonormality_defect: defect,
        params,
    });
}

/// Randomized SVD models at the knots and at the target (all from the same
/// forcings), interpolation to the target, and comparison against the model
/// learned there.
fn interpolation(
    report: &mut ExperimentReport,
    experiment: &str,
    kind: ProblemKind,
    knots: &[f64],
    target: f64,
    s: Setup,
) -> Result<()> {
    let started = Instant::now();
    let b = Bench::new(kind.with_theta(target), &s)?;
    let mut models = Vec::with_capacity(knots.len());
    for &theta in knots {
        let (m, _) = learn_rsvd_at(&b.at(theta)?, &s, s.seed)?;
        models.push(m);
    }
    let knot_time = started.elapsed();

    let t = Instant::now() - knot_time;
    let set = InterpolationSet::new(models.clone(), target)?;
    let interpolated = interpolate_egf(&set, s.scheme)?;
    let interp_time = t.elapsed();

    let t = Instant::now();
    let (reference, ref_params) = learn_rsvd_at(&b, &s, s.seed)?;
    let test = b.test_set(&s, s.seed)?;
    let test_time = t.elapsed();

    let mut params = ref_params.clone();
    params.knots = Some(knots.to_vec());
    params.scheme = Some(s.scheme);
    let mut row = score(
        experiment,
        "interpolated",
        &interpolated,
        &b.problem,
        Some(&reference),
        Some((&test, s.seed)),
        params,
        Instant::now(),
    )?;
    row.wall_time_s += (knot_time + interp_time).as_secs_f64();
    report.rows.push(row);

    let mut row = score(experiment, "rsvd-target", &reference, &b.problem, None, Some((&test, s.seed)), ref_params, Instant::now())?;
    row.wall_time_s += test_time.as_secs_f64();
    report.rows.push(row);

    for (theta, m) in knots.iter().zip(&models) {
        report.data.extend(model_plots(&format!("{experiment}_knot_{theta}"), m));
    }
    report.data.extend(model_plots(&format!("{experiment}_interpolated"), &interpolated));
    report.data.extend(model_plots(&format!("{experiment}_target"), &reference));
    let mut named: Vec<(String, &EgfModel)> = knots
        .iter()
        .zip(&models)
        .map(|(t, m)| (format!("knot_{t}"), m))
        .collect();
    named.push(("interpolated".into(), &interpolated));
    named.push(("target".into(), &reference));
    let refs: Vec<(&str, &EgfModel)> = named.iter().map(|(n, m)| (n.as_str(), *m)).collect();
    report.data.push(sigma_series(&format!("{experiment}_sigma"), &refs));
    Ok(())
}
