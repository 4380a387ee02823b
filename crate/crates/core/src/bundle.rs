//! On-disk dataset and model bundles: a directory with `manifest.json` and
//! plain numeric CSV files written with 17 significant digits so that values
//! round-trip bitwise.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::egf::{EgfModel, Provenance};
use crate::error::{EgfError, Result};
use crate::forcing::{ForcingEnsemble, KernelConfig};
use crate::grid::{Domain, SensorGrid};
use crate::interp::InterpolationScheme;
use crate::solvers::{NoiseConfig, ProblemKind, ProblemSpec, ResponseEnsemble};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const SENSORS: &str = "sensors.csv";
const WEIGHTS: &str = "weights.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub problem: ProblemKind,
    pub domain: Domain,
    pub kernel: KernelConfig,
    pub n_sensors: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub noise: Option<NoiseConfig>,
}

/// Forcings and responses of one problem instance.
#[derive(Debug, Clone)]
pub struct DatasetBundle {
    pub manifest: DatasetManifest,
    pub forcing: ForcingEnsemble,
    pub responses: ResponseEnsemble,
}

impl DatasetBundle {
    pub fn new(kernel: KernelConfig, forcing: ForcingEnsemble, responses: ResponseEnsemble) -> Result<Self> {
        if forcing.grid != *responses.grid() || forcing.columns.ncols() != responses.columns.ncols() {
            return Err(EgfError::Shape("forcings and responses do not pair up".into()));
        }
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            problem: responses.problem.kind,
            domain: forcing.grid.domain(),
            kernel,
            n_sensors: forcing.grid.len(),
            n_samples: forcing.columns.ncols(),
            seed: forcing.seed,
            noise: responses.noise_applied,
        };
        Ok(DatasetBundle {
            manifest,
            forcing,
            responses,
        })
    }

    pub fn grid(&self) -> &SensorGrid {
        &self.forcing.grid
    }
}

/// Parameter interpolation details of an interpolated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolationRecord {
    pub knot_thetas: Vec<f64>,
    pub origin_theta: f64,
    pub scheme: InterpolationScheme,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub theta: f64,
    pub rank: usize,
    pub provenance: Provenance,
    pub domain: Domain,
    pub n_sensors: usize,
    /// Problem the model was learned from, when known.
    pub problem: Option<ProblemKind>,
    pub interpolation: Option<InterpolationRecord>,
    /// Free-form lineage: seeds, sample counts, noise settings.
    #[serde(default)]
    pub lineage: serde_json::Value,
}

impl ModelManifest {
    pub fn for_model(model: &EgfModel) -> Self {
        ModelManifest {
            format_version: FORMAT_VERSION,
            theta: model.theta(),
            rank: model.rank(),
            provenance: model.provenance(),
            domain: model.grid().domain(),
            n_sensors: model.grid().len(),
            problem: None,
            interpolation: None,
            lineage: serde_json::Value::Null,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EgfError + '_ {
    move |e| EgfError::io(path, e)
}

fn corrupt(file: &Path, reason: impl Into<String>) -> EgfError {
    EgfError::CorruptBundle {
        file: file.to_path_buf(),
        reason: reason.into(),
    }
}

/// Writes `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
        file.write_all(bytes).map_err(io_err(&tmp))?;
        file.sync_all().map_err(io_err(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn matrix_csv(m: MatRef<'_, f64>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).map(|j| format!("{:.16e}", m[(i, j)])))
            .map_err(|e| EgfError::Numerical(format!("csv encoding failed: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| EgfError::Numerical(format!("csv encoding failed: {e}")))
}

pub fn write_matrix(path: &Path, m: MatRef<'_, f64>) -> Result<()> {
    write_atomic(path, &matrix_csv(m)?)
}

/// Reads a headerless numeric CSV, checking it is `rows × cols`.
pub fn read_matrix(path: &Path, rows: usize, cols: usize) -> Result<Mat<f64>> {
    let text = fs::read(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(text.as_slice());
    let mut data = Vec::with_capacity(rows * cols);
    let mut n_rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| corrupt(path, format!("row {i}: {e}")))?;
        if record.len() != cols {
            return Err(corrupt(
                path,
                format!("row {i} has {} columns, expected {rows} x {cols}", record.len()),
            ));
        }
        for field in record.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| corrupt(path, format!("row {i}: `{field}`: {e}")))?;
            data.push(v);
        }
        n_rows += 1;
    }
    if n_rows != rows {
        return Err(corrupt(path, format!("{n_rows} rows, expected {rows} x {cols}")));
    }
    Ok(Mat::from_fn(rows, cols, |i, j| data[i * cols + j]))
}

fn read_manifest<T: for<'de> Deserialize<'de>>(dir: &Path) -> Result<T> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| corrupt(&path, e.to_string()))?;
    match value.get("format_version").and_then(|v| v.as_u64()) {
        None => {
            return Err(EgfError::UnsupportedFormat(format!(
                "{} has no format_version",
                path.display()
            )))
        }
        Some(v) if v != u64::from(FORMAT_VERSION) => {
            return Err(EgfError::UnsupportedFormat(format!(
                "{} has format_version {v}, this build reads {FORMAT_VERSION}",
                path.display()
            )))
        }
        Some(_) => {}
    }
    serde_json::from_value(value).map_err(|e| corrupt(&path, e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn write_grid(dir: &Path, grid: &SensorGrid) -> Result<()> {
    let d = grid.dim();
    let coords = Mat::from_fn(grid.len(), d, |i, j| grid.coords()[i * d + j]);
    write_matrix(&dir.join(SENSORS), coords.as_ref())?;
    let w = Mat::from_fn(grid.len(), 1, |i, _| grid.weights()[i]);
    write_matrix(&dir.join(WEIGHTS), w.as_ref())
}

fn read_grid(dir: &Path, domain: Domain, n: usize) -> Result<SensorGrid> {
    let d = domain.dim();
    let coords = read_matrix(&dir.join(SENSORS), n, d)?;
    let weights = read_matrix(&dir.join(WEIGHTS), n, 1)?;
    let flat = (0..n).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| coords[(i, j)]).collect();
    SensorGrid::new(domain, flat, (0..n).map(|i| weights[(i, 0)]).collect())
        .map_err(|e| corrupt(&dir.join(SENSORS), e.to_string()))
}

pub fn save_dataset(dir: &Path, bundle: &DatasetBundle) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_grid(dir, bundle.grid())?;
    write_matrix(&dir.join("F.csv"), bundle.forcing.columns.as_ref())?;
    write_matrix(&dir.join("E.csv"), bundle.responses.columns.as_ref())?;
    write_json(&dir.join(MANIFEST), &bundle.manifest)
}

pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let manifest: DatasetManifest = read_manifest(dir)?;
    let (n, s) = (manifest.n_sensors, manifest.n_samples);
    let grid = read_grid(dir, manifest.domain, n)?;
    let f = read_matrix(&dir.join("F.csv"), n, s)?;
    let e = read_matrix(&dir.join("E.csv"), n, s)?;
    let problem = ProblemSpec::new(manifest.problem, grid.clone())
        .map_err(|err| corrupt(&dir.join(MANIFEST), err.to_string()))?;
    let forcing = ForcingEnsemble::new(grid, f, manifest.seed)?;
    let mut responses = ResponseEnsemble::new(problem, e)?;
    responses.noise_applied = manifest.noise;
    Ok(DatasetBundle {
        manifest,
        forcing,
        responses,
    })
}

pub fn save_model(dir: &Path, model: &EgfModel, manifest: &ModelManifest) -> Result<()> {
    if manifest.rank != model.rank() || manifest.n_sensors != model.grid().len() {
        return Err(EgfError::Shape("manifest does not describe the model".into()));
    }
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_grid(dir, model.grid())?;
    write_matrix(&dir.join("phi.csv"), model.phi())?;
    let sigma = Mat::from_fn(model.rank(), 1, |k, _| model.sigma()[k]);
    write_matrix(&dir.join("sigma.csv"), sigma.as_ref())?;
    write_json(&dir.join(MANIFEST), manifest)
}

pub fn load_model(dir: &Path) -> Result<(EgfModel, ModelManifest)> {
    let manifest: ModelManifest = read_manifest(dir)?;
    let (n, k) = (manifest.n_sensors, manifest.rank);
    let grid = read_grid(dir, manifest.domain, n)?;
    let phi = read_matrix(&dir.join("phi.csv"), n, k)?;
    let sigma = read_matrix(&dir.join("sigma.csv"), k, 1)?;
    let model = EgfModel::new(
        grid,
        phi,
        (0..k).map(|i| sigma[(i, 0)]).collect(),
        manifest.theta,
        manifest.provenance,
    )
    .map_err(|e| corrupt(&dir.join("phi.csv"), e.to_string()))?;
    Ok((model, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egf::tests::random_model;
    use crate::forcing::sample_gp;
    use crate::grid::{make_disk_grid, make_interval_grid};
    use crate::solvers::{add_noise, solve_ensemble};

    fn dataset() -> DatasetBundle {
        let g = make_interval_grid(0.0, 1.0, 30).unwrap();
        let kernel = KernelConfig::squared_exponential(0.1);
        let f = sample_gp(&g, &kernel, 7, 42).unwrap();
        let p = ProblemSpec::new(ProblemKind::Helmholtz1D { theta: 3.0 }, g).unwrap();
        let e = solve_ensemble(&p, &f).unwrap();
        let e = add_noise(&e, NoiseConfig { level: 0.1, seed: 3 }).unwrap();
        DatasetBundle::new(kernel, f, e).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let b = dataset();
        save_dataset(dir.path(), &b).unwrap();
        let back = load_dataset(dir.path()).unwrap();
        assert_eq!(back.forcing.columns, b.forcing.columns);
        assert_eq!(back.responses.columns, b.responses.columns);
        assert_eq!(back.grid(), b.grid());
        assert_eq!(back.manifest, b.manifest);
        assert_eq!(back.responses.noise_applied, b.responses.noise_applied);
        assert!(!dir.path().join("F.csv.tmp").exists());
    }

    #[test]
    fn model_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_disk_grid(0.25).unwrap();
        let m = random_model(&g, 4, 9);
        let mut manifest = ModelManifest::for_model(&m);
        manifest.interpolation = Some(InterpolationRecord {
            knot_thetas: vec![1.0, 2.0],
            origin_theta: 1.0,
            scheme: InterpolationScheme::FullLagrange,
        });
        manifest.lineage = serde_json::json!({ "seed": 5 });
        save_model(dir.path(), &m, &manifest).unwrap();
        let (back, bm) = load_model(dir.path()).unwrap();
        assert_eq!(back.phi(), m.phi());
        assert_eq!(back.sigma(), m.sigma());
        assert_eq!(back.grid(), m.grid());
        assert_eq!(bm, manifest);
    }

    #[test]
    fn truncated_matrix_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &dataset()).unwrap();
        let path = dir.path().join("E.csv");
        let text = fs::read_to_string(&path).unwrap();
        let cut: String = text.lines().take(20).map(|l| format!("{l}\n")).collect();
        fs::write(&path, cut).unwrap();
        match load_dataset(dir.path()) {
            Err(EgfError::CorruptBundle { file, reason }) => {
                assert!(file.ends_with("E.csv"));
                assert!(reason.contains("30 x 7"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
        // a half-written last line
        fs::write(&path, &text[..text.len() - 40]).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(EgfError::CorruptBundle { .. })));
    }

    #[test]
    fn missing_version_is_unsupported() {
        let dir = tempfile::tempdir().unwrap();
        save_dataset(dir.path(), &dataset()).unwrap();
        let path = dir.path().join(MANIFEST);
        let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        v.as_object_mut().unwrap().remove("format_version");
        fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(EgfError::UnsupportedFormat(_))));
        v["format_version"] = serde_json::json!(99);
        fs::write(&path, v.to_string()).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(EgfError::UnsupportedFormat(_))));
    }
}
