//! Forward oracles: the benchmark operators that turn forcings into
//! responses, their closed-form kernels where known, and the noise model.

mod kernels;
mod noise;
mod onedim;
mod spectral;
mod square;
pub mod tridiag;

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{EgfError, Result};
use crate::forcing::ForcingEnsemble;
use crate::grid::{Domain, SensorGrid};
use crate::linalg::scale_rows;

pub use kernels::{ExactKernel, GreenKernel};
pub use noise::{add_noise, perturb, NoiseConfig};
pub use spectral::fractional_laplacian_inverse;

/// Relative distance to a discrete eigenvalue below which a Helmholtz-type
/// operator is declared resonant.
pub const RESONANCE_TOL: f64 = 1e-6;

/// The benchmark operators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ProblemKind {
    /// `-u'' = f`, homogeneous Dirichlet.
    #[serde(rename = "poisson1d")]
    Poisson1D,
    /// `u'' + θ² u = f`, homogeneous Dirichlet.
    #[serde(rename = "helmholtz1d")]
    Helmholtz1D { theta: f64 },
    /// `u'' - θ² x u = f`, homogeneous Dirichlet.
    #[serde(rename = "airy1d")]
    Airy1D { theta: f64 },
    /// `½(u'' + θ² u) = f` on `(a, 1/4)`, `-u'' = f` on `(1/4, b)`, with
    /// `u` vanishing at both ends and at `x = 1/4`.
    #[serde(rename = "multiphysics1d")]
    MultiPhysics1D { theta: f64 },
    /// `(-Δ)^θ u = f`, periodic, mean-free.
    #[serde(rename = "fractional-laplacian1d")]
    FractionalLaplacian1D { theta: f64 },
    /// `∇²u = f` on the unit disk, homogeneous Dirichlet.
    #[serde(rename = "poisson2d-disk")]
    Poisson2DDisk,
    /// `∇²u + θ² u = f` on the unit square, homogeneous Dirichlet.
    #[serde(rename = "helmholtz2d-square")]
    Helmholtz2DSquare { theta: f64 },
}

impl ProblemKind {
    pub const NAMES: [&'static str; 7] = [
        "poisson1d",
        "helmholtz1d",
        "airy1d",
        "multiphysics1d",
        "fractional-laplacian1d",
        "poisson2d-disk",
        "helmholtz2d-square",
    ];

    /// Builds a kind from its name; `theta` is ignored by parameter-free kinds.
    pub fn from_name(name: &str, theta: f64) -> Result<Self> {
        Ok(match name {
            "poisson1d" => ProblemKind::Poisson1D,
            "helmholtz1d" => ProblemKind::Helmholtz1D { theta },
            "airy1d" => ProblemKind::Airy1D { theta },
            "multiphysics1d" => ProblemKind::MultiPhysics1D { theta },
            "fractional-laplacian1d" => ProblemKind::FractionalLaplacian1D { theta },
            "poisson2d-disk" => ProblemKind::Poisson2DDisk,
            "helmholtz2d-square" => ProblemKind::Helmholtz2DSquare { theta },
            other => {
                return Err(EgfError::InvalidArgument(format!(
                    "unknown problem `{other}`; expected one of {:?}",
                    Self::NAMES
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Poisson1D => "poisson1d",
            ProblemKind::Helmholtz1D { .. } => "helmholtz1d",
            ProblemKind::Airy1D { .. } => "airy1d",
            ProblemKind::MultiPhysics1D { .. } => "multiphysics1d",
            ProblemKind::FractionalLaplacian1D { .. } => "fractional-laplacian1d",
            ProblemKind::Poisson2DDisk => "poisson2d-disk",
            ProblemKind::Helmholtz2DSquare { .. } => "helmholtz2d-square",
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            ProblemKind::Poisson1D | ProblemKind::Poisson2DDisk => None,
            ProblemKind::Helmholtz1D { theta }
            | ProblemKind::Airy1D { theta }
            | ProblemKind::MultiPhysics1D { theta }
            | ProblemKind::FractionalLaplacian1D { theta }
            | ProblemKind::Helmholtz2DSquare { theta } => Some(theta),
        }
    }

    /// Same operator family at a different parameter value.
    pub fn with_theta(&self, theta: f64) -> Self {
        match self {
            ProblemKind::Poisson1D | ProblemKind::Poisson2DDisk => *self,
            ProblemKind::Helmholtz1D { .. } => ProblemKind::Helmholtz1D { theta },
            ProblemKind::Airy1D { .. } => ProblemKind::Airy1D { theta },
            ProblemKind::MultiPhysics1D { .. } => ProblemKind::MultiPhysics1D { theta },
            ProblemKind::FractionalLaplacian1D { .. } => {
                ProblemKind::FractionalLaplacian1D { theta }
            }
            ProblemKind::Helmholtz2DSquare { .. } => ProblemKind::Helmholtz2DSquare { theta },
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.theta() {
            Some(theta) => write!(f, "{}(theta={theta})", self.name()),
            None => f.write_str(self.name()),
        }
    }
}

impl FromStr for ProblemKind {
    type Err = EgfError;

    /// Parses `name` or `name:theta`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, theta) = match s.split_once(':') {
            Some((n, t)) => (
                n,
                t.parse::<f64>()
                    .map_err(|e| EgfError::InvalidArgument(format!("bad theta `{t}`: {e}")))?,
            ),
            None => (s, 0.0),
        };
        ProblemKind::from_name(name, theta)
    }
}

/// An operator family at a fixed parameter, discretized on a sensor grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub grid: SensorGrid,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, grid: SensorGrid) -> Result<Self> {
        if let Some(theta) = kind.theta() {
            if !theta.is_finite() {
                return Err(EgfError::InvalidArgument(format!("theta must be finite, got {theta}")));
            }
        }
        let domain = grid.domain();
        let fits = match kind {
            ProblemKind::Poisson1D
            | ProblemKind::Helmholtz1D { .. }
            | ProblemKind::Airy1D { .. }
            | ProblemKind::MultiPhysics1D { .. } => {
                matches!(domain, Domain::Interval { .. }) && grid.uniform_spacing().is_some()
            }
            ProblemKind::FractionalLaplacian1D { .. } => {
                matches!(domain, Domain::Periodic { .. }) && grid.uniform_spacing().is_some()
            }
            ProblemKind::Poisson2DDisk => domain == Domain::UnitDisk,
            ProblemKind::Helmholtz2DSquare { .. } => domain == Domain::UnitSquare,
        };
        if !fits {
            return Err(EgfError::InvalidArgument(format!(
                "{} needs a {} grid, got {domain:?}",
                kind.name(),
                match kind {
                    ProblemKind::FractionalLaplacian1D { .. } => "uniform periodic",
                    ProblemKind::Poisson2DDisk => "unit-disk",
                    ProblemKind::Helmholtz2DSquare { .. } => "unit-square",
                    _ => "uniform interval",
                }
            )));
        }
        if let ProblemKind::FractionalLaplacian1D { theta } = kind {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(EgfError::InvalidArgument(format!(
                    "fractional order must lie in (0, 1), got {theta}"
                )));
            }
        }
        if let ProblemKind::MultiPhysics1D { .. } = kind {
            onedim::interface_index(&grid)?;
        }
        if let ProblemKind::Helmholtz2DSquare { .. } = kind {
            square::lattice_size(&grid)?;
        }
        Ok(ProblemSpec { kind, grid })
    }

    pub fn theta(&self) -> Option<f64> {
        self.kind.theta()
    }

    /// Same grid, different parameter.
    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        ProblemSpec::new(self.kind.with_theta(theta), self.grid.clone())
    }

    /// Prepares the discrete solution operator (factorizations, transforms).
    pub fn operator(&self) -> Result<Box<dyn ForwardOperator>> {
        Ok(match self.kind {
            ProblemKind::Poisson1D
            | ProblemKind::Helmholtz1D { .. }
            | ProblemKind::Airy1D { .. }
            | ProblemKind::MultiPhysics1D { .. } => {
                Box::new(onedim::FiniteDifference1D::new(self)?)
            }
            ProblemKind::FractionalLaplacian1D { theta } => {
                Box::new(spectral::FractionalLaplacian::new(&self.grid, theta)?)
            }
            ProblemKind::Poisson2DDisk => Box::new(disk_operator(&self.grid)),
            ProblemKind::Helmholtz2DSquare { theta } => {
                Box::new(square::SquareHelmholtz::new(&self.grid, theta)?)
            }
        })
    }

    /// The closed-form Green's kernel, when one is known.
    pub fn exact_kernel(&self) -> Option<ExactKernel> {
        exact_kernel(self)
    }
}

/// A discrete solution operator `f ↦ u`.
pub trait ForwardOperator: Send + Sync {
    fn grid(&self) -> &SensorGrid;

    /// Responses to every column of `forcing` (sensors × samples).
    fn solve(&self, forcing: MatRef<'_, f64>) -> Result<Mat<f64>>;
}

/// An explicit operator matrix, `u = M f`.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    grid: SensorGrid,
    matrix: Mat<f64>,
}

impl DenseOperator {
    pub fn new(grid: SensorGrid, matrix: Mat<f64>) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(EgfError::Shape(format!(
                "operator is {} x {} on a grid of {} sensors",
                matrix.nrows(),
                matrix.ncols(),
                grid.len()
            )));
        }
        Ok(DenseOperator { grid, matrix })
    }

    /// Operator of a sampled Green's kernel: `u = G W f`.
    pub fn from_green(grid: SensorGrid, green: MatRef<'_, f64>) -> Result<Self> {
        let w = grid.weights().to_vec();
        let gw = scale_rows(green.transpose(), &w).transpose().to_owned();
        DenseOperator::new(grid, gw)
    }

    pub fn matrix(&self) -> MatRef<'_, f64> {
        self.matrix.as_ref()
    }
}

impl ForwardOperator for DenseOperator {
    fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    fn solve(&self, forcing: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(&self.grid, forcing)?;
        Ok(self.matrix.as_ref() * forcing)
    }
}

/// Disk responses by quadrature against the exact kernel, `u_i = Σ_{j≠i}
/// w_j G(x_i, x_j) f_j`.
fn disk_operator(grid: &SensorGrid) -> DenseOperator {
    let kernel = ExactKernel::PoissonDisk;
    let w = grid.weights();
    let m = Mat::from_fn(grid.len(), grid.len(), |i, j| {
        if i == j {
            0.0
        } else {
            w[j] * kernel.eval(grid.point(i), grid.point(j)).unwrap_or(0.0)
        }
    });
    DenseOperator {
        grid: grid.clone(),
        matrix: m,
    }
}

pub(crate) fn check_rows(grid: &SensorGrid, forcing: MatRef<'_, f64>) -> Result<()> {
    if forcing.nrows() != grid.len() {
        return Err(EgfError::Shape(format!(
            "forcing has {} rows for {} sensors",
            forcing.nrows(),
            grid.len()
        )));
    }
    Ok(())
}

/// Response matrix `E` together with the problem that produced it.
#[derive(Debug, Clone)]
pub struct ResponseEnsemble {
    pub problem: ProblemSpec,
    pub columns: Mat<f64>,
    pub noise_applied: Option<NoiseConfig>,
}

impl ResponseEnsemble {
    pub fn new(problem: ProblemSpec, columns: Mat<f64>) -> Result<Self> {
        if columns.nrows() != problem.grid.len() {
            return Err(EgfError::Shape(format!(
                "responses have {} rows for {} sensors",
                columns.nrows(),
                problem.grid.len()
            )));
        }
        Ok(ResponseEnsemble {
            problem,
            columns,
            noise_applied: None,
        })
    }

    pub fn grid(&self) -> &SensorGrid {
        &self.problem.grid
    }

    pub fn n_samples(&self) -> usize {
        self.columns.ncols()
    }
}

/// Solves the problem for every forcing column.
pub fn solve_ensemble(problem: &ProblemSpec, forcing: &ForcingEnsemble) -> Result<ResponseEnsemble> {
    if forcing.grid != problem.grid {
        return Err(EgfError::Shape(
            "forcing ensemble and problem live on different grids".into(),
        ));
    }
    let op = problem.operator()?;
    let columns = op.solve(forcing.columns.as_ref())?;
    ResponseEnsemble::new(problem.clone(), columns)
}

/// Closed-form kernel for the 1D Poisson, 1D Helmholtz and disk Poisson
/// problems.
pub fn exact_kernel(problem: &ProblemSpec) -> Option<ExactKernel> {
    match (problem.kind, problem.grid.domain()) {
        (ProblemKind::Poisson1D, Domain::Interval { a, b }) => {
            Some(ExactKernel::Poisson1D { a, b })
        }
        (ProblemKind::Helmholtz1D { theta }, Domain::Interval { a, b }) => {
            Some(ExactKernel::Helmholtz1D { a, b, theta })
        }
        (ProblemKind::Poisson2DDisk, _) => Some(ExactKernel::PoissonDisk),
        _ => None,
    }
}

/// Index of the entry of `values` nearest to `target` and its distance.
pub(crate) fn nearest(values: impl Iterator<Item = f64>, target: f64) -> (f64, f64) {
    values
        .map(|v| (v, (v - target).abs()))
        .fold((f64::NAN, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// Rejects `theta²` lying within [`RESONANCE_TOL`] (relative) of one of the
/// given discrete Dirichlet eigenvalues.
pub(crate) fn check_resonance(theta: f64, eigenvalues: impl Iterator<Item = f64>) -> Result<()> {
    let t2 = theta * theta;
    let (lambda, dist) = nearest(eigenvalues, t2);
    if lambda.is_finite() && dist <= RESONANCE_TOL * lambda.abs() {
        return Err(EgfError::Resonance {
            theta,
            nearest: lambda.sqrt(),
        });
    }
    Ok(())
}
