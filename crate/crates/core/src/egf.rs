//! The low-rank empirical Green's function `G ≈ Φ Σ Φ^T` and its error
//! metrics.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{EgfError, Result};
use crate::forcing::ForcingEnsemble;
use crate::grid::SensorGrid;
use crate::linalg::{col_vec, orthonormality_defect, scale_rows};
use crate::solvers::{GreenKernel, ResponseEnsemble};

/// Largest grid for which a dense `N × N` kernel may be formed.
pub const DENSIFY_LIMIT: usize = 10_000;

/// Tolerance on `max |Φ^T W Φ - I|` accepted by [`EgfModel::new`].
pub const ORTHONORMALITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Pod,
    RandomizedSvd,
    Interpolated,
}

/// `G = Φ diag(σ) Φ^T` with W-orthonormal columns of `Φ`, so that the response
/// to `f` is `Φ diag(σ) Φ^T W f`.
#[derive(Debug, Clone)]
pub struct EgfModel {
    grid: SensorGrid,
    phi: Mat<f64>,
    sigma: Vec<f64>,
    theta: f64,
    provenance: Provenance,
}

impl EgfModel {
    /// Checks shapes and W-orthonormality. Mode order is left as given; see
    /// [`EgfModel::sorted`].
    pub fn new(
        grid: SensorGrid,
        phi: Mat<f64>,
        sigma: Vec<f64>,
        theta: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if phi.nrows() != grid.len() || phi.ncols() != sigma.len() {
            return Err(EgfError::Shape(format!(
                "phi is {} x {} with {} coefficients on {} sensors",
                phi.nrows(),
                phi.ncols(),
                sigma.len(),
                grid.len()
            )));
        }
        if let Some(k) = sigma.iter().position(|s| !s.is_finite()) {
            return Err(EgfError::Numerical(format!("coefficient {k} is not finite")));
        }
        let defect = orthonormality_defect(phi.as_ref(), grid.weights());
        if !(defect <= ORTHONORMALITY_TOL) {
            return Err(EgfError::Numerical(format!(
                "modes are not W-orthonormal (defect {defect:e})"
            )));
        }
        Ok(EgfModel {
            grid,
            phi,
            sigma,
            theta,
            provenance,
        })
    }

    pub fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    pub fn phi(&self) -> MatRef<'_, f64> {
        self.phi.as_ref()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Modes reordered by descending `|σ|`; ties keep their current order.
    pub fn sorted(self) -> Self {
        let mut order: Vec<usize> = (0..self.rank()).collect();
        order.sort_by(|&a, &b| self.sigma[b].abs().total_cmp(&self.sigma[a].abs()));
        self.permuted(&order)
    }

    /// Model whose mode `k` is mode `order[k]` of `self`.
    pub(crate) fn permuted(&self, order: &[usize]) -> Self {
        EgfModel {
            grid: self.grid.clone(),
            phi: Mat::from_fn(self.phi.nrows(), order.len(), |i, k| self.phi[(i, order[k])]),
            sigma: order.iter().map(|&k| self.sigma[k]).collect(),
            theta: self.theta,
            provenance: self.provenance,
        }
    }

    pub(crate) fn with_phi(&self, phi: Mat<f64>) -> Self {
        EgfModel {
            phi,
            ..self.clone()
        }
    }

    pub fn is_sorted(&self) -> bool {
        self.sigma.windows(2).all(|w| w[0].abs() >= w[1].abs())
    }

    /// `Φ diag(σ) Φ^T W f`, never forming `G`.
    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        if f.len() != self.grid.len() {
            return Err(EgfError::Shape(format!(
                "forcing has {} entries for {} sensors",
                f.len(),
                self.grid.len()
            )));
        }
        let fm = Mat::from_fn(f.len(), 1, |i, _| f[i]);
        Ok(col_vec(self.apply_matrix(fm.as_ref())?.as_ref(), 0))
    }

    /// Applies the model to every column of `f`.
    pub fn apply_matrix(&self, f: MatRef<'_, f64>) -> Result<Mat<f64>> {
        if f.nrows() != self.grid.len() {
            return Err(EgfError::Shape(format!(
                "forcing has {} rows for {} sensors",
                f.nrows(),
                self.grid.len()
            )));
        }
        let wf = scale_rows(f, self.grid.weights());
        let c = self.phi.transpose() * wf.as_ref();
        let sc = scale_rows(c.as_ref(), &self.sigma);
        Ok(self.phi.as_ref() * sc.as_ref())
    }

    /// The dense kernel matrix `Φ diag(σ) Φ^T`.
    pub fn densify(&self) -> Result<Mat<f64>> {
        let n = self.grid.len();
        if n > DENSIFY_LIMIT {
            return Err(EgfError::TooLarge {
                n,
                limit: DENSIFY_LIMIT,
            });
        }
        let ps = Mat::from_fn(n, self.rank(), |i, k| self.phi[(i, k)] * self.sigma[k]);
        let mut g = ps.as_ref() * self.phi.transpose();
        // symmetrize away rounding in the product
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (g[(i, j)] + g[(j, i)]);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        Ok(g)
    }
}

/// `100 * ‖A - B‖ / ‖B‖` in the discrete `L²(Ω × Ω)` norm with weights
/// `w_i w_j`, optionally skipping the diagonal.
pub fn weighted_relative_difference(
    a: MatRef<'_, f64>,
    b: MatRef<'_, f64>,
    w: &[f64],
    skip_diagonal: bool,
) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for j in 0..b.ncols() {
        for i in 0..b.nrows() {
            if skip_diagonal && i == j {
                continue;
            }
            let ww = w[i] * w[j];
            num += ww * (a[(i, j)] - b[(i, j)]).powi(2);
            den += ww * b[(i, j)].powi(2);
        }
    }
    100.0 * (num / den).sqrt()
}

/// Samples `G(x_i, x_j)` on the grid; the diagonal is left at zero for
/// kernels with a pole.
pub fn sample_kernel(grid: &SensorGrid, kernel: &dyn GreenKernel) -> Result<Mat<f64>> {
    let n = grid.len();
    if n > DENSIFY_LIMIT {
        return Err(EgfError::TooLarge {
            n,
            limit: DENSIFY_LIMIT,
        });
    }
    let mut g = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i == j && kernel.has_pole() {
                continue;
            }
            g[(i, j)] = kernel.eval(grid.point(i), grid.point(j))?;
        }
    }
    Ok(g)
}

/// Relative kernel error `ε` in percent against a closed-form kernel.
pub fn relative_kernel_error(model: &EgfModel, exact: &dyn GreenKernel) -> Result<f64> {
    let g = model.densify()?;
    let reference = sample_kernel(model.grid(), exact)?;
    Ok(weighted_relative_difference(
        g.as_ref(),
        reference.as_ref(),
        model.grid().weights(),
        exact.has_pole(),
    ))
}

/// Relative kernel error in percent of `model` against another model on the
/// same grid.
pub fn relative_model_error(model: &EgfModel, reference: &EgfModel) -> Result<f64> {
    if model.grid() != reference.grid() {
        return Err(EgfError::Shape("models live on different grids".into()));
    }
    let g = model.densify()?;
    let r = reference.densify()?;
    Ok(weighted_relative_difference(
        g.as_ref(),
        r.as_ref(),
        model.grid().weights(),
        false,
    ))
}

/// Kernel and test errors of a model. `test_error` is a fraction; the
/// kernel error is in percent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub relative_kernel_error: Option<f64>,
    pub test_error: Option<f64>,
    pub per_sample_errors: Vec<f64>,
    /// Test responses skipped because their norm is zero.
    pub excluded_samples: usize,
}

/// Mean relative `L²(Ω)` error of the model's predictions over a test set.
pub fn test_error(
    model: &EgfModel,
    test_f: &ForcingEnsemble,
    test_e: &ResponseEnsemble,
) -> Result<ErrorReport> {
    if test_f.columns.ncols() != test_e.columns.ncols()
        || test_f.columns.nrows() != model.grid().len()
        || test_e.columns.nrows() != model.grid().len()
    {
        return Err(EgfError::Shape(format!(
            "test set is {} x {} forcings / {} x {} responses for a model on {} sensors",
            test_f.columns.nrows(),
            test_f.columns.ncols(),
            test_e.columns.nrows(),
            test_e.columns.ncols(),
            model.grid().len()
        )));
    }
    let pred = model.apply_matrix(test_f.columns.as_ref())?;
    let grid = model.grid();
    let mut per_sample = Vec::with_capacity(pred.ncols());
    let mut excluded = 0;
    for j in 0..pred.ncols() {
        let u = col_vec(test_e.columns.as_ref(), j);
        let norm = grid.norm(&u);
        if norm == 0.0 {
            excluded += 1;
            continue;
        }
        let diff: Vec<f64> = (0..u.len()).map(|i| pred[(i, j)] - u[i]).collect();
        per_sample.push(grid.norm(&diff) / norm);
    }
    if excluded > 0 {
        log::warn!("{excluded} zero-norm test responses excluded from the test error");
    }
    let test_error = (!per_sample.is_empty())
        .then(|| per_sample.iter().sum::<f64>() / per_sample.len() as f64);
    Ok(ErrorReport {
        relative_kernel_error: None,
        test_error,
        per_sample_errors: per_sample,
        excluded_samples: excluded,
    })
}
