//! Fourier collocation for the periodic fractional Laplacian.

use std::f64::consts::PI;
use std::sync::Arc;

use faer::{Mat, MatRef};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{check_rows, ForwardOperator};
use crate::error::{EgfError, Result};
use crate::grid::{Domain, SensorGrid};

pub(crate) struct FractionalLaplacian {
    grid: SensorGrid,
    /// `|2πk/L|^(-2θ)` per FFT bin, zero for the mean.
    symbol: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FractionalLaplacian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FractionalLaplacian")
            .field("n", &self.symbol.len())
            .finish()
    }
}

impl FractionalLaplacian {
    /// Accepts any order `theta > 0`; the problem-level restriction to
    /// `(0, 1)` is enforced by `ProblemSpec`.
    pub(crate) fn new(grid: &SensorGrid, theta: f64) -> Result<Self> {
        let Domain::Periodic { a, b } = grid.domain() else {
            return Err(EgfError::InvalidArgument(
                "fractional Laplacian needs a periodic grid".into(),
            ));
        };
        if grid.uniform_spacing().is_none() {
            return Err(EgfError::InvalidArgument(
                "fractional Laplacian needs uniformly spaced sensors".into(),
            ));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(EgfError::InvalidArgument(format!(
                "fractional order must be positive, got {theta}"
            )));
        }
        let n = grid.len();
        let l = b - a;
        let symbol = (0..n)
            .map(|k| {
                let freq = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                if freq == 0.0 {
                    0.0
                } else {
                    (2.0 * PI * freq.abs() / l).powf(-2.0 * theta)
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(FractionalLaplacian {
            grid: grid.clone(),
            symbol,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    fn apply(&self, f: &[f64], buf: &mut Vec<Complex<f64>>, out: &mut [f64]) {
        let n = f.len();
        buf.clear();
        buf.extend(f.iter().map(|&v| Complex::new(v, 0.0)));
        self.forward.process(buf);
        for (c, s) in buf.iter_mut().zip(&self.symbol) {
            *c *= *s / n as f64;
        }
        self.inverse.process(buf);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.re;
        }
    }
}

impl ForwardOperator for FractionalLaplacian {
    fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    fn solve(&self, forcing: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(&self.grid, forcing)?;
        let n = forcing.nrows();
        let mut u = Mat::<f64>::zeros(n, forcing.ncols());
        let mut buf = Vec::with_capacity(n);
        let mut col = vec![0.0; n];
        let mut out = vec![0.0; n];
        for j in 0..forcing.ncols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = forcing[(i, j)];
            }
            self.apply(&col, &mut buf, &mut out);
            for (i, v) in out.iter().enumerate() {
                u[(i, j)] = *v;
            }
        }
        Ok(u)
    }
}

/// Mean-free solution of `(-Δ)^θ u = f - mean(f)` on a periodic grid, for
/// any order `theta > 0`.
pub fn fractional_laplacian_inverse(grid: &SensorGrid, theta: f64, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != grid.len() {
        return Err(EgfError::Shape(format!(
            "forcing has {} entries for {} sensors",
            f.len(),
            grid.len()
        )));
    }
    let op = FractionalLaplacian::new(grid, theta)?;
    let mut out = vec![0.0; f.len()];
    op.apply(f, &mut Vec::new(), &mut out);
    Ok(out)
}
