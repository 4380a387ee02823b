//! Five-point Helmholtz operator on the unit square, diagonalized by the
//! type-I discrete sine transform.

use std::f64::consts::PI;

use faer::{Mat, MatRef};

use super::{check_resonance, check_rows, ForwardOperator};
use crate::error::{EgfError, Result};
use crate::grid::{make_square_grid, SensorGrid};

/// Interior nodes per side, after checking the grid is the standard lattice.
pub(crate) fn lattice_size(grid: &SensorGrid) -> Result<usize> {
    let m = (grid.len() as f64).sqrt().round() as usize;
    let reference = make_square_grid(m + 2)?;
    let same = m * m == grid.len()
        && reference
            .coords()
            .iter()
            .zip(grid.coords())
            .all(|(a, b)| (a - b).abs() <= 1e-12);
    if !same {
        return Err(EgfError::InvalidArgument(
            "square problems need the interior nodes of a uniform lattice".into(),
        ));
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub(crate) struct SquareHelmholtz {
    grid: SensorGrid,
    m: usize,
    sine: Mat<f64>,
    /// `1 / (θ² - μ_p - μ_q)`, with the transform normalization folded in.
    inverse_symbol: Mat<f64>,
}

impl SquareHelmholtz {
    pub(crate) fn new(grid: &SensorGrid, theta: f64) -> Result<Self> {
        let m = lattice_size(grid)?;
        let h = 1.0 / (m + 1) as f64;
        let mu: Vec<f64> = (1..=m)
            .map(|k| 4.0 / (h * h) * (k as f64 * PI / (2.0 * (m + 1) as f64)).sin().powi(2))
            .collect();
        check_resonance(theta, mu.iter().flat_map(|a| mu.iter().map(move |b| a + b)))?;
        let sine = Mat::from_fn(m, m, |i, j| {
            ((i + 1) as f64 * (j + 1) as f64 * PI / (m + 1) as f64).sin()
        });
        let norm = (2.0 / (m + 1) as f64).powi(2);
        let inverse_symbol =
            Mat::from_fn(m, m, |p, q| norm / (theta * theta - mu[p] - mu[q]));
        Ok(SquareHelmholtz {
            grid: grid.clone(),
            m,
            sine,
            inverse_symbol,
        })
    }
}

impl ForwardOperator for SquareHelmholtz {
    fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    fn solve(&self, forcing: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(&self.grid, forcing)?;
        let m = self.m;
        let s = self.sine.as_ref();
        let mut u = Mat::<f64>::zeros(m * m, forcing.ncols());
        for j in 0..forcing.ncols() {
            // rows index y, columns index x
            let f = Mat::from_fn(m, m, |iy, ix| forcing[(iy * m + ix, j)]);
            let mut coef = s * f.as_ref() * s;
            for q in 0..m {
                for p in 0..m {
                    coef[(p, q)] *= self.inverse_symbol[(p, q)];
                }
            }
            let sol = s * coef.as_ref() * s;
            for iy in 0..m {
                for ix in 0..m {
                    u[(iy * m + ix, j)] = sol[(iy, ix)];
                }
            }
        }
        Ok(u)
    }
}
