//! Second-order central differences on uniform interval grids with
//! homogeneous Dirichlet conditions at the end nodes.

use std::f64::consts::PI;

use faer::{Mat, MatRef};

use super::tridiag::TridiagonalLu;
use super::{check_resonance, check_rows, ForwardOperator, ProblemKind, ProblemSpec};
use crate::error::{EgfError, Result};
use crate::grid::SensorGrid;

/// Location of the internal Dirichlet node of the multi-physics problem.
const INTERFACE: f64 = 0.25;

/// A run of consecutive interior nodes sharing one tridiagonal factor.
#[derive(Debug, Clone)]
struct Segment {
    first: usize,
    lu: TridiagonalLu,
}

#[derive(Debug, Clone)]
pub(crate) struct FiniteDifference1D {
    grid: SensorGrid,
    segments: Vec<Segment>,
}

/// Dirichlet eigenvalues of `-D2` on `m` interior nodes of spacing `h`.
fn laplacian_eigenvalues(m: usize, h: f64) -> impl Iterator<Item = f64> {
    (1..=m).map(move |k| 4.0 / (h * h) * (k as f64 * PI / (2.0 * (m + 1) as f64)).sin().powi(2))
}

/// Grid index of the node nearest `x = 1/4`, which must be within `h/2` and
/// leave interior nodes on both sides.
pub(crate) fn interface_index(grid: &SensorGrid) -> Result<usize> {
    let h = grid
        .uniform_spacing()
        .ok_or_else(|| EgfError::InvalidArgument("multi-physics needs a uniform grid".into()))?;
    let c = grid.coords();
    let k = (0..c.len())
        .min_by(|&i, &j| (c[i] - INTERFACE).abs().total_cmp(&(c[j] - INTERFACE).abs()))
        .unwrap_or(0);
    if (c[k] - INTERFACE).abs() > 0.5 * h * (1.0 + 1e-9) || k < 2 || k + 2 >= c.len() {
        return Err(EgfError::InvalidArgument(format!(
            "grid must have interior nodes on both sides of a node near x = {INTERFACE}"
        )));
    }
    Ok(k)
}

impl FiniteDifference1D {
    pub(crate) fn new(spec: &ProblemSpec) -> Result<Self> {
        let grid = spec.grid.clone();
        let h = grid
            .uniform_spacing()
            .ok_or_else(|| EgfError::InvalidArgument("finite differences need a uniform grid".into()))?;
        let n = grid.len();
        let x = grid.coords().to_vec();
        let inv_h2 = 1.0 / (h * h);
        let segment = |first: usize, last: usize, scale: f64, shift: &dyn Fn(f64) -> f64| {
            let m = last - first + 1;
            let off = vec![scale * inv_h2; m - 1];
            let diag: Vec<f64> = (first..=last)
                .map(|i| scale * (-2.0 * inv_h2 + shift(x[i])))
                .collect();
            TridiagonalLu::new(&off, &diag, &off).map(|lu| Segment { first, lu })
        };
        let segments = match spec.kind {
            ProblemKind::Poisson1D => vec![segment(1, n - 2, -1.0, &|_| 0.0)?],
            ProblemKind::Helmholtz1D { theta } => {
                check_resonance(theta, laplacian_eigenvalues(n - 2, h))?;
                vec![segment(1, n - 2, 1.0, &|_| theta * theta)?]
            }
            ProblemKind::Airy1D { theta } => {
                vec![segment(1, n - 2, 1.0, &|xi| -theta * theta * xi)?]
            }
            ProblemKind::MultiPhysics1D { theta } => {
                let k = interface_index(&grid)?;
                check_resonance(theta, laplacian_eigenvalues(k - 1, h))?;
                vec![
                    segment(1, k - 1, 0.5, &|_| theta * theta)?,
                    segment(k + 1, n - 2, -1.0, &|_| 0.0)?,
                ]
            }
            other => {
                return Err(EgfError::InvalidArgument(format!(
                    "{} is not a 1D finite-difference problem",
                    other.name()
                )))
            }
        };
        Ok(FiniteDifference1D { grid, segments })
    }
}

impl ForwardOperator for FiniteDifference1D {
    fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    fn solve(&self, forcing: MatRef<'_, f64>) -> Result<Mat<f64>> {
        check_rows(&self.grid, forcing)?;
        let mut u = Mat::<f64>::zeros(forcing.nrows(), forcing.ncols());
        let mut buf = Vec::new();
        for j in 0..forcing.ncols() {
            for seg in &self.segments {
                buf.clear();
                buf.extend((0..seg.lu.len()).map(|i| forcing[(seg.first + i, j)]));
                seg.lu.solve_in_place(&mut buf);
                for (i, v) in buf.iter().enumerate() {
                    u[(seg.first + i, j)] = *v;
                }
            }
        }
        Ok(u)
    }
}
