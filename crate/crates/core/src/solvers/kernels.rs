//! Closed-form Green's kernels used as ground truth.

use std::f64::consts::PI;

use crate::error::{EgfError, Result};

/// A Green's kernel `G(x, s)` that can be evaluated pointwise.
pub trait GreenKernel {
    fn eval(&self, x: &[f64], s: &[f64]) -> Result<f64>;

    /// Whether the kernel is singular on the diagonal `x = s`.
    fn has_pole(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExactKernel {
    /// `-u'' = f` on `[a, b]` with homogeneous Dirichlet conditions.
    Poisson1D { a: f64, b: f64 },
    /// `u'' + θ²u = f` on `[a, b]` with homogeneous Dirichlet conditions,
    /// away from resonance.
    Helmholtz1D { a: f64, b: f64, theta: f64 },
    /// `∇²u = f` on the unit disk with `u = 0` on the boundary.
    PoissonDisk,
}

impl GreenKernel for ExactKernel {
    fn eval(&self, x: &[f64], s: &[f64]) -> Result<f64> {
        match *self {
            ExactKernel::Poisson1D { a, b } => {
                let (lo, hi) = if x[0] <= s[0] { (x[0], s[0]) } else { (s[0], x[0]) };
                Ok((lo - a) * (b - hi) / (b - a))
            }
            ExactKernel::Helmholtz1D { a, b, theta } => {
                let (lo, hi) = if x[0] <= s[0] { (x[0], s[0]) } else { (s[0], x[0]) };
                let den = theta * (theta * (b - a)).sin();
                if den == 0.0 {
                    return Err(EgfError::Resonance {
                        theta,
                        nearest: theta,
                    });
                }
                Ok((theta * (lo - a)).sin() * (theta * (hi - b)).sin() / den)
            }
            ExactKernel::PoissonDisk => {
                let (x1, x2, s1, s2) = (x[0], x[1], s[0], s[1]);
                let num = (x1 - s1).powi(2) + (x2 - s2).powi(2);
                if num == 0.0 {
                    return Err(EgfError::Pole);
                }
                let den = (x1 * s2 - x2 * s1).powi(2) + (x1 * s1 + x2 * s2 - 1.0).powi(2);
                Ok((num / den).ln() / (4.0 * PI))
            }
        }
    }

    fn has_pole(&self) -> bool {
        matches!(self, ExactKernel::PoissonDisk)
    }
}
