//! Sensor locations and the diagonal quadrature weights `W` that turn
//! discrete vectors into L² functions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{EgfError, Result};

/// The continuous domain a grid discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Domain {
    /// Closed interval `[a, b]`, endpoints included as sensors.
    Interval { a: f64, b: f64 },
    /// Periodic interval `[a, b)`; the right endpoint is identified with `a`.
    Periodic { a: f64, b: f64 },
    UnitDisk,
    UnitSquare,
}

impl Domain {
    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } | Domain::Periodic { .. } => 1,
            Domain::UnitDisk | Domain::UnitSquare => 2,
        }
    }

    /// Lebesgue measure of the domain.
    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } | Domain::Periodic { a, b } => b - a,
            Domain::UnitDisk => PI,
            Domain::UnitSquare => 1.0,
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        const EPS: f64 = 1e-12;
        match *self {
            Domain::Interval { a, b } => p[0] >= a - EPS && p[0] <= b + EPS,
            Domain::Periodic { a, b } => p[0] >= a - EPS && p[0] < b,
            Domain::UnitDisk => p[0] * p[0] + p[1] * p[1] < 1.0,
            Domain::UnitSquare => p.iter().all(|&c| (-EPS..=1.0 + EPS).contains(&c)),
        }
    }
}

/// Sensor locations together with their quadrature weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorGrid {
    domain: Domain,
    coords: Vec<f64>,
    weights: Vec<f64>,
}

impl SensorGrid {
    /// Builds a grid from flat row-major coordinates (`dim` values per point).
    pub fn new(domain: Domain, coords: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let dim = domain.dim();
        if weights.is_empty() {
            return Err(EgfError::InvalidArgument("grid has no sensors".into()));
        }
        if coords.len() != dim * weights.len() {
            return Err(EgfError::Shape(format!(
                "{} coordinates for {} sensors in dimension {dim}",
                coords.len(),
                weights.len()
            )));
        }
        if let Some(i) = weights.iter().position(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(EgfError::InvalidArgument(format!(
                "weight {i} is not strictly positive: {}",
                weights[i]
            )));
        }
        let grid = SensorGrid {
            domain,
            coords,
            weights,
        };
        if let Some(i) = (0..grid.len()).find(|&i| !domain.contains(grid.point(i))) {
            return Err(EgfError::InvalidArgument(format!(
                "sensor {i} at {:?} lies outside {domain:?}",
                grid.point(i)
            )));
        }
        Ok(grid)
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.coords[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim())
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn sqrt_weights(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.sqrt()).collect()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Quadrature approximation of the integral of `values` over the domain.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        self.weights.iter().zip(values).map(|(w, v)| w * v).sum()
    }

    /// W-weighted inner product `u^T W v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.len());
        debug_assert_eq!(v.len(), self.len());
        self.weights
            .iter()
            .zip(u.iter().zip(v))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    /// Discrete L² norm `sqrt(u^T W u)`.
    pub fn norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Spacing of a 1D grid whose points are uniformly spaced, if they are.
    pub fn uniform_spacing(&self) -> Option<f64> {
        if self.dim() != 1 || self.len() < 2 {
            return None;
        }
        let h = self.coords[1] - self.coords[0];
        let tol = 1e-9 * h.abs().max(f64::MIN_POSITIVE);
        let uniform = self
            .coords
            .windows(2)
            .all(|w| ((w[1] - w[0]) - h).abs() <= tol);
        (uniform && h > 0.0).then_some(h)
    }
}

/// `n` uniformly spaced points on `[a, b]` with trapezoidal weights.
pub fn make_interval_grid(a: f64, b: f64, n: usize) -> Result<SensorGrid> {
    if n < 3 {
        return Err(EgfError::InvalidArgument(format!(
            "interval grid needs at least 3 points, got {n}"
        )));
    }
    if !(a < b) {
        return Err(EgfError::InvalidArgument(format!(
            "interval endpoints must satisfy a < b, got [{a}, {b}]"
        )));
    }
    let h = (b - a) / (n - 1) as f64;
    let coords: Vec<f64> = (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
        .collect();
    let mut weights = vec![h; n];
    weights[0] = h / 2.0;
    weights[n - 1] = h / 2.0;
    SensorGrid::new(Domain::Interval { a, b }, coords, weights)
}

/// `n` uniformly spaced points on the periodic interval `[a, b)`, each with
/// weight `(b - a) / n` (the trapezoid rule for periodic integrands).
pub fn make_periodic_grid(a: f64, b: f64, n: usize) -> Result<SensorGrid> {
    if n < 3 {
        return Err(EgfError::InvalidArgument(format!(
            "periodic grid needs at least 3 points, got {n}"
        )));
    }
    if !(a < b) {
        return Err(EgfError::InvalidArgument(format!(
            "interval endpoints must satisfy a < b, got [{a}, {b})"
        )));
    }
    let h = (b - a) / n as f64;
    let coords = (0..n).map(|i| a + i as f64 * h).collect();
    SensorGrid::new(Domain::Periodic { a, b }, coords, vec![h; n])
}

/// Cartesian lattice of spacing `h` clipped to the open unit disk, each
/// retained point carrying the cell area `h²`.
pub fn make_disk_grid(h: f64) -> Result<SensorGrid> {
    if !(h > 0.0 && h <= 0.5) {
        return Err(EgfError::InvalidArgument(format!(
            "disk lattice spacing must lie in (0, 0.5], got {h}"
        )));
    }
    let m = (1.0 / h).floor() as i64 + 1;
    let mut coords = Vec::new();
    for j in -m..=m {
        for i in -m..=m {
            let (x, y) = (i as f64 * h, j as f64 * h);
            if x * x + y * y < 1.0 {
                coords.push(x);
                coords.push(y);
            }
        }
    }
    let n = coords.len() / 2;
    SensorGrid::new(Domain::UnitDisk, coords, vec![h * h; n])
}

/// Interior nodes of the `n × n` lattice on `[0, 1]²` (Dirichlet boundary
/// nodes excluded), ordered with `x` varying fastest.
pub fn make_square_grid(n_per_side: usize) -> Result<SensorGrid> {
    if n_per_side < 3 {
        return Err(EgfError::InvalidArgument(format!(
            "square grid needs at least 3 nodes per side, got {n_per_side}"
        )));
    }
    let h = 1.0 / (n_per_side - 1) as f64;
    let m = n_per_side - 2;
    let mut coords = Vec::with_capacity(2 * m * m);
    for iy in 1..=m {
        for ix in 1..=m {
            coords.push(ix as f64 * h);
            coords.push(iy as f64 * h);
        }
    }
    SensorGrid::new(Domain::UnitSquare, coords, vec![h * h; m * m])
}
