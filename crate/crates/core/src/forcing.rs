//! Random forcing ensembles drawn from a zero-mean Gaussian process sampled
//! at the sensor locations.

use faer::{Mat, Side};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{EgfError, Result};
use crate::grid::{Domain, SensorGrid};
use crate::rng::column_rng;

/// Jitter levels tried, in order, after the configured one fails.
const JITTER_LADDER: [f64; 7] = [1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SquaredExponential,
}

/// Covariance kernel of the forcing process.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub family: KernelFamily,
    pub length_scale: f64,
    pub jitter: f64,
}

impl KernelConfig {
    pub fn squared_exponential(length_scale: f64) -> Self {
        KernelConfig {
            family: KernelFamily::SquaredExponential,
            length_scale,
            jitter: 0.0,
        }
    }

    pub fn with_jitter(mut self, jitter: f64) -> Self {
        self.jitter = jitter;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.length_scale > 0.0 && self.length_scale.is_finite()) {
            return Err(EgfError::InvalidArgument(format!(
                "length scale must be positive, got {}",
                self.length_scale
            )));
        }
        if !(self.jitter >= 0.0) {
            return Err(EgfError::InvalidArgument(format!(
                "jitter must be nonnegative, got {}",
                self.jitter
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.profile(d2)
    }

    fn profile(&self, d2: f64) -> f64 {
        match self.family {
            KernelFamily::SquaredExponential => {
                (-d2 / (2.0 * self.length_scale * self.length_scale)).exp()
            }
        }
    }
}

/// Forcing matrix `F` (sensors × samples) together with its provenance.
#[derive(Debug, Clone)]
pub struct ForcingEnsemble {
    pub grid: SensorGrid,
    pub columns: Mat<f64>,
    pub seed: u64,
}

impl ForcingEnsemble {
    pub fn new(grid: SensorGrid, columns: Mat<f64>, seed: u64) -> Result<Self> {
        if columns.nrows() != grid.len() {
            return Err(EgfError::Shape(format!(
                "forcing has {} rows for {} sensors",
                columns.nrows(),
                grid.len()
            )));
        }
        if columns.ncols() == 0 {
            return Err(EgfError::InvalidArgument(
                "forcing ensemble needs at least one sample".into(),
            ));
        }
        Ok(ForcingEnsemble {
            grid,
            columns,
            seed,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.columns.ncols()
    }
}

/// Dense covariance matrix `K_ij = k(x_i, x_j) + jitter * [i == j]`. On a
/// periodic grid the distance wraps around, so samples are periodic too.
pub fn covariance_matrix(grid: &SensorGrid, cfg: &KernelConfig) -> Mat<f64> {
    let mut k = match grid.domain() {
        Domain::Periodic { a, b } => {
            let period = b - a;
            Mat::from_fn(grid.len(), grid.len(), |i, j| {
                let d = (grid.point(i)[0] - grid.point(j)[0]).abs();
                let d = d.min(period - d);
                cfg.profile(d * d)
            })
        }
        _ => Mat::from_fn(grid.len(), grid.len(), |i, j| {
            cfg.eval(grid.point(i), grid.point(j))
        }),
    };
    for i in 0..grid.len() {
        k[(i, i)] += cfg.jitter;
    }
    k
}

/// Cholesky factor of the covariance, reusable across seeds.
#[derive(Debug, Clone)]
pub struct GpSampler {
    grid: SensorGrid,
    factor: Mat<f64>,
    jitter: f64,
}

impl GpSampler {
    /// Factors the covariance, escalating the diagonal jitter from the
    /// configured value through `1e-12, 1e-11, ..., 1e-6` until the Cholesky
    /// factorization succeeds.
    pub fn new(grid: &SensorGrid, cfg: &KernelConfig) -> Result<Self> {
        cfg.validate()?;
        let base = covariance_matrix(grid, &cfg.with_jitter(0.0));
        let (factor, jitter) = factor_with_jitter(&base, cfg.jitter)?;
        Ok(GpSampler {
            grid: grid.clone(),
            factor,
            jitter,
        })
    }

    /// Diagonal regularization that made the factorization succeed.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn grid(&self) -> &SensorGrid {
        &self.grid
    }

    /// Draws `n_samples` i.i.d. columns `L z_j`, where `z_j` comes from the
    /// stream `(seed, j)`.
    pub fn sample(&self, n_samples: usize, seed: u64) -> Result<ForcingEnsemble> {
        if n_samples == 0 {
            return Err(EgfError::InvalidArgument(
                "n_samples must be at least 1".into(),
            ));
        }
        let n = self.grid.len();
        let mut z = Mat::<f64>::zeros(n, n_samples);
        for j in 0..n_samples {
            let mut rng = column_rng(seed, j);
            for i in 0..n {
                z[(i, j)] = StandardNormal.sample(&mut rng);
            }
        }
        let columns = self.factor.as_ref() * z.as_ref();
        ForcingEnsemble::new(self.grid.clone(), columns, seed)
    }
}

fn factor_with_jitter(base: &Mat<f64>, start: f64) -> Result<(Mat<f64>, f64)> {
    let ladder =
        std::iter::once(start).chain(JITTER_LADDER.iter().copied().filter(|&j| j > start));
    let mut last = start;
    for jitter in ladder {
        last = jitter;
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        if let Ok(llt) = k.llt(Side::Lower) {
            if jitter > start {
                log::debug!("covariance factorized with escalated jitter {jitter:e}");
            }
            return Ok((llt.L().to_owned(), jitter));
        }
    }
    Err(EgfError::IllConditionedKernel { jitter: last })
}

/// Samples `n_samples` forcing functions from `GP(0, K)` at the sensors.
pub fn sample_gp(
    grid: &SensorGrid,
    cfg: &KernelConfig,
    n_samples: usize,
    seed: u64,
) -> Result<ForcingEnsemble> {
    GpSampler::new(grid, cfg)?.sample(n_samples, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_interval_grid, make_periodic_grid};
    use approx::assert_relative_eq;

    #[test]
    fn periodic_covariance_wraps() {
        let g = make_periodic_grid(-1.0, 1.0, 8).unwrap();
        let cfg = KernelConfig::squared_exponential(0.3);
        let k = covariance_matrix(&g, &cfg);
        // x_0 = -1 and x_7 = 0.75 are one step apart across the seam.
        assert_relative_eq!(k[(0, 7)], k[(0, 1)], max_relative = 1e-14);
        assert_relative_eq!(k[(0, 1)], cfg.eval(&[0.0], &[0.25]), max_relative = 1e-15);
    }

    #[test]
    fn covariance_entries() {
        let g = make_interval_grid(0.0, 1.0, 5).unwrap();
        let k = covariance_matrix(&g, &KernelConfig::squared_exponential(0.3));
        for i in 0..5 {
            assert_eq!(k[(i, i)], 1.0);
        }
        let sigma = 0.25;
        let g = SensorGrid::new(
            Domain::Interval { a: 0.0, b: 1.0 },
            vec![0.0, sigma],
            vec![0.5, 0.5],
        )
        .unwrap();
        let k = covariance_matrix(&g, &KernelConfig::squared_exponential(sigma));
        assert_relative_eq!(k[(0, 1)], (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(k[(0, 1)], 0.6065306597126334, max_relative = 1e-15);
        assert_eq!(k[(0, 1)], k[(1, 0)]);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let g = make_interval_grid(0.0, 1.0, 10).unwrap();
        let k = covariance_matrix(&g, &KernelConfig::squared_exponential(0.1));
        let eig = k.self_adjoint_eigenvalues(Side::Lower).unwrap();
        assert!(eig[0] >= -1e-10, "min eigenvalue {}", eig[0]);
    }

    #[test]
    fn single_point_draw_has_kernel_variance() {
        let g = SensorGrid::new(Domain::Interval { a: 0.0, b: 1.0 }, vec![0.5], vec![1.0])
            .unwrap();
        let cfg = KernelConfig::squared_exponential(0.1).with_jitter(0.44);
        let sampler = GpSampler::new(&g, &cfg).unwrap();
        assert_relative_eq!(sampler.factor[(0, 0)], 1.2, max_relative = 1e-15);
        let f = sampler.sample(1, 3).unwrap();
        assert_eq!((f.columns.nrows(), f.columns.ncols()), (1, 1));
        let z: f64 = StandardNormal.sample(&mut column_rng(3, 0));
        assert_relative_eq!(f.columns[(0, 0)], 1.2 * z, max_relative = 1e-15);
    }

    #[test]
    fn sampling_is_deterministic() {
        let g = make_interval_grid(0.0, 1.0, 50).unwrap();
        let cfg = KernelConfig::squared_exponential(0.05);
        let a = sample_gp(&g, &cfg, 4, 11).unwrap();
        let b = sample_gp(&g, &cfg, 4, 11).unwrap();
        let c = sample_gp(&g, &cfg, 4, 12).unwrap();
        assert_eq!(a.columns, b.columns);
        assert_ne!(a.columns, c.columns);
        // a column depends only on (seed, index)
        let d = sample_gp(&g, &cfg, 2, 11).unwrap();
        for i in 0..50 {
            assert_eq!(a.columns[(i, 1)], d.columns[(i, 1)]);
        }
    }

    #[test]
    fn rejects_bad_configuration() {
        let g = make_interval_grid(0.0, 1.0, 5).unwrap();
        assert!(sample_gp(&g, &KernelConfig::squared_exponential(0.0), 1, 0).is_err());
        assert!(sample_gp(&g, &KernelConfig::squared_exponential(0.1), 0, 0).is_err());
    }

    #[test]
    fn jitter_escalates_and_reports_failure() {
        // duplicated sensors make K exactly singular
        let d = Domain::Interval { a: 0.0, b: 1.0 };
        let g = SensorGrid::new(d, vec![0.5; 4], vec![0.25; 4]).unwrap();
        let s = GpSampler::new(&g, &KernelConfig::squared_exponential(0.1)).unwrap();
        assert!(s.jitter() > 0.0);

        let indefinite = Mat::from_fn(2, 2, |i, j| if i == j { 1.0 } else { 2.0 });
        match factor_with_jitter(&indefinite, 0.0) {
            Err(EgfError::IllConditionedKernel { jitter }) => assert_eq!(jitter, 1e-6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn marginal_variance_is_one() {
        let g = make_interval_grid(0.0, 1.0, 2000).unwrap();
        let f = sample_gp(&g, &KernelConfig::squared_exponential(0.0025), 2000, 5).unwrap();
        let n = f.columns.ncols() as f64;
        let mean_var: f64 = (0..g.len())
            .map(|i| (0..f.columns.ncols()).map(|j| f.columns[(i, j)].powi(2)).sum::<f64>() / n)
            .sum::<f64>()
            / g.len() as f64;
        assert!((0.9..=1.1).contains(&mean_var), "variance {mean_var}");
    }

    #[test]
    fn short_length_scale_gives_full_numerical_rank() {
        let g = make_interval_grid(0.0, 1.0, 2000).unwrap();
        let f = sample_gp(&g, &KernelConfig::squared_exponential(5e-3), 300, 1).unwrap();
        let s = f.columns.thin_svd().unwrap();
        let sv = s.S().column_vector();
        let rank = (0..sv.nrows()).filter(|&k| sv[k] > 1e-12 * sv[0]).count();
        assert!(rank > 100, "numerical rank {rank}");

        // a long length scale collapses the rank down to the jitter floor
        let f = sample_gp(&g, &KernelConfig::squared_exponential(0.2), 300, 1).unwrap();
        let s = f.columns.thin_svd().unwrap();
        let sv = s.S().column_vector();
        let rank = (0..sv.nrows()).filter(|&k| sv[k] > 1e-4 * sv[0]).count();
        assert!(rank < 100, "numerical rank {rank}");
    }
}
