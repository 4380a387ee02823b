//! Multiplicative-scale Gaussian perturbation of training responses.

use faer::Mat;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::ResponseEnsemble;
use crate::error::{EgfError, Result};
use crate::rng::column_rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub level: f64,
    pub seed: u64,
}

impl NoiseConfig {
    pub fn new(level: f64, seed: u64) -> Result<Self> {
        if !(level >= 0.0 && level.is_finite()) {
            return Err(EgfError::InvalidArgument(format!(
                "noise level must be nonnegative, got {level}"
            )));
        }
        Ok(NoiseConfig { level, seed })
    }
}

/// `u_ij + level * c_ij * mean_i |u_ij|` with `c_ij` standard normal, drawn
/// from the stream `(seed, j)`.
pub fn add_noise(e: &ResponseEnsemble, cfg: NoiseConfig) -> Result<ResponseEnsemble> {
    let mut out = e.clone();
    perturb(&mut out.columns, cfg)?;
    out.noise_applied = Some(cfg);
    Ok(out)
}

/// In-place version of [`add_noise`] on a bare response matrix.
pub fn perturb(columns: &mut Mat<f64>, cfg: NoiseConfig) -> Result<()> {
    let cfg = NoiseConfig::new(cfg.level, cfg.seed)?;
    if cfg.level == 0.0 {
        return Ok(());
    }
    let n = columns.nrows();
    for j in 0..columns.ncols() {
        let mean_abs = (0..n).map(|i| columns[(i, j)].abs()).sum::<f64>() / n as f64;
        if mean_abs == 0.0 {
            continue;
        }
        let scale = cfg.level * mean_abs;
        let mut rng = column_rng(cfg.seed, j);
        for i in 0..n {
            let c: f64 = StandardNormal.sample(&mut rng);
            columns[(i, j)] += scale * c;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_interval_grid;
    use crate::solvers::{ProblemKind, ProblemSpec};

    fn ensemble(columns: Mat<f64>) -> ResponseEnsemble {
        let g = make_interval_grid(0.0, 1.0, columns.nrows()).unwrap();
        let p = ProblemSpec::new(ProblemKind::Poisson1D, g).unwrap();
        ResponseEnsemble::new(p, columns).unwrap()
    }

    #[test]
    fn zero_level_is_identity() {
        let e = ensemble(Mat::from_fn(10, 3, |i, j| (i * 3 + j) as f64 - 7.5));
        let out = add_noise(&e, NoiseConfig { level: 0.0, seed: 4 }).unwrap();
        assert_eq!(out.columns, e.columns);
    }

    #[test]
    fn noise_has_requested_scale() {
        let e = ensemble(Mat::from_fn(2000, 1, |_, _| 1.0));
        let out = add_noise(&e, NoiseConfig { level: 0.1, seed: 9 }).unwrap();
        let d: Vec<f64> = (0..2000).map(|i| out.columns[(i, 0)] - 1.0).collect();
        let mean = d.iter().sum::<f64>() / 2000.0;
        let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1999.0).sqrt();
        assert!((0.09..=0.11).contains(&std), "std {std}");
        assert_eq!(out.noise_applied, Some(NoiseConfig { level: 0.1, seed: 9 }));
    }

    #[test]
    fn zero_column_is_untouched_and_seed_is_deterministic() {
        let e = ensemble(Mat::from_fn(20, 2, |i, j| if j == 0 { 0.0 } else { i as f64 }));
        let cfg = NoiseConfig { level: 0.5, seed: 1 };
        let a = add_noise(&e, cfg).unwrap();
        let b = add_noise(&e, cfg).unwrap();
        assert_eq!(a.columns, b.columns);
        assert!((0..20).all(|i| a.columns[(i, 0)] == 0.0));
        assert!(add_noise(&e, NoiseConfig { level: -1.0, seed: 1 }).is_err());
    }
}
