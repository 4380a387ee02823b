//! One-pass learner: POD modes of the response ensemble and a diagonal
//! least-squares fit of the coefficients.

use faer::{Mat, MatRef};

use crate::egf::{EgfModel, Provenance};
use crate::error::{EgfError, Result};
use crate::forcing::ForcingEnsemble;
use crate::linalg::scale_rows;
use crate::solvers::ResponseEnsemble;

/// Smallest accepted `s_K / s_1` of the weighted response matrix.
pub const POD_RANK_TOL: f64 = 1e-12;

/// All left singular vectors of `W^{1/2} E`, mapped back by `W^{-1/2}`,
/// with the singular values.
fn pod_basis(e: &ResponseEnsemble) -> Result<(Mat<f64>, Vec<f64>)> {
    let grid = e.grid();
    let s = grid.sqrt_weights();
    let we = scale_rows(e.columns.as_ref(), &s);
    let svd = we
        .thin_svd()
        .map_err(|err| EgfError::Numerical(format!("SVD of the response ensemble failed: {err:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    Ok((scale_rows(svd.U(), &inv), sv))
}

fn check_rank(sv: &[f64], k: usize, n_sensors: usize, n_samples: usize) -> Result<()> {
    if k == 0 || k > n_sensors.min(n_samples) {
        return Err(EgfError::InvalidArgument(format!(
            "rank K = {k} must lie in 1..={}",
            n_sensors.min(n_samples)
        )));
    }
    let s1 = sv.first().copied().unwrap_or(0.0);
    if !(s1 > 0.0 && sv[k - 1] / s1 > POD_RANK_TOL) {
        return Err(EgfError::Rank(format!(
            "response ensemble has numerical rank below K = {k} (s_K / s_1 = {:e}); \
             use a smaller K or more samples",
            if s1 > 0.0 { sv[k - 1] / s1 } else { 0.0 }
        )));
    }
    Ok(())
}

/// First `k` POD modes (W-orthonormal) and all singular values of
/// `W^{1/2} E`.
pub fn pod_modes(e: &ResponseEnsemble, k: usize) -> Result<(Mat<f64>, Vec<f64>)> {
    let (basis, sv) = pod_basis(e)?;
    check_rank(&sv, k, e.grid().len(), e.n_samples())?;
    Ok((basis.as_ref().subcols(0, k).to_owned(), sv))
}

/// Per-mode minimizer of `Σ_i ‖u_i - Φ Z Φ^T W f_i‖_W²` over diagonal `Z`.
pub fn fit_coefficients(
    phi: MatRef<'_, f64>,
    f: &ForcingEnsemble,
    e: &ResponseEnsemble,
) -> Result<Vec<f64>> {
    if f.columns.nrows() != phi.nrows()
        || e.columns.nrows() != phi.nrows()
        || f.columns.ncols() != e.columns.ncols()
    {
        return Err(EgfError::Shape(format!(
            "phi has {} rows; forcings are {} x {}, responses {} x {}",
            phi.nrows(),
            f.columns.nrows(),
            f.columns.ncols(),
            e.columns.nrows(),
            e.columns.ncols()
        )));
    }
    let w = f.grid.weights();
    let c = phi.transpose() * scale_rows(f.columns.as_ref(), w);
    let d = phi.transpose() * scale_rows(e.columns.as_ref(), w);
    let mut z = Vec::with_capacity(phi.ncols());
    let mut empty = 0;
    for k in 0..phi.ncols() {
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..c.ncols() {
            num += d[(k, i)] * c[(k, i)];
            den += c[(k, i)] * c[(k, i)];
        }
        if den == 0.0 {
            log::warn!("mode {k} receives no forcing energy; its coefficient is set to zero");
            empty += 1;
            z.push(0.0);
        } else {
            z.push(num / den);
        }
    }
    if empty == phi.ncols() && empty > 0 {
        return Err(EgfError::Degenerate(
            "forcings have zero projection onto every mode".into(),
        ));
    }
    Ok(z)
}

/// POD learner: modes, coefficient fit, then modes sorted by `|Z|`.
pub fn learn_pod(f: &ForcingEnsemble, e: &ResponseEnsemble, k: usize) -> Result<EgfModel> {
    Ok(learn_pod_ranks(f, e, &[k])?.remove(0))
}

/// POD models for several ranks from a single SVD. The fitted coefficient of
/// each mode does not depend on `K`, so the models are nested.
pub fn learn_pod_ranks(
    f: &ForcingEnsemble,
    e: &ResponseEnsemble,
    ranks: &[usize],
) -> Result<Vec<EgfModel>> {
    if f.grid != *e.grid() {
        return Err(EgfError::Shape(
            "forcings and responses live on different grids".into(),
        ));
    }
    let (basis, sv) = pod_basis(e)?;
    let kmax = ranks.iter().copied().max().unwrap_or(0);
    for &k in ranks {
        check_rank(&sv, k, e.grid().len(), e.n_samples())?;
    }
    let phi = basis.as_ref().subcols(0, kmax).to_owned();
    let z = fit_coefficients(phi.as_ref(), f, e)?;
    let theta = e.problem.theta().unwrap_or(0.0);
    ranks
        .iter()
        .map(|&k| {
            let model = EgfModel::new(
                e.grid().clone(),
                phi.as_ref().subcols(0, k).to_owned(),
                z[..k].to_vec(),
                theta,
                Provenance::Pod,
            )?;
            Ok(model.sorted())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egf::tests::random_model;
    use crate::forcing::{sample_gp, KernelConfig};
    use crate::grid::make_interval_grid;
    use crate::linalg::{max_abs, orthonormality_defect};
    use crate::solvers::{solve_ensemble, ProblemKind, ProblemSpec};
    use std::f64::consts::PI;

    fn poisson(n: usize) -> ProblemSpec {
        ProblemSpec::new(ProblemKind::Poisson1D, make_interval_grid(0.0, 1.0, n).unwrap()).unwrap()
    }

    #[test]
    fn rank_one_ensemble() {
        let p = poisson(20);
        let v: Vec<f64> = p.grid.points().map(|x| x[0] * (1.0 - x[0])).collect();
        let e = ResponseEnsemble::new(p.clone(), Mat::from_fn(20, 1, |i, _| v[i])).unwrap();
        let (phi, _) = pod_modes(&e, 1).unwrap();
        let norm = p.grid.norm(&v);
        let sign = phi[(5, 0)].signum();
        for i in 0..20 {
            assert!((sign * phi[(i, 0)] - v[i] / norm).abs() < 1e-12);
        }
        let e2 = ResponseEnsemble::new(p, Mat::from_fn(20, 2, |i, _| v[i])).unwrap();
        assert!(matches!(pod_modes(&e2, 2), Err(EgfError::Rank(_))));
        assert!(pod_modes(&e2, 3).is_err());
    }

    #[test]
    fn unit_weights_reduce_to_plain_svd() {
        use crate::grid::{Domain, SensorGrid};
        let grid = SensorGrid::new(
            Domain::Interval { a: 0.0, b: 10.0 },
            (0..8).map(|i| i as f64).collect(),
            vec![1.0; 8],
        )
        .unwrap();
        let e = Mat::from_fn(8, 5, |i, j| ((i * j) as f64 * 0.7 + i as f64).sin());
        let kind = ProblemKind::Poisson1D;
        let p = ProblemSpec { kind, grid };
        let ens = ResponseEnsemble::new(p, e.clone()).unwrap();
        let (phi, _) = pod_modes(&ens, 3).unwrap();
        let svd = e.thin_svd().unwrap();
        for k in 0..3 {
            let dot: f64 = (0..8).map(|i| phi[(i, k)] * svd.U()[(i, k)]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-12);
        }
    }

    /// Stacks the weighted residual of every sample into one least-squares
    /// problem in the K unknowns and solves it by QR.
    fn normal_equation_oracle(phi: MatRef<'_, f64>, f: &ForcingEnsemble, e: &ResponseEnsemble) -> Vec<f64> {
        let w = f.grid.weights();
        let n = phi.nrows();
        let ns = f.columns.ncols();
        let k = phi.ncols();
        let c = phi.transpose() * scale_rows(f.columns.as_ref(), w);
        let x = Mat::from_fn(n * ns, k, |r, l| {
            let (i, s) = (r % n, r / n);
            c[(l, s)] * w[i].sqrt() * phi[(i, l)]
        });
        let y = Mat::from_fn(n * ns, 1, |r, _| {
            let (i, s) = (r % n, r / n);
            w[i].sqrt() * e.columns[(i, s)]
        });
        use faer::prelude::SolveLstsq;
        let sol = x.qr().solve_lstsq(y.as_ref());
        (0..k).map(|l| sol[(l, 0)]).collect()
    }

    #[test]
    fn decoupled_fit_matches_normal_equations() {
        for (n, k, seed) in [(50, 5, 1u64), (30, 3, 2), (17, 4, 3), (50, 1, 4)] {
            let grid = make_interval_grid(0.0, 1.0, n).unwrap();
            let model = random_model(&grid, k, seed);
            let f = sample_gp(&grid, &KernelConfig::squared_exponential(0.1), 12, seed).unwrap();
            // responses that the diagonal model class cannot fit exactly
            let e = Mat::from_fn(n, 12, |i, j| (f.columns[(i, j)] * 1.3).sin() + 0.1 * i as f64);
            let p = poisson(n);
            let ens = ResponseEnsemble::new(p, e).unwrap();
            let z = fit_coefficients(model.phi(), &f, &ens).unwrap();
            let oracle = normal_equation_oracle(model.phi(), &f, &ens);
            for (a, b) in z.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn identity_data_and_exact_model_class() {
        let grid = make_interval_grid(0.0, 1.0, 40).unwrap();
        let f = sample_gp(&grid, &KernelConfig::squared_exponential(0.1), 10, 5).unwrap();
        let m = random_model(&grid, 2, 6);
        let p = poisson(40);
        let same = ResponseEnsemble::new(p.clone(), f.columns.clone()).unwrap();
        let z = fit_coefficients(m.phi(), &f, &same).unwrap();
        assert!(z.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let exact = crate::egf::EgfModel::new(grid, m.phi().to_owned(), vec![3.0, -2.0], 0.0, Provenance::Pod).unwrap();
        let e = exact.apply_matrix(f.columns.as_ref()).unwrap();
        let z = fit_coefficients(m.phi(), &f, &ResponseEnsemble::new(p, e).unwrap()).unwrap();
        assert!((z[0] - 3.0).abs() < 1e-12 && (z[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fit() {
        let grid = make_interval_grid(0.0, 1.0, 10).unwrap();
        let m = random_model(&grid, 2, 1);
        let f = ForcingEnsemble::new(grid, Mat::zeros(10, 3), 0).unwrap();
        let e = ResponseEnsemble::new(poisson(10), Mat::zeros(10, 3)).unwrap();
        assert!(matches!(fit_coefficients(m.phi(), &f, &e), Err(EgfError::Degenerate(_))));
    }

    #[test]
    fn poisson_modes_and_coefficients() {
        let n = 500;
        let p = poisson(n);
        let f = sample_gp(&p.grid, &KernelConfig::squared_exponential(0.01), 400, 3).unwrap();
        let e = solve_ensemble(&p, &f).unwrap();
        let (phi, _) = pod_modes(&e, 100).unwrap();
        let residual = |k: usize, rank: usize| {
            let basis = phi.as_ref().subcols(0, rank);
            let s = Mat::from_fn(n, 1, |i, _| (k as f64 * PI * p.grid.point(i)[0]).sin());
            let norm = p.grid.norm(&crate::linalg::col_vec(s.as_ref(), 0));
            let coef = basis.transpose() * scale_rows(s.as_ref(), p.grid.weights());
            let r: Vec<f64> = (0..n).map(|i| s[(i, 0)] - (basis * coef.as_ref())[(i, 0)]).collect();
            p.grid.norm(&r) / norm
        };
        for k in 1..=10 {
            assert!(residual(k, 100) <= 0.01, "k={k}");
        }
        for k in 1..=3 {
            assert!(residual(k, 10) <= 0.01, "k={k}");
        }

        let models = learn_pod_ranks(&f, &e, &[5, 20]).unwrap();
        let m = &models[1];
        assert!(orthonormality_defect(m.phi(), p.grid.weights()) <= 1e-10);
        for (k, z) in m.sigma().iter().enumerate() {
            let exact = 1.0 / (PI * PI * ((k + 1) * (k + 1)) as f64);
            assert!((z - exact).abs() <= 0.2 * exact, "k={k}: {z} vs {exact}");
        }
        assert!(m.is_sorted());
        assert_eq!(&models[0].sigma()[..5], &m.sigma()[..5]);
    }

    #[test]
    fn fit_residual_does_not_grow_with_rank() {
        let p = poisson(200);
        let f = sample_gp(&p.grid, &KernelConfig::squared_exponential(0.02), 60, 8).unwrap();
        let e = solve_ensemble(&p, &f).unwrap();
        let models = learn_pod_ranks(&f, &e, &[1, 2, 5, 10, 20, 40]).unwrap();
        let mut last = f64::INFINITY;
        for m in &models {
            let pred = m.apply_matrix(f.columns.as_ref()).unwrap();
            let r = max_abs((pred.as_ref() - e.columns.as_ref()).as_ref());
            let res: f64 = (0..60)
                .map(|j| {
                    let d: Vec<f64> = (0..200).map(|i| pred[(i, j)] - e.columns[(i, j)]).collect();
                    p.grid.inner(&d, &d)
                })
                .sum();
            assert!(res <= last * (1.0 + 1e-12), "residual grew: {res} > {last} ({r})");
            last = res;
        }
    }
}
