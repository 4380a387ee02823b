//! Two-pass weighted randomized SVD learner. The second pass re-solves the
//! forward problem with the orthonormalized sketch as forcings, which stands
//! in for the adjoint solve because the operators are self-adjoint.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::egf::{EgfModel, Provenance};
use crate::error::{EgfError, Result};
use crate::forcing::ForcingEnsemble;
use crate::linalg::{scale_rows, thin_qr};
use crate::solvers::{perturb, ForwardOperator, NoiseConfig, ProblemSpec, ResponseEnsemble};

/// Off-diagonal leakage above which the operator is flagged as not
/// self-adjoint.
pub const LEAKAGE_WARN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RsvdConfig {
    pub rank: usize,
    /// Extra sketch columns beyond `rank`.
    pub oversampling: usize,
    pub noise_pass1: Option<NoiseConfig>,
    pub noise_pass2: Option<NoiseConfig>,
}

impl RsvdConfig {
    pub fn new(rank: usize) -> Self {
        RsvdConfig {
            rank,
            oversampling: 0,
            noise_pass1: None,
            noise_pass2: None,
        }
    }

    pub fn with_oversampling(mut self, p: usize) -> Self {
        self.oversampling = p;
        self
    }

    /// Perturbs the responses of both passes with independent seeds.
    pub fn with_noise(mut self, pass1: NoiseConfig, pass2: NoiseConfig) -> Self {
        self.noise_pass1 = Some(pass1);
        self.noise_pass2 = Some(pass2);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvdDiagnostics {
    pub sketch_width: usize,
    /// `max |offdiag(Ṽ^T W Ũ S)| / max |σ|`.
    pub offdiag_leakage: f64,
    /// `‖E - Q̃ Q̃^T W E‖_W / ‖E‖_W` for the pass-1 sketch.
    pub range_residual: f64,
}

#[derive(Debug, Clone)]
pub struct RsvdOutput {
    pub model: EgfModel,
    pub diagnostics: RsvdDiagnostics,
}

/// `W^{-1/2} Q` where `Q R = W^{1/2} E`; the columns are W-orthonormal.
pub fn weighted_qr(e: &ResponseEnsemble) -> Result<Mat<f64>> {
    weighted_qr_matrix(e.columns.as_ref(), e.grid().weights())
}

fn weighted_qr_matrix(e: MatRef<'_, f64>, w: &[f64]) -> Result<Mat<f64>> {
    if e.ncols() == 0 || e.col_iter().all(|c| c.iter().all(|&v| v == 0.0)) {
        return Err(EgfError::Degenerate("response ensemble is identically zero".into()));
    }
    let s: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
    let (q, _) = thin_qr(scale_rows(e, &s).as_ref());
    let inv: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();
    Ok(scale_rows(q.as_ref(), &inv))
}

/// Learns a rank-`k` model with default settings (no oversampling, no
/// noise), preparing the problem's solver internally.
pub fn learn_rsvd(problem: &ProblemSpec, f: &ForcingEnsemble, k: usize) -> Result<EgfModel> {
    let op = problem.operator()?;
    let theta = problem.theta().unwrap_or(0.0);
    Ok(learn_rsvd_with(op.as_ref(), theta, f, &RsvdConfig::new(k))?.model)
}

/// Full learner against an arbitrary self-adjoint forward operator.
pub fn learn_rsvd_with(
    op: &dyn ForwardOperator,
    theta: f64,
    f: &ForcingEnsemble,
    cfg: &RsvdConfig,
) -> Result<RsvdOutput> {
    let grid = op.grid();
    if f.grid != *grid {
        return Err(EgfError::Shape("forcings and operator live on different grids".into()));
    }
    let width = cfg.rank + cfg.oversampling;
    if cfg.rank == 0 || width > f.n_samples() || width > grid.len() {
        return Err(EgfError::InvalidArgument(format!(
            "rank {} + oversampling {} must be positive and at most min(N_samples = {}, N_sensors = {})",
            cfg.rank,
            cfg.oversampling,
            f.n_samples(),
            grid.len()
        )));
    }
    let w = grid.weights();
    let s: Vec<f64> = grid.sqrt_weights();
    let inv_s: Vec<f64> = s.iter().map(|v| 1.0 / v).collect();

    // pass 1: sketch the range
    let sketch = f.columns.as_ref().subcols(0, width);
    let mut e = op.solve(sketch).map_err(|err| pass_error("pass 1", err))?;
    if let Some(noise) = cfg.noise_pass1 {
        perturb(&mut e, noise)?;
    }
    let q = weighted_qr_matrix(e.as_ref(), w)?;
    let range_residual = {
        let coef = q.transpose() * scale_rows(e.as_ref(), w);
        let r = e.as_ref() - q.as_ref() * coef.as_ref();
        let wr = scale_rows(r.as_ref(), &s);
        let we = scale_rows(e.as_ref(), &s);
        wr.norm_l2() / we.norm_l2()
    };

    // pass 2: B^T = G W Q̃ by self-adjointness
    let mut bt = op.solve(q.as_ref()).map_err(|err| pass_error("pass 2", err))?;
    if let Some(noise) = cfg.noise_pass2 {
        perturb(&mut bt, noise)?;
    }
    // B W^{1/2} = (W^{1/2} B^T)^T
    let bw = scale_rows(bt.as_ref(), &s).transpose().to_owned();
    let svd = bw
        .thin_svd()
        .map_err(|err| EgfError::Numerical(format!("SVD of the projected operator failed: {err:?}")))?;
    let sv: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let u_tilde = q.as_ref() * svd.U();
    let v_tilde = scale_rows(svd.V(), &inv_s);

    // Σ = diag(Ṽ^T W Ũ S), off-diagonal part monitored
    let vwu = v_tilde.transpose() * scale_rows(u_tilde.as_ref(), w);
    let m = Mat::from_fn(width, width, |i, j| vwu[(i, j)] * sv[j]);
    let diag: Vec<f64> = (0..width).map(|i| m[(i, i)]).collect();
    let max_sigma = diag.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let mut offdiag = 0.0f64;
    for j in 0..width {
        for i in 0..width {
            if i != j {
                offdiag = offdiag.max(m[(i, j)].abs());
            }
        }
    }
    let offdiag_leakage = if max_sigma > 0.0 { offdiag / max_sigma } else { 0.0 };
    if offdiag_leakage > LEAKAGE_WARN {
        log::warn!(
            "off-diagonal leakage {offdiag_leakage:e} exceeds {LEAKAGE_WARN:e}; \
             the operator may not be self-adjoint"
        );
    }

    let k = cfg.rank;
    let model = EgfModel::new(
        grid.clone(),
        u_tilde.as_ref().subcols(0, k).to_owned(),
        diag[..k].to_vec(),
        theta,
        Provenance::RandomizedSvd,
    )?
    .sorted();
    Ok(RsvdOutput {
        model,
        diagnostics: RsvdDiagnostics {
            sketch_width: width,
            offdiag_leakage,
            range_residual,
        },
    })
}

fn pass_error(pass: &'static str, source: EgfError) -> EgfError {
    EgfError::Pass {
        pass,
        source: Box::new(source),
    }
}
