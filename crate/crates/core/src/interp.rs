//! Interpolation of learned models to unseen parameter values: sign and mode
//! alignment, lift to the tangent space of the origin knot, Lagrange
//! interpolation, and QR retraction.

use std::fmt;
use std::str::FromStr;

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::egf::{EgfModel, Provenance};
use crate::error::{EgfError, Result};
use crate::linalg::{qf_positive, scale_rows, weighted_gram};

/// Relative threshold on `|R_ii|` below which a retraction is rank deficient.
pub const RETRACT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpolationScheme {
    /// The polynomial of degree `N - 1` through all knots.
    #[default]
    FullLagrange,
    /// Linear through the two bracketing knots, or the two nearest knots
    /// when extrapolating.
    PiecewiseLinear,
}

impl InterpolationScheme {
    pub fn name(&self) -> &'static str {
        match self {
            InterpolationScheme::FullLagrange => "full-lagrange",
            InterpolationScheme::PiecewiseLinear => "piecewise-linear",
        }
    }
}

impl fmt::Display for InterpolationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InterpolationScheme {
    type Err = EgfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-lagrange" | "lagrange" => Ok(InterpolationScheme::FullLagrange),
            "piecewise-linear" | "linear" => Ok(InterpolationScheme::PiecewiseLinear),
            other => Err(EgfError::InvalidArgument(format!(
                "unknown scheme `{other}`; expected full-lagrange or piecewise-linear"
            ))),
        }
    }
}

/// Learned models at distinct parameter values sharing grid and rank.
#[derive(Debug, Clone)]
pub struct InterpolationSet {
    knots: Vec<EgfModel>,
    target_theta: f64,
}

impl InterpolationSet {
    pub fn new(knots: Vec<EgfModel>, target_theta: f64) -> Result<Self> {
        if knots.len() < 2 {
            return Err(EgfError::InvalidArgument(format!(
                "interpolation needs at least 2 knots, got {}",
                knots.len()
            )));
        }
        if !target_theta.is_finite() {
            return Err(EgfError::InvalidArgument(format!(
                "target theta must be finite, got {target_theta}"
            )));
        }
        let first = &knots[0];
        for (j, m) in knots.iter().enumerate().skip(1) {
            if m.grid() != first.grid() {
                return Err(EgfError::Shape(format!("knot {j} lives on a different grid")));
            }
            if m.rank() != first.rank() {
                return Err(EgfError::Shape(format!(
                    "knot {j} has rank {} but knot 0 has rank {}",
                    m.rank(),
                    first.rank()
                )));
            }
        }
        for i in 0..knots.len() {
            for j in 0..i {
                if knots[i].theta() == knots[j].theta() {
                    return Err(EgfError::InvalidArgument(format!(
                        "knots {j} and {i} share theta = {}",
                        knots[i].theta()
                    )));
                }
            }
        }
        Ok(InterpolationSet {
            knots,
            target_theta,
        })
    }

    pub fn knots(&self) -> &[EgfModel] {
        &self.knots
    }

    pub fn target_theta(&self) -> f64 {
        self.target_theta
    }

    pub fn thetas(&self) -> Vec<f64> {
        self.knots.iter().map(|m| m.theta()).collect()
    }

    fn with_knots(&self, knots: Vec<EgfModel>) -> Self {
        InterpolationSet {
            knots,
            target_theta: self.target_theta,
        }
    }
}

/// A horizontal tangent vector at the origin's scaled basis `Ψ̂`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    pub gamma: Mat<f64>,
}

/// Knot nearest the target; ties go to the smaller theta.
pub fn select_origin(set: &InterpolationSet) -> usize {
    let t = set.target_theta;
    let mut best = 0;
    for (j, m) in set.knots.iter().enumerate().skip(1) {
        let d = (m.theta() - t).abs();
        let db = (set.knots[best].theta() - t).abs();
        if d < db || (d == db && m.theta() < set.knots[best].theta()) {
            best = j;
        }
    }
    best
}

/// Negates every knot column whose W-inner product with the matching origin
/// column is negative. Zero inner products keep their sign.
pub fn align_signs(set: &InterpolationSet, origin: usize) -> InterpolationSet {
    let o = &set.knots[origin];
    let w = o.grid().weights();
    let knots = set
        .knots
        .iter()
        .enumerate()
        .map(|(j, m)| {
            if j == origin {
                return m.clone();
            }
            let phi = m.phi();
            let op = o.phi();
            let mut out = phi.to_owned();
            for k in 0..m.rank() {
                let dot: f64 = (0..phi.nrows()).map(|i| w[i] * phi[(i, k)] * op[(i, k)]).sum();
                if dot < 0.0 {
                    for i in 0..phi.nrows() {
                        out[(i, k)] = -out[(i, k)];
                    }
                }
            }
            m.with_phi(out)
        })
        .collect();
    set.with_knots(knots)
}

/// Greedy assignment of `model`'s modes to the reference modes, visiting the
/// reference in order of descending `|σ|`. Returns `perm` with reference
/// mode `k` matched to model mode `perm[k]`.
fn greedy_match(model: &EgfModel, reference: &EgfModel) -> Vec<usize> {
    let k = reference.rank();
    let overlap = weighted_gram(model.phi(), reference.grid().weights(), reference.phi());
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| reference.sigma()[b].abs().total_cmp(&reference.sigma()[a].abs()));
    let mut claimed = vec![false; k];
    let mut perm = vec![0; k];
    for &r in &order {
        let mut best: Option<usize> = None;
        for l in 0..k {
            if claimed[l] {
                continue;
            }
            if best.is_none_or(|b| overlap[(l, r)].abs() > overlap[(b, r)].abs()) {
                best = Some(l);
            }
        }
        let l = best.expect("a free mode remains");
        claimed[l] = true;
        perm[r] = l;
    }
    perm
}

/// Reorders every knot's modes (columns and coefficients together) to match
/// the origin. Also returns the applied permutations.
pub fn match_modes(set: &InterpolationSet, origin: usize) -> (InterpolationSet, Vec<Vec<usize>>) {
    let o = &set.knots[origin];
    let mut perms = Vec::with_capacity(set.knots.len());
    let knots = set
        .knots
        .iter()
        .enumerate()
        .map(|(j, m)| {
            let perm = if j == origin {
                (0..m.rank()).collect()
            } else {
                greedy_match(m, o)
            };
            let out = m.permuted(&perm);
            perms.push(perm);
            out
        })
        .collect();
    (set.with_knots(knots), perms)
}

/// `Γ = Ψ - Ψ̂ sym(Ψ̂^T Ψ)` with `Ψ = W^{1/2} Φ`.
pub fn lift(knot: &EgfModel, origin: &EgfModel) -> Result<TangentVector> {
    if knot.grid() != origin.grid() || knot.rank() != origin.rank() {
        return Err(EgfError::Shape("knot and origin differ in grid or rank".into()));
    }
    let (n, k) = (knot.phi().nrows(), knot.rank());
    if knot.phi() == origin.phi() {
        return Ok(TangentVector {
            gamma: Mat::zeros(n, k),
        });
    }
    let s = origin.grid().sqrt_weights();
    let psi = scale_rows(knot.phi(), &s);
    let psi0 = scale_rows(origin.phi(), &s);
    let m = psi0.transpose() * psi.as_ref();
    let sym = Mat::from_fn(k, k, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
    let gamma = psi.as_ref() - psi0.as_ref() * sym.as_ref();
    Ok(TangentVector { gamma })
}

/// Weights `l_j(target)` of the chosen scheme.
pub fn lagrange_weights(thetas: &[f64], target: f64, scheme: InterpolationScheme) -> Result<Vec<f64>> {
    let n = thetas.len();
    if n < 2 {
        return Err(EgfError::InvalidArgument(format!(
            "interpolation needs at least 2 knots, got {n}"
        )));
    }
    for i in 0..n {
        for j in 0..i {
            if thetas[i] == thetas[j] {
                return Err(EgfError::InvalidArgument(format!("duplicate knot {}", thetas[i])));
            }
        }
    }
    let mut w = vec![0.0; n];
    match scheme {
        InterpolationScheme::FullLagrange => {
            for (j, wj) in w.iter_mut().enumerate() {
                *wj = (0..n)
                    .filter(|&m| m != j)
                    .map(|m| (target - thetas[m]) / (thetas[j] - thetas[m]))
                    .product();
            }
        }
        InterpolationScheme::PiecewiseLinear => {
            if let Some(j) = thetas.iter().position(|&t| t == target) {
                w[j] = 1.0;
                return Ok(w);
            }
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| thetas[a].total_cmp(&thetas[b]));
            let seg = order
                .windows(2)
                .position(|p| thetas[p[0]] <= target && target <= thetas[p[1]])
                .unwrap_or(if target < thetas[order[0]] { 0 } else { n - 2 });
            let (a, b) = (order[seg], order[seg + 1]);
            let span = thetas[b] - thetas[a];
            w[a] = (thetas[b] - target) / span;
            w[b] = (target - thetas[a]) / span;
        }
    }
    Ok(w)
}

/// Entrywise interpolation of tangent vectors.
pub fn interpolate_tangent(
    gammas: &[TangentVector],
    thetas: &[f64],
    target: f64,
    scheme: InterpolationScheme,
) -> Result<TangentVector> {
    if gammas.len() != thetas.len() {
        return Err(EgfError::Shape(format!(
            "{} tangent vectors for {} knots",
            gammas.len(),
            thetas.len()
        )));
    }
    let weights = lagrange_weights(thetas, target, scheme)?;
    let (n, k) = (gammas[0].gamma.nrows(), gammas[0].gamma.ncols());
    if gammas.iter().any(|g| g.gamma.nrows() != n || g.gamma.ncols() != k) {
        return Err(EgfError::Shape("tangent vectors differ in shape".into()));
    }
    let mut out = Mat::<f64>::zeros(n, k);
    for (g, &l) in gammas.iter().zip(&weights) {
        if l == 0.0 {
            continue;
        }
        for c in 0..k {
            for r in 0..n {
                out[(r, c)] += l * g.gamma[(r, c)];
            }
        }
    }
    Ok(TangentVector { gamma: out })
}

/// `qf(Ψ̂ + Γ)` with `R_ii ≥ 0`: an orthonormal basis in the scaled
/// coordinates `Ψ = W^{1/2} Φ`.
pub fn retract(origin: &EgfModel, gamma: &TangentVector) -> Result<Mat<f64>> {
    let psi0 = scale_rows(origin.phi(), &origin.grid().sqrt_weights());
    if gamma.gamma.nrows() != psi0.nrows() || gamma.gamma.ncols() != psi0.ncols() {
        return Err(EgfError::Shape("tangent vector does not match the origin basis".into()));
    }
    let moved = psi0.as_ref() + gamma.gamma.as_ref();
    qf_positive(moved.as_ref(), RETRACT_RANK_TOL)
}

/// Full interpolation pipeline returning a model at the set's target theta.
pub fn interpolate_egf(set: &InterpolationSet, scheme: InterpolationScheme) -> Result<EgfModel> {
    let origin = select_origin(set);
    let aligned = align_signs(set, origin);
    let (matched, _) = match_modes(&aligned, origin);
    // matching can move a column next to an origin mode it was not compared
    // with, so signs are checked again
    let matched = align_signs(&matched, origin);
    let o = &matched.knots[origin];

    let gammas = matched
        .knots
        .iter()
        .map(|m| lift(m, o))
        .collect::<Result<Vec<_>>>()?;
    let thetas = matched.thetas();
    let target = matched.target_theta;
    let gamma = interpolate_tangent(&gammas, &thetas, target, scheme)?;
    let weights = lagrange_weights(&thetas, target, scheme)?;
    let sigma: Vec<f64> = (0..o.rank())
        .map(|k| {
            matched
                .knots
                .iter()
                .zip(&weights)
                .filter(|(_, &l)| l != 0.0)
                .map(|(m, &l)| l * m.sigma()[k])
                .sum()
        })
        .collect();

    let psi = retract(o, &gamma)?;
    let inv: Vec<f64> = o.grid().sqrt_weights().iter().map(|v| 1.0 / v).collect();
    let phi = scale_rows(psi.as_ref(), &inv);
    let raw = EgfModel::new(o.grid().clone(), phi, sigma, target, Provenance::Interpolated)?;

    // order the result like the origin, then by magnitude
    let perm = greedy_match(&raw, o);
    Ok(raw.permuted(&perm).sorted())
}

/// Largest entry of `|sym(Ψ̂^T Γ)|`, zero for horizontal vectors.
pub fn horizontality_defect(origin: &EgfModel, gamma: MatRef<'_, f64>) -> f64 {
    let psi0 = scale_rows(origin.phi(), &origin.grid().sqrt_weights());
    let m = psi0.transpose() * gamma;
    let k = m.nrows();
    let mut d = 0.0f64;
    for i in 0..k {
        for j in 0..k {
            d = d.max((0.5 * (m[(i, j)] + m[(j, i)])).abs());
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::egf::tests::random_model;
    use crate::grid::{make_interval_grid, SensorGrid};
    use crate::linalg::{max_abs, orthonormality_defect};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn at(m: &EgfModel, theta: f64) -> EgfModel {
        EgfModel::new(m.grid().clone(), m.phi().to_owned(), m.sigma().to_vec(), theta, m.provenance()).unwrap()
    }

    /// A smooth family of models: a fixed basis rotated by an angle growing
    /// with theta, coefficients linear in theta.
    fn family(grid: &SensorGrid, k: usize, thetas: &[f64], seed: u64) -> Vec<EgfModel> {
        let base = random_model(grid, k + 2, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
        let sig0: Vec<f64> = (0..k).map(|i| 10.0 / (i + 1) as f64).collect();
        let slope: Vec<f64> = (0..k).map(|_| rng.random_range(-0.1..0.1)).collect();
        thetas
            .iter()
            .map(|&t| {
                let a = 0.05 * t;
                let b = base.phi();
                let phi = Mat::from_fn(b.nrows(), k, |i, c| {
                    if c < 2 {
                        // rotate the first two modes toward the two spare ones
                        a.cos() * b[(i, c)] + a.sin() * b[(i, k + c)]
                    } else {
                        b[(i, c)]
                    }
                });
                let sigma = (0..k).map(|c| sig0[c] + slope[c] * t).collect();
                EgfModel::new(grid.clone(), phi, sigma, t, Provenance::RandomizedSvd).unwrap()
            })
            .collect()
    }

    fn negate_column(m: &EgfModel, c: usize) -> EgfModel {
        let mut phi = m.phi().to_owned();
        for i in 0..phi.nrows() {
            phi[(i, c)] = -phi[(i, c)];
        }
        m.with_phi(phi)
    }

    #[test]
    fn origin_selection() {
        let g = make_interval_grid(0.0, 1.0, 10).unwrap();
        let m = random_model(&g, 2, 1);
        let set = |ts: &[f64], t: f64| {
            InterpolationSet::new(ts.iter().map(|&x| at(&m, x)).collect(), t).unwrap()
        };
        assert_eq!(select_origin(&set(&[1.0, 5.0, 10.0], 7.0)), 1);
        assert_eq!(select_origin(&set(&[6.0, 7.0, 8.0], 9.0)), 2);
        assert_eq!(select_origin(&set(&[4.0, 6.0], 5.0)), 0);
        assert_eq!(select_origin(&set(&[6.0, 4.0], 5.0)), 1);
    }

    #[test]
    fn set_validation() {
        let g = make_interval_grid(0.0, 1.0, 10).unwrap();
        let m = random_model(&g, 2, 1);
        assert!(InterpolationSet::new(vec![at(&m, 1.0)], 1.0).is_err());
        assert!(InterpolationSet::new(vec![at(&m, 1.0), at(&m, 1.0)], 1.0).is_err());
        let other = random_model(&g, 3, 2);
        assert!(InterpolationSet::new(vec![at(&m, 1.0), at(&other, 2.0)], 1.0).is_err());
        let g2 = make_interval_grid(0.0, 1.0, 11).unwrap();
        let far = random_model(&g2, 2, 3);
        assert!(InterpolationSet::new(vec![at(&m, 1.0), at(&far, 2.0)], 1.0).is_err());
    }

    #[test]
    fn signs_are_restored_and_idempotent() {
        let g = make_interval_grid(0.0, 1.0, 40).unwrap();
        let knots = family(&g, 4, &[1.0, 2.0], 3);
        let flipped = negate_column(&knots[1], 2);
        let set = InterpolationSet::new(vec![knots[0].clone(), flipped], 1.5).unwrap();
        let once = align_signs(&set, 0);
        assert_eq!(once.knots[1].phi(), knots[1].phi());
        let twice = align_signs(&once, 0);
        assert_eq!(twice.knots[1].phi(), once.knots[1].phi());
    }

    #[test]
    fn zero_inner_product_keeps_sign() {
        // disjoint supports give an exactly zero inner product
        let grid = SensorGrid::new(crate::grid::Domain::Interval { a: 0.0, b: 1.0 }, vec![0.0, 0.5, 1.0], vec![1.0; 3]).unwrap();
        let o = EgfModel::new(grid.clone(), Mat::from_fn(3, 1, |i, _| if i == 0 { 1.0 } else { 0.0 }), vec![1.0], 1.0, Provenance::Pod).unwrap();
        let k = EgfModel::new(grid, Mat::from_fn(3, 1, |i, _| if i == 2 { -1.0 } else { 0.0 }), vec![1.0], 2.0, Provenance::Pod).unwrap();
        let out = align_signs(&InterpolationSet::new(vec![o, k], 1.0).unwrap(), 0);
        assert_eq!(out.knots[1].phi()[(2, 0)], -1.0);
    }

    #[test]
    fn matching_undoes_swaps() {
        let g = make_interval_grid(0.0, 1.0, 50).unwrap();
        let knots = family(&g, 5, &[1.0, 2.0], 6);
        let swapped = knots[1].permuted(&[1, 0, 2, 3, 4]);
        let set = InterpolationSet::new(vec![knots[0].clone(), swapped.clone()], 1.5).unwrap();
        let (out, perms) = match_modes(&set, 0);
        assert_eq!(perms[0], vec![0, 1, 2, 3, 4]);
        assert_eq!(perms[1], vec![1, 0, 2, 3, 4]);
        assert_eq!(out.knots[1].phi(), knots[1].phi());
        assert_eq!(out.knots[1].sigma(), knots[1].sigma());

        let same = InterpolationSet::new(vec![knots[0].clone(), at(&knots[0], 3.0)], 2.0).unwrap();
        assert_eq!(match_modes(&same, 0).1[1], vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn lift_properties() {
        let g = make_interval_grid(0.0, 1.0, 60).unwrap();
        let knots = family(&g, 4, &[1.0, 1.5], 8);
        assert_eq!(max_abs(lift(&knots[0], &knots[0]).unwrap().gamma.as_ref()), 0.0);
        let gamma = lift(&knots[1], &knots[0]).unwrap();
        assert!(horizontality_defect(&knots[0], gamma.gamma.as_ref()) <= 1e-10);

        // a basis orthogonal to the origin lifts to itself
        let big = random_model(&g, 6, 12);
        let o = big.permuted(&[0, 1, 2]);
        let k = EgfModel::new(g.clone(), big.permuted(&[3, 4, 5]).phi().to_owned(), vec![1.0; 3], 2.0, Provenance::Pod).unwrap();
        let gamma = lift(&k, &o).unwrap();
        let psi = scale_rows(k.phi(), &g.sqrt_weights());
        assert!(max_abs((gamma.gamma.as_ref() - psi.as_ref()).as_ref()) < 1e-13);
    }

    #[test]
    fn tangent_interpolation_schemes() {
        let t = |v: f64| TangentVector {
            gamma: Mat::from_fn(3, 2, |i, j| v * (i + 2 * j) as f64 + (v * v) * j as f64),
        };
        let thetas = [1.0, 2.0, 4.0];
        let gs = [t(1.0), t(2.0), t(4.0)];
        for scheme in [InterpolationScheme::FullLagrange, InterpolationScheme::PiecewiseLinear] {
            for (j, &th) in thetas.iter().enumerate() {
                let out = interpolate_tangent(&gs, &thetas, th, scheme).unwrap();
                assert_eq!(out, gs[j]);
            }
        }
        // entries are quadratic in theta, so the full polynomial is exact
        for target in [0.5, 3.0, 5.5] {
            let out = interpolate_tangent(&gs, &thetas, target, InterpolationScheme::FullLagrange).unwrap();
            assert!(max_abs((out.gamma.as_ref() - t(target).gamma.as_ref()).as_ref()) < 1e-12);
        }
        let mid = interpolate_tangent(&gs[..2], &thetas[..2], 1.5, InterpolationScheme::PiecewiseLinear).unwrap();
        let mean = Mat::from_fn(3, 2, |i, j| 0.5 * (gs[0].gamma[(i, j)] + gs[1].gamma[(i, j)]));
        assert!(max_abs((mid.gamma.as_ref() - mean.as_ref()).as_ref()) < 1e-15);
        assert!(interpolate_tangent(&gs[..1], &thetas[..1], 1.0, InterpolationScheme::FullLagrange).is_err());
    }

    #[test]
    fn piecewise_linear_brackets_and_extrapolates() {
        let w = lagrange_weights(&[6.0, 7.0, 8.0], 9.0, InterpolationScheme::PiecewiseLinear).unwrap();
        assert_eq!(w, vec![0.0, -1.0, 2.0]);
        let w = lagrange_weights(&[10.0, 1.0, 5.0], 7.0, InterpolationScheme::PiecewiseLinear).unwrap();
        assert!((w[0] - 0.4).abs() < 1e-15 && w[1] == 0.0 && (w[2] - 0.6).abs() < 1e-15);
        let w = lagrange_weights(&[1.0, 2.0, 3.0], 0.0, InterpolationScheme::PiecewiseLinear).unwrap();
        assert_eq!(w, vec![2.0, -1.0, 0.0]);
    }

    #[test]
    fn retraction_properties() {
        let g = make_interval_grid(0.0, 1.0, 40).unwrap();
        let o = random_model(&g, 4, 2);
        let psi0 = scale_rows(o.phi(), &g.sqrt_weights());
        let zero = TangentVector { gamma: Mat::zeros(40, 4) };
        let q = retract(&o, &zero).unwrap();
        assert!(max_abs((q.as_ref() - psi0.as_ref()).as_ref()) < 1e-13);

        let d = [1e-3, 0.0, 2e-3, 5e-4];
        let scaled = TangentVector { gamma: Mat::from_fn(40, 4, |i, j| psi0[(i, j)] * d[j]) };
        let q = retract(&o, &scaled).unwrap();
        assert!(max_abs((q.as_ref() - psi0.as_ref()).as_ref()) < 1e-13);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let small = TangentVector { gamma: Mat::from_fn(40, 4, |_, _| rng.random_range(-0.1..0.1)) };
        let q = retract(&o, &small).unwrap();
        assert!(orthonormality_defect(q.as_ref(), &[1.0; 40]) <= 1e-12);

        let collapse = TangentVector { gamma: Mat::from_fn(40, 4, |i, j| if j == 1 { -psi0[(i, 1)] } else { 0.0 }) };
        assert!(matches!(retract(&o, &collapse), Err(EgfError::Rank(_))));
    }

    #[test]
    fn interpolation_reproduces_origin_knot() {
        let g = make_interval_grid(0.0, 1.0, 80).unwrap();
        let knots = family(&g, 5, &[1.0, 2.0, 3.0], 21);
        for scheme in [InterpolationScheme::FullLagrange, InterpolationScheme::PiecewiseLinear] {
            let set = InterpolationSet::new(knots.clone(), 2.0).unwrap();
            let out = interpolate_egf(&set, scheme).unwrap();
            let a = out.densify().unwrap();
            let b = knots[1].densify().unwrap();
            assert!(max_abs((a.as_ref() - b.as_ref()).as_ref()) <= 1e-8 * max_abs(b.as_ref()));
            assert_eq!(out.provenance(), Provenance::Interpolated);
            assert_eq!(out.theta(), 2.0);
        }
    }

    #[test]
    fn interpolation_of_a_smooth_family() {
        let g = make_interval_grid(0.0, 1.0, 80).unwrap();
        let knots = family(&g, 4, &[1.0, 2.0, 3.0], 33);
        let truth = family(&g, 4, &[2.4], 33).remove(0);
        let set = InterpolationSet::new(knots, 2.4).unwrap();
        let out = interpolate_egf(&set, InterpolationScheme::FullLagrange).unwrap();
        assert!(orthonormality_defect(out.phi(), g.weights()) <= 1e-10);
        assert!(out.is_sorted());
        let err = crate::egf::relative_model_error(&out, &truth).unwrap();
        assert!(err < 0.1, "{err}%");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn invariant_under_knot_signs_and_permutations(
            seed in 0u64..500,
            col in 0usize..4,
            knot in 0usize..2,
            target in 1.0f64..3.0,
            swap in proptest::sample::select(vec![[1usize, 0, 2, 3], [0, 2, 1, 3], [3, 1, 2, 0], [0, 1, 2, 3]]),
        ) {
            let g = make_interval_grid(0.0, 1.0, 50).unwrap();
            let knots = family(&g, 4, &[1.0, 2.0, 3.0], seed);
            let set = InterpolationSet::new(knots.clone(), target).unwrap();
            let origin = select_origin(&set);
            let victim = [0usize, 1, 2].into_iter().filter(|&j| j != origin).nth(knot).unwrap();
            let reference = interpolate_egf(&set, InterpolationScheme::FullLagrange).unwrap().densify().unwrap();
            let scale = max_abs(reference.as_ref());

            let mut flipped = knots.clone();
            flipped[victim] = negate_column(&knots[victim], col);
            let out = interpolate_egf(&InterpolationSet::new(flipped, target).unwrap(), InterpolationScheme::FullLagrange).unwrap();
            let d = max_abs((out.densify().unwrap().as_ref() - reference.as_ref()).as_ref());
            prop_assert!(d <= 1e-10 * scale, "sign flip changed G* by {}", d);

            let mut permuted = knots.clone();
            permuted[victim] = knots[victim].permuted(&swap);
            let out = interpolate_egf(&InterpolationSet::new(permuted, target).unwrap(), InterpolationScheme::FullLagrange).unwrap();
            prop_assert!(orthonormality_defect(out.phi(), g.weights()) <= 1e-10);
            let d = max_abs((out.densify().unwrap().as_ref() - reference.as_ref()).as_ref());
            prop_assert!(d <= 1e-10 * scale, "permutation changed G* by {}", d);
        }
    }
}
