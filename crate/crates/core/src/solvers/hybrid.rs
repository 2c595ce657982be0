//! Hybrid LSQR: Tikhonov regularization applied to the projected problem
//! `min_y ‖β₁e₁ − H_k y‖² + λ_k²‖y‖²`, with `λ_k` chosen at every iteration.

use super::tv::FlexiblePreconditioner;
use super::{Recorder, SolveResult, SolverOptions, StopReason, StoredBasis};
use crate::error::{param, Result};
use crate::krylov::{BidiagState, FlexibleState, Step};
use crate::operators::OperatorPair;
use crate::regparam::{dp_lambda, gcv_search, ProjectedProblem, ProjectedSvd};
use crate::scalar::Real;
use crate::vecops::{axpy, dot};
use nalgebra::{DMatrix, DVector};

/// How `λ_k` is chosen on the projected problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HybridStrategy {
    /// Fixed Tikhonov parameter.
    Fixed(f64),
    /// Discrepancy principle with relative noise level `nl ∈ (0, 1)`.
    Dp(f64),
    /// Generalized cross validation.
    Gcv,
}

impl HybridStrategy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            HybridStrategy::Fixed(l) if !(l >= 0.0 && l.is_finite()) => {
                Err(param(format!("fixed lambda must be nonnegative, got {l}")))
            }
            HybridStrategy::Dp(nl) if !(nl > 0.0 && nl < 1.0) => {
                Err(param(format!("dp noise level must lie in (0, 1), got {nl}")))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            HybridStrategy::Fixed(_) => "fixed",
            HybridStrategy::Dp(_) => "dp",
            HybridStrategy::Gcv => "gcv",
        }
    }

    /// Picks the Tikhonov parameter for one projected problem.
    pub(crate) fn choose(&self, p: &ProjectedProblem) -> Result<f64> {
        match *self {
            HybridStrategy::Fixed(l) => Ok(l),
            HybridStrategy::Dp(nl) => dp_lambda(p, nl),
            HybridStrategy::Gcv => Ok(gcv_search(p)?.lambda()),
        }
    }
}

/// Solves the regularized projected problem and returns `(y, λ, implicit residual)`.
fn projected_step(h: DMatrix<f64>, beta1: f64, strategy: &HybridStrategy) -> Result<(Vec<f64>, f64, f64)> {
    let p = ProjectedProblem::new(h, beta1)?;
    let lambda = strategy.choose(&p)?;
    let svd: ProjectedSvd = p.svd();
    let y = svd.solve(lambda);
    let implicit = svd.discrepancy(lambda).max(0.0).sqrt() / beta1;
    Ok((y, lambda, implicit))
}

/// Projected step with penalty `‖R y‖`, `R` upper triangular and
/// invertible: substituting `ỹ = R y` gives a standard-form problem with
/// matrix `H R⁻¹`, so the parameter rules apply unchanged.
fn projected_step_general(
    h: DMatrix<f64>,
    r: &DMatrix<f64>,
    beta1: f64,
    strategy: &HybridStrategy,
) -> Result<(Vec<f64>, f64, f64)> {
    let ht = r
        .transpose()
        .solve_lower_triangular(&h.transpose())
        .ok_or_else(|| param("projected penalty factor is singular"))?
        .transpose();
    let (yt, lambda, implicit) = projected_step(ht, beta1, strategy)?;
    let y = r
        .solve_upper_triangular(&DVector::from_vec(yt))
        .ok_or_else(|| param("projected penalty factor is singular"))?;
    Ok((y.as_slice().to_vec(), lambda, implicit))
}

/// Cholesky factor `R` of the Gram matrix of `L z_j`, or `None` if the
/// preconditioner uses the plain `‖y‖` penalty or the factor is not usable.
fn penalty_factor<T: Real, Q: FlexiblePreconditioner<T> + ?Sized>(
    precond: &Q,
    z: &[Vec<T>],
) -> Option<Result<DMatrix<f64>, String>> {
    let lz: Vec<Vec<T>> = z.iter().map(|zj| precond.penalty(zj)).collect::<Option<_>>()?;
    let k = lz.len();
    let gram = DMatrix::from_fn(k, k, |i, j| dot(&lz[i], &lz[j]).as_f64());
    let Some(chol) = gram.cholesky() else {
        return Some(Err("penalty Gram matrix is not positive definite; using the plain penalty".into()));
    };
    let r = chol.l().transpose();
    let diag = r.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    if !(lo > 1e-10 * hi) {
        return Some(Err("penalty factor is numerically singular; using the plain penalty".into()));
    }
    Some(Ok(r))
}

fn combine<T: Real>(basis: &[Vec<T>], y: &[f64], n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for (v, &c) in basis.iter().zip(y) {
        axpy(T::of(c), v, &mut x);
    }
    x
}

/// Hybrid LSQR. All `V` basis vectors are kept and `x_k = V_k y_k`.
pub fn hybrid_lsqr<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    strategy: HybridStrategy,
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    strategy.validate()?;
    let mut rec = Recorder::new("hybrid_lsqr", pair, b, opts)?;
    let mut gk = BidiagState::new(pair, b, opts.reorth, true)?;
    if gk.initial_breakdown() {
        return Ok(rec.finish(StopReason::Breakdown));
    }
    let beta1 = gk.beta1().as_f64();
    let n = pair.domain_len();
    loop {
        let step = gk.expand(pair);
        let k = gk.k();
        let (y, lambda, implicit) = projected_step(gk.projected_matrix(), beta1, &strategy)?;
        let x = combine(&gk.v_basis()[..k], &y, n);
        let stop = rec.record(&x, implicit, Some(lambda), None, true)?;
        let reason = stop.or((step == Step::Breakdown).then_some(StopReason::Breakdown));
        if let Some(reason) = reason {
            let mut res = rec.finish(reason);
            res.stored_basis = Some(StoredBasis { domain: gk.v_basis().len(), range: gk.u_basis().len() });
            return Ok(res);
        }
    }
}

/// Flexible hybrid LSQR: `A Z_k = U_{k+1} M_k` with `z_k = P_k v_k`, where the
/// preconditioner may change every iteration (it sees the current iterate
/// through [`FlexiblePreconditioner::update`]). `x_k = Z_k y_k` with `y_k`
/// from the Tikhonov-regularized projected problem.
pub fn flexible_hybrid_lsqr<T, P, Q>(
    pair: &P,
    b: &[T],
    strategy: HybridStrategy,
    precond: &mut Q,
    opts: &SolverOptions<T>,
    name: &str,
) -> Result<SolveResult<T>>
where
    T: Real,
    P: OperatorPair<T> + ?Sized,
    Q: FlexiblePreconditioner<T> + ?Sized,
{
    strategy.validate()?;
    let mut rec = Recorder::new(name, pair, b, opts)?;
    let n = pair.domain_len();
    let x0 = precond.offset().map(|x0| x0.to_vec());
    let b_bar = match &x0 {
        Some(x0) => crate::vecops::sub(b, &pair.forward(x0)),
        None => b.to_vec(),
    };
    let mut fk = FlexibleState::new(pair, &b_bar)?;
    let beta1 = fk.beta1().as_f64();
    // Implicit residuals are reported relative to ‖b‖.
    let rescale = beta1 / rec.bnorm();
    let mut x = x0.clone().unwrap_or_else(|| vec![T::zero(); n]);
    let mut lambda_prev: Option<f64> = match strategy {
        HybridStrategy::Fixed(l) => Some(l),
        _ => None,
    };
    let mut warnings = Vec::new();
    loop {
        precond.update(&x, lambda_prev);
        let k_before = fk.k();
        let step = fk.expand(pair, |v| precond.apply(v));
        if let Some(w) = precond.take_warning() {
            warnings.push(format!("iteration {}: {w}", rec.len() + 1));
        }
        let k = fk.k();
        if k == k_before {
            let mut res = rec.finish(StopReason::Breakdown);
            res.warnings = warnings;
            return Ok(res);
        }
        let m = fk.projected_matrix();
        let (y, lambda, implicit) = match penalty_factor(&*precond, fk.z_basis()) {
            Some(Ok(r)) => projected_step_general(m, &r, beta1, &strategy)?,
            Some(Err(w)) => {
                warnings.push(format!("iteration {}: {w}", rec.len() + 1));
                projected_step(m, beta1, &strategy)?
            }
            None => projected_step(m, beta1, &strategy)?,
        };
        x = combine(fk.z_basis(), &y, n);
        if let Some(x0) = &x0 {
            axpy(T::one(), x0, &mut x);
        }
        lambda_prev = Some(lambda);
        let stop = rec.record(&x, implicit * rescale, Some(lambda), None, true)?;
        let reason = stop.or((step == Step::Breakdown).then_some(StopReason::Breakdown));
        if let Some(reason) = reason {
            let mut res = rec.finish(reason);
            res.warnings = warnings;
            res.stored_basis = Some(StoredBasis { domain: fk.z_basis().len(), range: fk.u_basis().len() });
            return Ok(res);
        }
    }
}
