//! LSQR and LSMR with the short recurrences of their original formulations.
//! Both run on a [`BidiagState`] that keeps only the latest Golub–Kahan
//! vectors, unless reorthogonalization is requested.

use super::{Recorder, SolveResult, SolverOptions, StopReason};
use crate::error::{param, Result};
use crate::krylov::{BidiagState, Step};
use crate::operators::OperatorPair;
use crate::scalar::Real;
use crate::vecops::axpy;

/// Stable Givens rotation: returns `(c, s, r)` with `[c s; -s c] [a; b] = [r; 0]`.
fn sym_ortho<T: Real>(a: T, b: T) -> (T, T, T) {
    if b == T::zero() {
        let c = if a == T::zero() { T::one() } else { a.signum() };
        return (c, T::zero(), a.abs());
    }
    if a == T::zero() {
        return (T::zero(), b.signum(), b.abs());
    }
    if b.abs() > a.abs() {
        let tau = a / b;
        let s = b.signum() / (T::one() + tau * tau).sqrt();
        let c = s * tau;
        (c, s, b / s)
    } else {
        let tau = b / a;
        let c = a.signum() / (T::one() + tau * tau).sqrt();
        let s = c * tau;
        (c, s, a / c)
    }
}

/// LSQR (Paige & Saunders). The implicit residual is `φ̄_k / ‖b‖`, the
/// norm of the projected residual `‖β₁e₁ − H_k y_k‖ / ‖b‖`.
pub fn lsqr<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    let mut rec = Recorder::new("lsqr", pair, b, opts)?;
    let mut gk = BidiagState::new(pair, b, opts.reorth, false)?;
    if gk.initial_breakdown() {
        return Ok(rec.finish(StopReason::Breakdown));
    }
    let beta1 = gk.beta1();
    let mut x = vec![T::zero(); pair.domain_len()];
    let mut w = gk.latest_v().to_vec();
    let mut phibar = beta1;
    let mut rhobar = gk.alphas()[0];

    loop {
        let step = gk.expand(pair);
        let k = gk.k();
        let beta = gk.betas()[k];
        let alpha = gk.alphas()[k];

        let (c, s, rho) = sym_ortho(rhobar, beta);
        let theta = s * alpha;
        rhobar = -c * alpha;
        let phi = c * phibar;
        phibar = s * phibar;

        axpy(phi / rho, &w, &mut x);
        let v = gk.latest_v();
        let t = theta / rho;
        for (wi, &vi) in w.iter_mut().zip(v) {
            *wi = vi - t * *wi;
        }

        let implicit = phibar.abs().as_f64() / beta1.as_f64();
        if let Some(reason) = rec.record(&x, implicit, None, None, true)? {
            return Ok(rec.finish(reason));
        }
        if step == Step::Breakdown {
            return Ok(rec.finish(StopReason::Breakdown));
        }
    }
}

/// LSMR (Fong & Saunders) for `min ‖A x − b‖² + λ²‖x‖²`.
///
/// The implicit residual is the recurrence estimate of `‖b − A x_k‖ / ‖b‖`.
/// For `λ = 0` the iterates minimize `‖Aᵀ r_k‖` over the Krylov subspace.
pub fn lsmr<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    lambda: f64,
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(param(format!("LSMR damping must be nonnegative, got {lambda}")));
    }
    let mut rec = Recorder::new("lsmr", pair, b, opts)?;
    let mut gk = BidiagState::new(pair, b, opts.reorth, false)?;
    if gk.initial_breakdown() {
        return Ok(rec.finish(StopReason::Breakdown));
    }
    let damp = T::of(lambda);
    let zero = T::zero();
    let one = T::one();
    let beta1 = gk.beta1();
    let alpha1 = gk.alphas()[0];

    let n = pair.domain_len();
    let mut x = vec![zero; n];
    let mut h = gk.latest_v().to_vec();
    let mut hbar = vec![zero; n];

    let mut zetabar = alpha1 * beta1;
    let mut alphabar = alpha1;
    let mut rho = one;
    let mut rhobar = one;
    let mut cbar = one;
    let mut sbar = zero;

    // Residual-norm estimate state.
    let mut betadd = beta1;
    let mut betad = zero;
    let mut rhodold = one;
    let mut tautildeold = zero;
    let mut thetatilde = zero;
    let mut zeta = zero;
    let mut d = zero;

    loop {
        let step = gk.expand(pair);
        let k = gk.k();
        let beta = gk.betas()[k];
        let alpha = gk.alphas()[k];

        let (chat, shat, alphahat) = sym_ortho(alphabar, damp);

        let rhoold = rho;
        let (c, s, rho_new) = sym_ortho(alphahat, beta);
        rho = rho_new;
        let thetanew = s * alpha;
        alphabar = c * alpha;

        let rhobarold = rhobar;
        let zetaold = zeta;
        let thetabar = sbar * rho;
        let rhotemp = cbar * rho;
        let (cb, sb, rb) = sym_ortho(rhotemp, thetanew);
        cbar = cb;
        sbar = sb;
        rhobar = rb;
        zeta = cbar * zetabar;
        zetabar = -sbar * zetabar;

        let f = thetabar * rho / (rhoold * rhobarold);
        for (hb, &hi) in hbar.iter_mut().zip(&h) {
            *hb = hi - f * *hb;
        }
        axpy(zeta / (rho * rhobar), &hbar, &mut x);
        let g = thetanew / rho;
        let v = gk.latest_v();
        for (hi, &vi) in h.iter_mut().zip(v) {
            *hi = vi - g * *hi;
        }

        let betaacute = chat * betadd;
        let betacheck = -shat * betadd;
        let betahat = c * betaacute;
        betadd = -s * betaacute;

        let thetatildeold = thetatilde;
        let (ctildeold, stildeold, rhotildeold) = sym_ortho(rhodold, thetabar);
        thetatilde = stildeold * rhobar;
        rhodold = ctildeold * rhobar;
        betad = -stildeold * betad + ctildeold * betahat;
        tautildeold = (zetaold - thetatildeold * tautildeold) / rhotildeold;
        let taud = (zeta - thetatilde * tautildeold) / rhodold;
        d += betacheck * betacheck;
        let normr = (d + (betad - taud) * (betad - taud) + betadd * betadd).sqrt();

        let implicit = normr.as_f64() / beta1.as_f64();
        if let Some(reason) = rec.record(&x, implicit, None, None, true)? {
            return Ok(rec.finish(reason));
        }
        if step == Step::Breakdown {
            return Ok(rec.finish(StopReason::Breakdown));
        }
    }
}
