use super::{Recorder, SolveResult, SolverOptions, StopReason};
use crate::error::Result;
use crate::operators::OperatorPair;
use crate::scalar::Real;
use crate::vecops::{axpy, dot, norm};

/// What the per-iteration callback asks the CGLS loop to do next.
pub(crate) enum Flow {
    Continue,
    Stop(StopReason),
}

/// Conjugate gradients on `Bᵀ`-normal equations `B A x = B rhs`, starting at `x0`.
///
/// Calls `on_iter(x_k, r_k, ‖r_k‖)` after each of at most `iters` steps and
/// returns the last iterate with the reason the loop ended (`None` when
/// `iters` ran out).
pub(crate) fn cgls_loop<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    rhs: &[T],
    x0: Vec<T>,
    iters: usize,
    breakdown: T,
    mut on_iter: impl FnMut(&[T], &[T], T) -> Result<Flow>,
) -> Result<(Vec<T>, Option<StopReason>)> {
    let mut x = x0;
    let ax = pair.forward(&x);
    let mut r: Vec<T> = rhs.iter().zip(&ax).map(|(&b, &a)| b - a).collect();
    let mut s = pair.back(&r);
    let mut p = s.clone();
    let mut gamma = dot(&s, &s);
    if gamma.sqrt() <= breakdown {
        return Ok((x, Some(StopReason::Breakdown)));
    }
    for _ in 0..iters {
        let q = pair.forward(&p);
        let delta = dot(&q, &q);
        if !(delta > T::zero()) {
            return Ok((x, Some(StopReason::Breakdown)));
        }
        let alpha = gamma / delta;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        s = pair.back(&r);
        let gamma_new = dot(&s, &s);
        if let Flow::Stop(reason) = on_iter(&x, &r, norm(&r))? {
            return Ok((x, Some(reason)));
        }
        if gamma_new.sqrt() <= breakdown {
            return Ok((x, Some(StopReason::Breakdown)));
        }
        let beta = gamma_new / gamma;
        for (pi, &si) in p.iter_mut().zip(&s) {
            *pi = si + beta * *pi;
        }
        gamma = gamma_new;
    }
    Ok((x, None))
}

/// CGLS: conjugate gradients applied to the normal equations, with the
/// residual `r_k = b − A x_k` updated by recurrence.
pub fn cgls<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    let mut rec = Recorder::new("cgls", pair, b, opts)?;
    let bnorm = rec.bnorm();
    let breakdown = T::of(T::BREAKDOWN) * norm(b);
    let x0 = vec![T::zero(); pair.domain_len()];
    let (_, reason) = cgls_loop(pair, b, x0, opts.max_iters, breakdown, |x, _r, rnorm| {
        Ok(match rec.record(x, rnorm.as_f64() / bnorm, None, None, true)? {
            Some(r) => Flow::Stop(r),
            None => Flow::Continue,
        })
    })?;
    Ok(rec.finish(reason.unwrap_or(StopReason::MaxIters)))
}
