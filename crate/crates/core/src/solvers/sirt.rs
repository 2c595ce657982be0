use super::{Recorder, SolveResult, SolverOptions, StopReason};
use crate::error::Result;
use crate::metrics::ConvergenceLog;
use crate::operators::OperatorPair;
use crate::scalar::Real;

/// Entries of the row/column sums below this fraction of their maximum get a
/// zero inverse weight.
pub const SIRT_CLAMP: f64 = 1e-6;

fn inverse_weights<T: Real>(sums: &[T]) -> Vec<T> {
    let max = sums.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
    let thr = T::of(SIRT_CLAMP) * max;
    sums.iter().map(|&s| if s.abs() > thr && s.abs() > T::zero() { T::one() / s } else { T::zero() }).collect()
}

/// SIRT: `x_{k+1} = x_k + C B R (b − A x_k)` where `R` and `C` are the inverse
/// row and column sums of the system, estimated as `A·1` and `B·1`.
/// Nonnegativity is not enforced. SIRT has no projected residual, so the
/// implicit residual equals the explicit one.
pub fn sirt<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    if b.len() == pair.range_len() && b.iter().all(|v| *v == T::zero()) {
        // Zero data is a fixed point of the iteration.
        opts.validate(pair.domain_len())?;
        return Ok(SolveResult {
            x: vec![T::zero(); pair.domain_len()],
            iterations: 0,
            stop_reason: StopReason::Tolerance,
            log: ConvergenceLog::new("sirt", T::PRECISION, pair.matched()),
            iterates: None,
            cycle_starts: Vec::new(),
            warnings: Vec::new(),
            stored_basis: None,
        });
    }
    let mut rec = Recorder::new("sirt", pair, b, opts)?;
    let bnorm = rec.bnorm();
    let row = inverse_weights(&pair.forward(&vec![T::one(); pair.domain_len()]));
    let col = inverse_weights(&pair.back(&vec![T::one(); pair.range_len()]));

    let mut x = vec![T::zero(); pair.domain_len()];
    let mut r = b.to_vec();
    loop {
        let weighted: Vec<T> = r.iter().zip(&row).map(|(&ri, &w)| ri * w).collect();
        let update = pair.back(&weighted);
        for ((xi, &ui), &c) in x.iter_mut().zip(&update).zip(&col) {
            *xi += c * ui;
        }
        let ax = pair.forward(&x);
        for ((ri, &bi), &ai) in r.iter_mut().zip(b).zip(&ax) {
            *ri = bi - ai;
        }
        let rel = crate::vecops::norm(&r).as_f64() / bnorm;
        if let Some(reason) = rec.record(&x, rel, None, Some(&r), true)? {
            return Ok(rec.finish(reason));
        }
    }
}
