//! AB- and BA-GMRES: GMRES on `A B u = b` (range space, `x = B u`) or on
//! `B A x = B b` (domain space). The backprojector acts as a preconditioner,
//! so it does not need to be the exact adjoint.

use super::{Recorder, SolveResult, SolverOptions, StopReason, StoredBasis};
use crate::error::Result;
use crate::krylov::{ArnoldiState, Step};
use crate::operators::OperatorPair;
use crate::scalar::Real;
use crate::vecops::{axpy, norm};

/// Incremental QR of the Hessenberg matrix by Givens rotations.
struct GivensLsq {
    cs: Vec<f64>,
    sn: Vec<f64>,
    /// Columns of the triangular factor.
    r: Vec<Vec<f64>>,
    g: Vec<f64>,
}

impl GivensLsq {
    fn new(beta: f64) -> Self {
        GivensLsq { cs: Vec::new(), sn: Vec::new(), r: Vec::new(), g: vec![beta] }
    }

    /// Adds Hessenberg column `h` (length `k + 2`) and returns the new residual norm.
    fn push(&mut self, mut h: Vec<f64>) -> f64 {
        let k = self.r.len();
        for i in 0..k {
            let (c, s) = (self.cs[i], self.sn[i]);
            let (a, b) = (h[i], h[i + 1]);
            h[i] = c * a + s * b;
            h[i + 1] = -s * a + c * b;
        }
        let (a, b) = (h[k], h[k + 1]);
        let r = a.hypot(b);
        let (c, s) = if r == 0.0 { (1.0, 0.0) } else { (a / r, b / r) };
        h[k] = r;
        h[k + 1] = 0.0;
        self.cs.push(c);
        self.sn.push(s);
        let gk = self.g[k];
        self.g[k] = c * gk;
        self.g.push(-s * gk);
        h.truncate(k + 1);
        self.r.push(h);
        self.g[k + 1].abs()
    }

    /// Back substitution for the current `y`.
    fn solve(&self) -> Vec<f64> {
        let k = self.r.len();
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut acc = self.g[i];
            for (j, yj) in y.iter().enumerate().skip(i + 1) {
                acc -= self.r[j][i] * yj;
            }
            let d = self.r[i][i];
            y[i] = if d != 0.0 { acc / d } else { 0.0 };
        }
        y
    }
}

fn combine<T: Real>(basis: &[Vec<T>], y: &[f64], n: usize) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for (v, &c) in basis.iter().zip(y) {
        axpy(T::of(c), v, &mut x);
    }
    x
}

/// AB-GMRES: Arnoldi on `A B` in the measurement space, `x_k = B W_k y_k`.
/// The implicit residual is `‖β₁e₁ − H̄_k y_k‖ / ‖b‖`.
pub fn ab_gmres<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    let mut rec = Recorder::new("ab_gmres", pair, b, opts)?;
    let mut arnoldi = ArnoldiState::new(b, opts.reorth)?;
    let beta1 = arnoldi.beta1().as_f64();
    let mut lsq = GivensLsq::new(beta1);
    let n = pair.domain_len();
    // B w_i for every basis vector, so x_k needs no extra backprojection.
    let mut bw: Vec<Vec<T>> = Vec::new();
    loop {
        let step = arnoldi.expand(|w| {
            let z = pair.back(w);
            let out = pair.forward(&z);
            bw.push(z);
            out
        });
        let k = arnoldi.k();
        let col: Vec<f64> = arnoldi.column(k - 1).iter().map(|v| v.as_f64()).collect();
        let res = lsq.push(col);
        let y = lsq.solve();
        let x = combine(&bw, &y, n);
        let stop = rec.record(&x, res / beta1, None, None, true)?;
        let reason = stop.or((step == Step::Breakdown).then_some(StopReason::Breakdown));
        if let Some(reason) = reason {
            let mut out = rec.finish(reason);
            out.stored_basis = Some(StoredBasis { domain: bw.len(), range: arnoldi.basis().len() });
            return Ok(out);
        }
    }
}

/// BA-GMRES: Arnoldi on `B A` in the image space with right-hand side `B b`.
/// The implicit residual is `‖B(b − A x_k)‖ / ‖B b‖` from the projected problem.
pub fn ba_gmres<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    let mut rec = Recorder::new("ba_gmres", pair, b, opts)?;
    let bb = pair.back(b);
    if !(norm(&bb) > T::zero()) {
        return Ok(rec.finish(StopReason::Breakdown));
    }
    let mut arnoldi = ArnoldiState::new(&bb, opts.reorth)?;
    let beta1 = arnoldi.beta1().as_f64();
    let mut lsq = GivensLsq::new(beta1);
    let n = pair.domain_len();
    loop {
        let step = arnoldi.expand(|w| pair.back(&pair.forward(w)));
        let k = arnoldi.k();
        let col: Vec<f64> = arnoldi.column(k - 1).iter().map(|v| v.as_f64()).collect();
        let res = lsq.push(col);
        let y = lsq.solve();
        let x = combine(&arnoldi.basis()[..k], &y, n);
        let stop = rec.record(&x, res / beta1, None, None, true)?;
        let reason = stop.or((step == Step::Breakdown).then_some(StopReason::Breakdown));
        if let Some(reason) = reason {
            let mut out = rec.finish(reason);
            out.stored_basis = Some(StoredBasis { domain: arnoldi.basis().len(), range: 0 });
            return Ok(out);
        }
    }
}
