//! Total-variation regularization through iteratively reweighted norms.
//!
//! The TV term is approximated by `‖W D x‖²` with per-voxel weights
//! `w_i = (‖[D x]_i‖² + ε²)^{-1/4}`, so that `‖W D x‖² ≈ TV(x)`.
//! `cgls_tv` solves the reweighted problems in an inner-outer loop;
//! `flsqr_tv` folds the reweighting into a flexible Krylov subspace.

use super::cgls::{cgls_loop, Flow};
use super::hybrid::{flexible_hybrid_lsqr, HybridStrategy};
use super::{Recorder, SolveResult, SolverOptions, StopReason};
use crate::error::{dim, param, Result};
use crate::operators::{evaluate_tv, Gradient, OperatorPair, Stack, Volume, WeightedGradient};
use crate::scalar::Real;
use crate::vecops::{axpy, dot, norm};

/// Default `ε` relative to `max |x|`.
pub const DEFAULT_EPS_SCALE: f64 = 1e-4;
/// Inner CG cap for the flexible preconditioner.
pub const PRECOND_CG_MAX_ITERS: usize = 50;
pub const PRECOND_CG_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvOptions {
    /// Regularization parameter (`λ²` multiplies the TV term).
    pub lambda: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    /// Start every inner cycle from the previous outer iterate instead of zero.
    pub warm_start: bool,
    /// `ε = eps_scale · max|x|` in the weights.
    pub eps_scale: f64,
}

impl TvOptions {
    pub fn new(lambda: f64, outer_iters: usize, inner_iters: usize) -> Self {
        TvOptions { lambda, outer_iters, inner_iters, warm_start: false, eps_scale: DEFAULT_EPS_SCALE }
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(param(format!("TV lambda must be positive, got {}", self.lambda)));
        }
        if self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(param("outer and inner iteration counts must be at least 1"));
        }
        if !(self.eps_scale > 0.0 && self.eps_scale.is_finite()) {
            return Err(param("TV smoothing scale must be positive"));
        }
        Ok(())
    }
}

/// IRN weights `(‖[D x]_i‖² + ε²)^{-1/4}` with `ε = eps_scale · max|x|`.
/// All ones when `x = 0`.
pub fn irn_weights<T: Real>(x: &[T], grid: Gradient, eps_scale: f64) -> Vec<T> {
    let n = x.len();
    let max = x.iter().fold(0.0f64, |m, v| m.max(v.as_f64().abs()));
    let eps = eps_scale * max;
    if eps == 0.0 {
        return vec![T::one(); n];
    }
    let g = OperatorPair::<T>::forward(&grid, x);
    let eps2 = eps * eps;
    (0..n)
        .map(|i| {
            let m2 = g[i].as_f64().powi(2) + g[n + i].as_f64().powi(2) + g[2 * n + i].as_f64().powi(2);
            T::of((m2 + eps2).powf(-0.25))
        })
        .collect()
}

/// `‖A x − b‖² + λ² TV(x)`.
pub fn tv_objective<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    x: &[T],
    b: &[T],
    grid: Gradient,
    lambda: f64,
) -> Result<f64> {
    let vol = Volume::new(grid.nx, grid.ny, grid.nz, 1.0, x.to_vec())?;
    let ax = pair.forward(x);
    let fit: f64 = ax.iter().zip(b).map(|(&a, &bi)| (a - bi).as_f64().powi(2)).sum();
    Ok(fit + lambda * lambda * evaluate_tv(&vol))
}

fn check_grid<T: Real, P: OperatorPair<T> + ?Sized>(pair: &P, grid: Gradient) -> Result<()> {
    if grid.nx * grid.ny * grid.nz != pair.domain_len() {
        return Err(dim("gradient grid does not match the operator domain"));
    }
    Ok(())
}

/// CGLS-TV: each outer cycle rebuilds the weights from the current iterate and
/// runs `inner_iters` CGLS steps on `[A; λ W D] x ≈ [b; 0]`, restarting from
/// zero (or from the last iterate with `warm_start`). The first outer cycle
/// uses unit weights. Every inner iteration is logged; the implicit residual
/// is that of the stacked system, relative to `‖b‖`. The increase rule is
/// only applied within a cycle.
pub fn cgls_tv<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    grid: Gradient,
    tv: &TvOptions,
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    tv.validate()?;
    check_grid(pair, grid)?;
    let cap = opts.max_iters.min(tv.outer_iters * tv.inner_iters);
    let local = SolverOptions { max_iters: cap, ..opts.clone() };
    let mut rec = Recorder::new("cgls_tv", pair, b, &local)?;
    let bnorm = rec.bnorm();
    let breakdown = T::of(T::BREAKDOWN) * norm(b);
    let n = pair.domain_len();

    let mut rhs = b.to_vec();
    rhs.resize(pair.range_len() + 3 * n, T::zero());
    let mut x = vec![T::zero(); n];
    let mut cycle_starts = Vec::new();
    let mut final_reason = StopReason::MaxIters;

    'outer: for _ in 0..tv.outer_iters {
        let weights = irn_weights(&x, grid, tv.eps_scale);
        let stacked = Stack::new(pair, WeightedGradient { grad: grid, weights, scale: T::of(tv.lambda) });
        let x0 = if tv.warm_start { x.clone() } else { vec![T::zero(); n] };
        cycle_starts.push(rec.len());
        let mut first = true;
        let (xn, reason) = cgls_loop(&stacked, &rhs, x0, tv.inner_iters, breakdown, |xk, _r, rnorm| {
            let stop = rec.record(xk, rnorm.as_f64() / bnorm, Some(tv.lambda), None, !first)?;
            first = false;
            Ok(match stop {
                Some(r) => Flow::Stop(r),
                None => Flow::Continue,
            })
        })?;
        x = xn;
        match reason {
            Some(StopReason::Breakdown) | None => {}
            Some(r) => {
                final_reason = r;
                break 'outer;
            }
        }
        if rec.len() >= cap {
            break;
        }
    }
    let mut res = rec.finish(final_reason);
    res.cycle_starts = cycle_starts;
    Ok(res)
}

/// Iteration-dependent right preconditioner for flexible Krylov methods.
pub trait FlexiblePreconditioner<T> {
    /// Called before each expansion with the current iterate and the most
    /// recent Tikhonov parameter (if any).
    fn update(&mut self, x: &[T], lambda: Option<f64>);
    fn apply(&mut self, v: &[T]) -> Vec<T>;
    /// A diagnostic produced by the last `apply`, if any.
    fn take_warning(&mut self) -> Option<String> {
        None
    }
    /// Fixed component `x₀` of the solution outside the preconditioned
    /// space. The Krylov part then fits `b − A x₀`.
    fn offset(&self) -> Option<&[T]> {
        None
    }
    /// `L_k z` for the current regularization operator. With `None` the
    /// projected problem penalizes `‖y‖`; otherwise `‖L_k Z_k y‖`.
    fn penalty(&self, _z: &[T]) -> Option<Vec<T>> {
        None
    }
}

/// `P_k = I`: flexible hybrid LSQR then reproduces hybrid LSQR.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl<T: Real> FlexiblePreconditioner<T> for IdentityPreconditioner {
    fn update(&mut self, _x: &[T], _lambda: Option<f64>) {}

    fn apply(&mut self, v: &[T]) -> Vec<T> {
        v.to_vec()
    }
}

/// Applies `L†_A (L†_A)ᵀ` with `L = W(D x_k) D`, and penalizes `‖L x‖` in
/// the projected problem so that `λ` has the same meaning as in [`cgls_tv`].
///
/// The nullspace of `D` is the constant volume `n = 1/√N`. With
/// `Q = I − n (A n)† A`, `L†_A = Q L†` and the product becomes
/// `Q (LᵀL)† Qᵀ`; `(LᵀL)†` is applied by capped CG on the mean-free part.
/// The nullspace component `x₀ = n (A n)† b` is exposed through
/// [`FlexiblePreconditioner::offset`].
#[derive(Debug, Clone)]
pub struct TvPreconditioner<T> {
    grid: Gradient,
    eps_scale: f64,
    weights_sq: Vec<T>,
    /// `Aᵀ A n` and `‖A n‖²`; `None` when `A` annihilates constants.
    coupling: Option<(Vec<T>, T)>,
    x0: Option<Vec<T>>,
    warning: Option<String>,
}

impl<T: Real> TvPreconditioner<T> {
    pub fn new<P: OperatorPair<T> + ?Sized>(pair: &P, b: &[T], grid: Gradient, eps_scale: f64) -> Result<Self> {
        check_grid(pair, grid)?;
        let n = pair.domain_len();
        let c = T::of(1.0 / (n as f64).sqrt());
        let an = pair.forward(&vec![c; n]);
        let s = dot(&an, &an);
        let (coupling, x0) = if s > T::zero() {
            let coef = dot(&an, b) / s;
            (Some((pair.back(&an), s)), Some(vec![coef * c; n]))
        } else {
            (None, None)
        };
        Ok(TvPreconditioner { grid, eps_scale, weights_sq: vec![T::one(); n], coupling, x0, warning: None })
    }

    /// `DᵀW²D z`.
    fn normal_op(&self, z: &[T]) -> Vec<T> {
        let n = z.len();
        let mut g = OperatorPair::<T>::forward(&self.grid, z);
        for (c, gi) in g.iter_mut().enumerate() {
            *gi *= self.weights_sq[c % n];
        }
        OperatorPair::<T>::back(&self.grid, &g)
    }

    fn null_coefficient(v: &[T]) -> T {
        v.iter().copied().sum::<T>() / T::of((v.len() as f64).sqrt())
    }

    fn remove_mean(v: &mut [T]) {
        let mean = v.iter().copied().sum::<T>() / T::of(v.len() as f64);
        v.iter_mut().for_each(|x| *x -= mean);
    }

    /// Capped CG for `DᵀW²D z = r` with mean-free `r`.
    fn solve(&mut self, r0: Vec<T>) -> Vec<T> {
        let rnorm0 = norm(&r0);
        let mut z = vec![T::zero(); r0.len()];
        if rnorm0 == T::zero() {
            return z;
        }
        let mut r = r0;
        let mut p = r.clone();
        let mut rr = dot(&r, &r);
        let tol = T::of(PRECOND_CG_TOL) * rnorm0;
        for _ in 0..PRECOND_CG_MAX_ITERS {
            let q = self.normal_op(&p);
            let pq = dot(&p, &q);
            if !(pq > T::zero()) {
                break;
            }
            let alpha = rr / pq;
            axpy(alpha, &p, &mut z);
            axpy(-alpha, &q, &mut r);
            let rr_new = dot(&r, &r);
            if rr_new.sqrt() <= tol {
                return z;
            }
            let beta = rr_new / rr;
            for (pi, &ri) in p.iter_mut().zip(&r) {
                *pi = ri + beta * *pi;
            }
            rr = rr_new;
        }
        self.warning = Some(format!(
            "preconditioner CG stopped after {PRECOND_CG_MAX_ITERS} iterations at relative residual {:.3e}",
            (norm(&r) / rnorm0).as_f64()
        ));
        z
    }
}

impl<T: Real> FlexiblePreconditioner<T> for TvPreconditioner<T> {
    fn update(&mut self, x: &[T], _lambda: Option<f64>) {
        self.weights_sq = irn_weights(x, self.grid, self.eps_scale).into_iter().map(|w| w * w).collect();
    }

    fn apply(&mut self, v: &[T]) -> Vec<T> {
        let c = T::of(1.0 / (v.len() as f64).sqrt());
        // Qᵀ v = v − Aᵀ A n (nᵀ v) / ‖A n‖²
        let mut t = v.to_vec();
        if let Some((g, s)) = &self.coupling {
            axpy(-Self::null_coefficient(v) / *s, g, &mut t);
        }
        Self::remove_mean(&mut t);
        let mut z = self.solve(t);
        Self::remove_mean(&mut z);
        // Q z = z − n (A n)ᵀ A z / ‖A n‖², and (A n)ᵀ A z = (Aᵀ A n)ᵀ z.
        if let Some((g, s)) = &self.coupling {
            let shift = dot(g, &z) / *s * c;
            z.iter_mut().for_each(|x| *x -= shift);
        }
        // The scale of P_k is arbitrary; keeping ‖z‖ = ‖v‖ keeps the
        // projected Tikhonov term comparable across iterations.
        let (znorm, vnorm) = (norm(&z), norm(v));
        if znorm > T::zero() {
            crate::vecops::scale(vnorm / znorm, &mut z);
        }
        z
    }

    fn take_warning(&mut self) -> Option<String> {
        self.warning.take()
    }

    fn offset(&self) -> Option<&[T]> {
        self.x0.as_deref()
    }

    fn penalty(&self, z: &[T]) -> Option<Vec<T>> {
        let n = z.len();
        let mut g = OperatorPair::<T>::forward(&self.grid, z);
        for (c, gi) in g.iter_mut().enumerate() {
            *gi *= self.weights_sq[c % n].sqrt();
        }
        Some(g)
    }
}

/// Flexible hybrid LSQR with TV priorconditioning.
pub fn flsqr_tv<T: Real, P: OperatorPair<T> + ?Sized>(
    pair: &P,
    b: &[T],
    grid: Gradient,
    strategy: HybridStrategy,
    eps_scale: f64,
    opts: &SolverOptions<T>,
) -> Result<SolveResult<T>> {
    check_grid(pair, grid)?;
    if !(eps_scale > 0.0 && eps_scale.is_finite()) {
        return Err(param("TV smoothing scale must be positive"));
    }
    let mut precond = TvPreconditioner::new(pair, b, grid, eps_scale)?;
    flexible_hybrid_lsqr(pair, b, strategy, &mut precond, opts, "flsqr_tv")
}
