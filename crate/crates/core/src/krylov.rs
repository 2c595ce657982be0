//! Partial factorizations underlying every solver:
//! Golub–Kahan bidiagonalization `A V_k = U_{k+1} H_k`, Arnoldi
//! `M W_k = W_{k+1} H̄_k`, and flexible Golub–Kahan `A Z_k = U_{k+1} M_k`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::operators::{check_rhs, OperatorPair};
use crate::scalar::Real;
use crate::vecops::{axpy, cgs2, dot, norm, normalize, scale};

/// Outcome of one expansion step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Step {
    Continue,
    /// A new normalization constant fell below the breakdown threshold; the
    /// subspace is invariant and the current projected solution is exact.
    Breakdown,
}

fn rhs_norm<T: Real>(b: &[T]) -> Result<T> {
    let beta = norm(b);
    if !(beta > T::zero()) || !beta.is_finite() {
        return Err(Error::DegenerateInput("right-hand side has zero or non-finite norm".into()));
    }
    Ok(beta)
}

/// Golub–Kahan bidiagonalization state.
///
/// After `k` expansions `H_k` is `(k+1) × k` lower bidiagonal with diagonal
/// `α_1..α_k` and subdiagonal `β_2..β_{k+1}`. The next right vector `v_{k+1}`
/// and its `α_{k+1}` are always available.
#[derive(Debug, Clone)]
pub struct BidiagState<T> {
    u: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    alphas: Vec<T>,
    betas: Vec<T>,
    reorth: bool,
    keep: bool,
    k: usize,
    threshold: T,
}

/// Starts a bidiagonalization that stores every basis vector.
pub fn gk_init<T: Real, P: OperatorPair<T> + ?Sized>(pair: &P, b: &[T], reorth: bool) -> Result<BidiagState<T>> {
    BidiagState::new(pair, b, reorth, true)
}

impl<T: Real> BidiagState<T> {
    /// `keep_basis = false` keeps only the latest `u` and `v` (short recurrences);
    /// reorthogonalization forces the full basis to be kept.
    pub fn new<P: OperatorPair<T> + ?Sized>(pair: &P, b: &[T], reorth: bool, keep_basis: bool) -> Result<Self> {
        check_rhs(pair, b)?;
        let beta = rhs_norm(b)?;
        let mut u = b.to_vec();
        scale(T::one() / beta, &mut u);
        let mut v = pair.back(&u);
        let alpha = normalize(&mut v);
        Ok(BidiagState {
            u: vec![u],
            v: vec![v],
            alphas: vec![alpha],
            betas: vec![beta],
            reorth,
            keep: keep_basis || reorth,
            k: 0,
            threshold: T::of(T::BREAKDOWN) * beta,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn beta1(&self) -> T {
        self.betas[0]
    }

    /// `α_1..α_{k+1}`.
    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    /// `β_1..β_{k+1}` (`β_1 = ‖b‖`).
    pub fn betas(&self) -> &[T] {
        &self.betas
    }

    /// True when `α_1` already vanished (`Bb = 0`).
    pub fn initial_breakdown(&self) -> bool {
        self.alphas[0] <= self.threshold
    }

    pub fn latest_u(&self) -> &[T] {
        self.u.last().expect("basis is never empty")
    }

    pub fn latest_v(&self) -> &[T] {
        self.v.last().expect("basis is never empty")
    }

    /// Stored left vectors (`u_1..u_{k+1}` when the basis is kept).
    pub fn u_basis(&self) -> &[Vec<T>] {
        &self.u
    }

    /// Stored right vectors (`v_1..v_{k+1}` when the basis is kept).
    pub fn v_basis(&self) -> &[Vec<T>] {
        &self.v
    }

    pub fn keeps_basis(&self) -> bool {
        self.keep
    }

    /// One Golub–Kahan step: computes `β_{k+1}, u_{k+1}, α_{k+1}, v_{k+1}`.
    pub fn expand<P: OperatorPair<T> + ?Sized>(&mut self, pair: &P) -> Step {
        let alpha = *self.alphas.last().unwrap();
        let mut u = pair.forward(self.latest_v());
        axpy(-alpha, self.latest_u(), &mut u);
        if self.reorth {
            cgs2(&self.u, &mut u);
        }
        let beta = normalize(&mut u);

        let mut v = pair.back(&u);
        axpy(-beta, self.latest_v(), &mut v);
        if self.reorth {
            cgs2(&self.v, &mut v);
        }
        let alpha_next = normalize(&mut v);

        if self.keep {
            self.u.push(u);
            self.v.push(v);
        } else {
            self.u[0] = u;
            self.v[0] = v;
        }
        self.betas.push(beta);
        self.alphas.push(alpha_next);
        self.k += 1;

        if beta <= self.threshold || alpha_next <= self.threshold {
            Step::Breakdown
        } else {
            Step::Continue
        }
    }

    /// `H_k` as a dense `(k+1) × k` matrix.
    pub fn projected_matrix(&self) -> DMatrix<f64> {
        let k = self.k;
        let mut h = DMatrix::zeros(k + 1, k);
        for j in 0..k {
            h[(j, j)] = self.alphas[j].as_f64();
            h[(j + 1, j)] = self.betas[j + 1].as_f64();
        }
        h
    }
}

/// Arnoldi process with modified Gram–Schmidt (optionally a second pass).
#[derive(Debug, Clone)]
pub struct ArnoldiState<T> {
    w: Vec<Vec<T>>,
    /// Column `j` holds `h_{0..=j+1, j}`.
    h: Vec<Vec<T>>,
    beta1: T,
    reorth: bool,
    threshold: T,
}

impl<T: Real> ArnoldiState<T> {
    pub fn new(r0: &[T], reorth: bool) -> Result<Self> {
        let beta = rhs_norm(r0)?;
        let mut w = r0.to_vec();
        scale(T::one() / beta, &mut w);
        Ok(ArnoldiState { w: vec![w], h: Vec::new(), beta1: beta, reorth, threshold: T::of(T::BREAKDOWN) * beta })
    }

    pub fn k(&self) -> usize {
        self.h.len()
    }

    pub fn beta1(&self) -> T {
        self.beta1
    }

    pub fn basis(&self) -> &[Vec<T>] {
        &self.w
    }

    /// Hessenberg column `j` (length `j + 2`).
    pub fn column(&self, j: usize) -> &[T] {
        &self.h[j]
    }

    /// Appends `w_{k+1}` using `apply_square(w_k)`.
    pub fn expand(&mut self, mut apply_square: impl FnMut(&[T]) -> Vec<T>) -> Step {
        let k = self.h.len();
        let mut z = apply_square(&self.w[k]);
        let mut col = vec![T::zero(); k + 2];
        let passes = if self.reorth { 2 } else { 1 };
        for _ in 0..passes {
            for (i, wi) in self.w.iter().enumerate() {
                let c = dot(wi, &z);
                axpy(-c, wi, &mut z);
                col[i] += c;
            }
        }
        let hnext = normalize(&mut z);
        col[k + 1] = hnext;
        self.h.push(col);
        self.w.push(z);
        if hnext <= self.threshold {
            Step::Breakdown
        } else {
            Step::Continue
        }
    }

    /// `H̄_k` as a dense `(k+1) × k` matrix.
    pub fn hessenberg(&self) -> DMatrix<f64> {
        let k = self.h.len();
        let mut m = DMatrix::zeros(k + 1, k);
        for (j, col) in self.h.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                m[(i, j)] = v.as_f64();
            }
        }
        m
    }
}

/// Flexible Golub–Kahan state: `A Z_k = U_{k+1} M_k` with `z_i = P_i v_i`.
///
/// Both `U` and `V` are fully reorthogonalized (CGS2) and every vector is kept.
#[derive(Debug, Clone)]
pub struct FlexibleState<T> {
    u: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    z: Vec<Vec<T>>,
    /// Column `j` holds `m_{0..=j+1, j}`.
    m: Vec<Vec<f64>>,
    beta1: T,
    threshold: T,
}

impl<T: Real> FlexibleState<T> {
    pub fn new<P: OperatorPair<T> + ?Sized>(pair: &P, b: &[T]) -> Result<Self> {
        check_rhs(pair, b)?;
        let beta = rhs_norm(b)?;
        let mut u = b.to_vec();
        scale(T::one() / beta, &mut u);
        let mut v = pair.back(&u);
        normalize(&mut v);
        Ok(FlexibleState {
            u: vec![u],
            v: vec![v],
            z: Vec::new(),
            m: Vec::new(),
            beta1: beta,
            threshold: T::of(T::BREAKDOWN) * beta,
        })
    }

    pub fn k(&self) -> usize {
        self.z.len()
    }

    pub fn beta1(&self) -> T {
        self.beta1
    }

    pub fn u_basis(&self) -> &[Vec<T>] {
        &self.u
    }

    pub fn v_basis(&self) -> &[Vec<T>] {
        &self.v
    }

    pub fn z_basis(&self) -> &[Vec<T>] {
        &self.z
    }

    /// One flexible step with preconditioner `precond` applied to `v_k`.
    pub fn expand<P: OperatorPair<T> + ?Sized>(&mut self, pair: &P, precond: impl FnOnce(&[T]) -> Vec<T>) -> Step {
        let k = self.z.len();
        let z = precond(&self.v[k]);
        if !(norm(&z) > T::zero()) {
            return Step::Breakdown;
        }
        let mut w = pair.forward(&z);
        let mut col = vec![0.0; k + 2];
        for _ in 0..2 {
            for (i, ui) in self.u.iter().enumerate() {
                let c = dot(ui, &w);
                axpy(-c, ui, &mut w);
                col[i] += c.as_f64();
            }
        }
        let mnext = normalize(&mut w);
        col[k + 1] = mnext.as_f64();

        let mut v = pair.back(&w);
        cgs2(&self.v, &mut v);
        let tnext = normalize(&mut v);

        self.z.push(z);
        self.m.push(col);
        self.u.push(w);
        self.v.push(v);
        if mnext <= self.threshold || tnext <= self.threshold {
            Step::Breakdown
        } else {
            Step::Continue
        }
    }

    /// `M_k` as a dense `(k+1) × k` matrix.
    pub fn projected_matrix(&self) -> DMatrix<f64> {
        let k = self.m.len();
        let mut out = DMatrix::zeros(k + 1, k);
        for (j, col) in self.m.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[(i, j)] = v;
            }
        }
        out
    }
}
