//! Regularization-parameter choice on small projected problems
//! `min_y ‖β₁e₁ − H y‖² + λ²‖y‖²`, with `H` of size `(k+1) × k`.
//!
//! Everything here runs in `f64` on an SVD of `H`, so each evaluation of the
//! discrepancy or GCV functional costs `O(k)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{param, Result};

/// Number of bisection steps used by [`dp_lambda`].
pub const DP_MAX_BISECTIONS: usize = 60;
/// Cap on GCV functional evaluations in [`gcv_lambda`].
pub const GCV_MAX_EVALS: usize = 200;
/// Points in the coarse log-grid that seeds the golden-section search.
pub const GCV_COARSE_POINTS: usize = 41;
/// Golden-section stops once the bracket is narrower than this (decades).
pub const GCV_BRACKET_DECADES: f64 = 1e-6;
/// Half-width of the GCV search window in decades around `σ_max²`.
pub const GCV_SEARCH_DECADES: f64 = 10.0;

/// `‖β₁e₁ − H y‖` problem produced by a Krylov factorization.
#[derive(Debug, Clone)]
pub struct ProjectedProblem {
    h: DMatrix<f64>,
    beta1: f64,
}

/// Thin SVD of `H` with the data expressed in the left singular basis.
#[derive(Debug, Clone)]
pub struct ProjectedSvd {
    pub sigma: Vec<f64>,
    /// `β₁ · U[0, i]`, the data coefficients `uᵢᵀ β₁e₁`.
    pub coeffs: Vec<f64>,
    /// `‖(I − UUᵀ) β₁e₁‖²`, the part of the data outside `range(H)`.
    pub tail: f64,
    pub beta1: f64,
    vt: DMatrix<f64>,
}

impl ProjectedProblem {
    pub fn new(h: DMatrix<f64>, beta1: f64) -> Result<Self> {
        let k = h.ncols();
        if k == 0 || h.nrows() != k + 1 {
            return Err(param(format!("projected matrix must be (k+1) x k with k >= 1, got {} x {}", h.nrows(), k)));
        }
        if !h.iter().all(|v| v.is_finite()) || !beta1.is_finite() || beta1 <= 0.0 {
            return Err(param("projected problem must be finite with beta1 > 0"));
        }
        Ok(ProjectedProblem { h, beta1 })
    }

    pub fn k(&self) -> usize {
        self.h.ncols()
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn svd(&self) -> ProjectedSvd {
        let svd = self.h.clone().svd(true, true);
        let u = svd.u.expect("left singular vectors requested");
        let vt = svd.v_t.expect("right singular vectors requested");
        let sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
        let coeffs: Vec<f64> = (0..sigma.len()).map(|i| self.beta1 * u[(0, i)]).collect();
        let mut outside = DVector::<f64>::zeros(self.h.nrows());
        outside[0] = 1.0;
        let proj = u.transpose() * &outside;
        outside -= &u * proj;
        let tail = self.beta1 * self.beta1 * outside.norm_squared();
        ProjectedSvd { sigma, coeffs, tail, beta1: self.beta1, vt }
    }

    /// Tikhonov solution `y_λ`.
    pub fn solve(&self, lambda: f64) -> Vec<f64> {
        self.svd().solve(lambda)
    }

    /// `‖β₁e₁ − H y_λ‖²`.
    pub fn discrepancy(&self, lambda: f64) -> f64 {
        self.svd().discrepancy(lambda)
    }
}

impl ProjectedSvd {
    pub fn sigma_max(&self) -> f64 {
        self.sigma.iter().copied().fold(0.0, f64::max)
    }

    pub fn solve(&self, lambda: f64) -> Vec<f64> {
        let l2 = lambda * lambda;
        let k = self.vt.ncols();
        let mut y = vec![0.0; k];
        for (i, (&s, &c)) in self.sigma.iter().zip(&self.coeffs).enumerate() {
            let denom = s * s + l2;
            if denom <= 0.0 {
                continue;
            }
            let f = s * c / denom;
            for (j, yj) in y.iter_mut().enumerate() {
                *yj += f * self.vt[(i, j)];
            }
        }
        y
    }

    /// Squared projected residual at Tikhonov parameter `λ`.
    pub fn discrepancy(&self, lambda: f64) -> f64 {
        self.filtered_residual(lambda * lambda)
    }

    /// `‖(I − H H†_μ) β₁e₁‖²` with `H†_μ = (HᵀH + μI)⁻¹Hᵀ`.
    fn filtered_residual(&self, mu: f64) -> f64 {
        let mut r = self.tail;
        for (&s, &c) in self.sigma.iter().zip(&self.coeffs) {
            let s2 = s * s;
            let f = if s2 + mu > 0.0 { mu / (s2 + mu) } else { 1.0 };
            r += f * f * c * c;
        }
        r
    }

    /// The GCV functional as a function of the shift `μ`:
    /// `‖(I − H H†_μ) β₁e₁‖² / tr(I − H H†_μ)²`, where
    /// `tr(I − H H†_μ) = (k+1) − Σ σᵢ²/(σᵢ² + μ)`.
    pub fn gcv(&self, mu: f64) -> f64 {
        let mut trace = (self.sigma.len() + 1) as f64;
        for &s in &self.sigma {
            let s2 = s * s;
            if s2 + mu > 0.0 {
                trace -= s2 / (s2 + mu);
            }
        }
        self.filtered_residual(mu) / (trace * trace)
    }
}

/// Discrepancy principle: the Tikhonov `λ` with
/// `‖β₁e₁ − H y_λ‖² = nl² β₁²`.
///
/// Returns 0 when the unregularized projected residual already exceeds the
/// target (no root yet). Otherwise bisects on `log λ` over
/// `[1e-10, 1e10] · σ_max`.
pub fn dp_lambda(p: &ProjectedProblem, noise_level: f64) -> Result<f64> {
    if !(noise_level > 0.0 && noise_level < 1.0) {
        return Err(param(format!("noise level must lie in (0, 1), got {noise_level}")));
    }
    let svd = p.svd();
    let target = noise_level * noise_level * p.beta1 * p.beta1;
    if svd.discrepancy(0.0) >= target * (1.0 - 1e-12) {
        return Ok(0.0);
    }
    let smax = svd.sigma_max();
    if smax == 0.0 {
        return Err(param("projected matrix is identically zero"));
    }
    let mut lo = (1e-10 * smax).ln();
    let mut hi = (1e10 * smax).ln();
    if svd.discrepancy(hi.exp()) < target {
        return Ok(hi.exp());
    }
    if svd.discrepancy(lo.exp()) > target {
        return Ok(lo.exp());
    }
    for _ in 0..DP_MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let d = svd.discrepancy(mid.exp());
        if d == target {
            return Ok(mid.exp());
        }
        if d < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Result of the GCV minimization, in terms of the shift `μ` (`= λ²`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcvChoice {
    pub mu: f64,
    /// Final bracket `[lo, hi]` in `log10 μ`; equal bounds when `μ = 0` won.
    pub bracket: (f64, f64),
    pub evaluations: usize,
    pub value: f64,
}

impl GcvChoice {
    /// The Tikhonov parameter `λ = sqrt(μ)`.
    pub fn lambda(&self) -> f64 {
        self.mu.sqrt()
    }
}

/// Minimizes the GCV functional over `log10 μ ∈ 2·log10 σ_max ± 10`.
///
/// A coarse log-grid locates the basin; golden-section then refines inside the
/// neighbouring grid cells. The `μ = 0` endpoint is returned if it is no worse.
pub fn gcv_search(p: &ProjectedProblem) -> Result<GcvChoice> {
    let svd = p.svd();
    let smax = svd.sigma_max();
    if smax == 0.0 {
        return Err(param("projected matrix is identically zero"));
    }
    let center = 2.0 * smax.log10();
    let (a, b) = (center - GCV_SEARCH_DECADES, center + GCV_SEARCH_DECADES);
    let f = |x: f64| svd.gcv(10f64.powf(x));

    let step = (b - a) / (GCV_COARSE_POINTS - 1) as f64;
    let mut evals = 0;
    let mut best = (0usize, f64::INFINITY);
    for i in 0..GCV_COARSE_POINTS {
        let v = f(a + i as f64 * step);
        evals += 1;
        if v < best.1 {
            best = (i, v);
        }
    }
    let mut lo = a + best.0.saturating_sub(1) as f64 * step;
    let mut hi = a + (best.0 + 1).min(GCV_COARSE_POINTS - 1) as f64 * step;

    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    evals += 2;
    while hi - lo > GCV_BRACKET_DECADES && evals < GCV_MAX_EVALS {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
        evals += 1;
    }
    let (mut x, mut value) = if f1 <= f2 { (x1, f1) } else { (x2, f2) };
    let grid_x = a + best.0 as f64 * step;
    if best.1 < value {
        x = grid_x;
        value = best.1;
    }

    let at_zero = svd.gcv(0.0);
    evals += 1;
    if at_zero <= value {
        return Ok(GcvChoice { mu: 0.0, bracket: (f64::NEG_INFINITY, a), evaluations: evals, value: at_zero });
    }
    Ok(GcvChoice { mu: 10f64.powf(x), bracket: (lo, hi), evaluations: evals, value })
}

/// GCV-selected shift `μ`, i.e. the parameter of `(HᵀH + μI)⁻¹Hᵀ`.
/// The corresponding Tikhonov parameter is `sqrt(μ)`.
pub fn gcv_lambda(p: &ProjectedProblem) -> Result<f64> {
    gcv_search(p).map(|c| c.mu)
}
