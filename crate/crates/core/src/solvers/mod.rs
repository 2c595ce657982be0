//! The solver family. Every solver works on flat arrays through an
//! [`OperatorPair`] and returns a [`SolveResult`] with a full iteration log.
//!
//! Logged quantities per iteration `k`:
//! * implicit residual: the solver's own estimate of `‖b − A x_k‖ / ‖b‖`
//!   (recurrence or projected problem),
//! * explicit residual: `‖b − A x_k‖ / ‖b‖` from a genuine forward projection,
//! * relative error against the ground truth, when one is supplied,
//! * the Tikhonov parameter `λ_k` for hybrid methods.

mod cgls;
mod gmres;
mod hybrid;
mod lsqr;
mod sirt;
mod tv;

pub use cgls::cgls;
pub use gmres::{ab_gmres, ba_gmres};
pub use hybrid::{flexible_hybrid_lsqr, hybrid_lsqr, HybridStrategy};
pub use lsqr::{lsmr, lsqr};
pub use sirt::sirt;
pub use tv::{
    cgls_tv, flsqr_tv, irn_weights, tv_objective, FlexiblePreconditioner, IdentityPreconditioner, TvOptions,
    TvPreconditioner, DEFAULT_EPS_SCALE,
};

pub use crate::operators::evaluate_tv;

use crate::error::{param, Error, Result};
use crate::metrics::ConvergenceLog;
use crate::operators::{check_rhs, OperatorPair};
use crate::scalar::Real;
use crate::vecops::{all_finite, norm};

/// Slack for "strictly greater than the previous residual".
pub const INCREASE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StopReason {
    MaxIters,
    ResidualIncrease,
    Tolerance,
    Breakdown,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::MaxIters => "max_iters",
            StopReason::ResidualIncrease => "residual_increase",
            StopReason::Tolerance => "tolerance",
            StopReason::Breakdown => "breakdown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverOptions<T> {
    pub max_iters: usize,
    /// Stop as soon as the explicit residual increases.
    pub stop_on_increase: bool,
    /// Relative implicit-residual tolerance.
    pub tolerance: f64,
    /// Full reorthogonalization of the Krylov bases.
    pub reorth: bool,
    /// Only used to log the relative error.
    pub ground_truth: Option<Vec<T>>,
    /// Keep a copy of every iterate in the result.
    pub record_iterates: bool,
}

impl<T> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            max_iters: 100,
            stop_on_increase: true,
            tolerance: 1e-6,
            reorth: false,
            ground_truth: None,
            record_iterates: false,
        }
    }
}

impl<T: Real> SolverOptions<T> {
    pub fn with_max_iters(max_iters: usize) -> Self {
        SolverOptions { max_iters, ..Default::default() }
    }

    pub fn validate(&self, domain_len: usize) -> Result<()> {
        if self.max_iters == 0 {
            return Err(param("max_iters must be at least 1"));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(param("tolerance must be a nonnegative number"));
        }
        if let Some(gt) = &self.ground_truth {
            if gt.len() != domain_len {
                return Err(Error::Dimension(format!(
                    "ground truth has {} values, operator domain is {domain_len}",
                    gt.len()
                )));
            }
        }
        Ok(())
    }
}

/// Number of stored basis vectors, for methods that keep their basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StoredBasis {
    pub domain: usize,
    pub range: usize,
}

#[derive(Debug, Clone)]
pub struct SolveResult<T> {
    pub x: Vec<T>,
    pub iterations: usize,
    pub stop_reason: StopReason,
    pub log: ConvergenceLog,
    /// Every iterate, if requested.
    pub iterates: Option<Vec<Vec<T>>>,
    /// Log indices where a new outer cycle starts (inner-outer schemes only).
    pub cycle_starts: Vec<usize>,
    pub warnings: Vec<String>,
    pub stored_basis: Option<StoredBasis>,
}

/// Shared bookkeeping: logging, explicit residuals and the stopping rules.
pub(crate) struct Recorder<'a, T: Real, P: ?Sized> {
    pair: &'a P,
    b: &'a [T],
    bnorm: f64,
    opts: &'a SolverOptions<T>,
    log: ConvergenceLog,
    iterates: Option<Vec<Vec<T>>>,
    last_x: Vec<T>,
    lambdas: Vec<f64>,
    errors: Vec<f64>,
}

impl<'a, T: Real, P: OperatorPair<T> + ?Sized> Recorder<'a, T, P> {
    pub(crate) fn new(name: &str, pair: &'a P, b: &'a [T], opts: &'a SolverOptions<T>) -> Result<Self> {
        check_rhs(pair, b)?;
        opts.validate(pair.domain_len())?;
        let bnorm = norm(b).as_f64();
        if !(bnorm > 0.0) || !bnorm.is_finite() {
            return Err(Error::DegenerateInput("data vector has zero or non-finite norm".into()));
        }
        Ok(Recorder {
            pair,
            b,
            bnorm,
            opts,
            log: ConvergenceLog::new(name, T::PRECISION, pair.matched()),
            iterates: opts.record_iterates.then(Vec::new),
            last_x: vec![T::zero(); pair.domain_len()],
            lambdas: Vec::new(),
            errors: Vec::new(),
        })
    }

    pub(crate) fn bnorm(&self) -> f64 {
        self.bnorm
    }

    pub(crate) fn len(&self) -> usize {
        self.log.len()
    }

    /// Logs iterate `x` and returns a stop reason if one applies.
    ///
    /// `residual` may carry a precomputed `b − A x`; otherwise one forward
    /// projection is spent. `check_increase = false` suppresses the
    /// increase rule for this entry.
    pub(crate) fn record(
        &mut self,
        x: &[T],
        implicit: f64,
        lambda: Option<f64>,
        residual: Option<&[T]>,
        check_increase: bool,
    ) -> Result<Option<StopReason>> {
        let iteration = self.log.len() + 1;
        if !all_finite(x) || !implicit.is_finite() {
            return Err(Error::Numerical { iteration, message: "non-finite value in iterate".into() });
        }
        let explicit = match residual {
            Some(r) => norm(r).as_f64() / self.bnorm,
            None => {
                let ax = self.pair.forward(x);
                let r2: f64 = ax.iter().zip(self.b).map(|(&a, &bi)| (a - bi).as_f64().powi(2)).sum();
                r2.sqrt() / self.bnorm
            }
        };
        if !explicit.is_finite() {
            return Err(Error::Numerical { iteration, message: "non-finite residual".into() });
        }
        let previous = self.log.explicit_residual.last().copied();
        self.log.implicit_residual.push(implicit);
        self.log.explicit_residual.push(explicit);
        if let Some(l) = lambda {
            self.lambdas.push(l);
        }
        if let Some(gt) = &self.opts.ground_truth {
            self.errors.push(crate::metrics::relative_error(x, gt)?);
        }
        if let Some(its) = self.iterates.as_mut() {
            its.push(x.to_vec());
        }
        self.last_x.copy_from_slice(x);

        if implicit <= self.opts.tolerance {
            return Ok(Some(StopReason::Tolerance));
        }
        if self.opts.stop_on_increase && check_increase {
            if let Some(prev) = previous {
                if explicit > prev * (1.0 + INCREASE_SLACK) {
                    return Ok(Some(StopReason::ResidualIncrease));
                }
            }
        }
        if self.log.len() >= self.opts.max_iters {
            return Ok(Some(StopReason::MaxIters));
        }
        Ok(None)
    }

    pub(crate) fn finish(self, stop_reason: StopReason) -> SolveResult<T> {
        let mut log = self.log;
        if self.opts.ground_truth.is_some() {
            log.relative_error = Some(self.errors);
        }
        if !self.lambdas.is_empty() {
            log.lambda = Some(self.lambdas);
        }
        SolveResult {
            x: self.last_x,
            iterations: log.len(),
            stop_reason,
            log,
            iterates: self.iterates,
            cycle_starts: Vec::new(),
            warnings: Vec::new(),
            stored_basis: None,
        }
    }
}
