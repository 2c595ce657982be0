//! Convergence diagnostics and CSV emission of iteration histories.

use std::io::Write;

use crate::error::{dim, param, Error, Result};
use crate::operators::OperatorPair;
use crate::scalar::{Precision, Real};
use crate::vecops::norm;

/// Fixed CSV header.
pub const CSV_HEADER: &str = "iter,implicit_residual,explicit_residual,relative_error,lambda";

/// Per-iteration history of one solve. Index `i` holds iteration `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceLog {
    pub solver: String,
    pub precision: Precision,
    pub matched: bool,
    pub implicit_residual: Vec<f64>,
    pub explicit_residual: Vec<f64>,
    pub relative_error: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
}

impl ConvergenceLog {
    pub fn new(solver: impl Into<String>, precision: Precision, matched: bool) -> Self {
        ConvergenceLog {
            solver: solver.into(),
            precision,
            matched,
            implicit_residual: Vec::new(),
            explicit_residual: Vec::new(),
            relative_error: None,
            lambda: None,
        }
    }

    pub fn len(&self) -> usize {
        self.implicit_residual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.implicit_residual.is_empty()
    }

    /// Checks that all present arrays have equal length.
    pub fn validate(&self) -> Result<()> {
        let n = self.implicit_residual.len();
        let ok = self.explicit_residual.len() == n
            && self.relative_error.as_ref().is_none_or(|e| e.len() == n)
            && self.lambda.as_ref().is_none_or(|l| l.len() == n);
        if ok {
            Ok(())
        } else {
            Err(dim("convergence log arrays have different lengths"))
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        self.validate()?;
        writeln!(out, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            let cell = |v: Option<f64>| v.map(format_decimal).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{}",
                i + 1,
                format_decimal(self.implicit_residual[i]),
                format_decimal(self.explicit_residual[i]),
                cell(self.relative_error.as_ref().map(|e| e[i])),
                cell(self.lambda.as_ref().map(|l| l[i])),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("CSV output is ASCII"))
    }
}

/// Plain decimal notation with 12 significant digits (no exponent).
pub fn format_decimal(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

/// `‖A x − b‖ / ‖b‖` using one forward application.
pub fn relative_residual<T: Real, P: OperatorPair<T> + ?Sized>(pair: &P, x: &[T], b: &[T]) -> Result<f64> {
    if x.len() != pair.domain_len() || b.len() != pair.range_len() {
        return Err(dim("iterate or data does not match the operator shape"));
    }
    let bnorm = norm(b).as_f64();
    if bnorm == 0.0 {
        return Err(Error::DegenerateInput("data vector is zero".into()));
    }
    let ax = pair.forward(x);
    let r: f64 = ax
        .iter()
        .zip(b)
        .map(|(&a, &bi)| {
            let d = (a - bi).as_f64();
            d * d
        })
        .sum::<f64>()
        .sqrt();
    Ok(r / bnorm)
}

/// `‖x − gt‖ / ‖gt‖`.
pub fn relative_error<T: Real>(x: &[T], gt: &[T]) -> Result<f64> {
    if x.len() != gt.len() {
        return Err(dim(format!("iterate has {} values, ground truth {}", x.len(), gt.len())));
    }
    let gnorm: f64 = gt.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt();
    if gnorm == 0.0 {
        return Err(Error::DegenerateInput("ground truth is zero".into()));
    }
    let d: f64 = x.iter().zip(gt).map(|(&a, &g)| (a.as_f64() - g.as_f64()).powi(2)).sum::<f64>().sqrt();
    Ok(d / gnorm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Semiconvergence {
    /// Zero-based index of the first minimum of the error curve.
    pub min_index: usize,
    /// `(final − min) / min`.
    pub rebound_ratio: f64,
}

pub fn detect_semiconvergence(log: &ConvergenceLog) -> Result<Semiconvergence> {
    let err = log.relative_error.as_ref().ok_or_else(|| param("convergence log has no relative error history"))?;
    semiconvergence_of(err)
}

/// Semiconvergence statistics of a raw error curve.
pub fn semiconvergence_of(err: &[f64]) -> Result<Semiconvergence> {
    if err.len() < 3 {
        return Err(param("semiconvergence detection needs at least 3 iterations"));
    }
    let mut min_index = 0;
    for (i, &e) in err.iter().enumerate() {
        if e < err[min_index] {
            min_index = i;
        }
    }
    let min = err[min_index];
    let last = *err.last().unwrap();
    let rebound_ratio = if min > 0.0 { (last - min) / min } else { 0.0 };
    Ok(Semiconvergence { min_index, rebound_ratio })
}

/// `max_i |explicit_i − implicit_i| / max(implicit_i, 1e-30)`.
pub fn residual_divergence(log: &ConvergenceLog) -> Result<f64> {
    if log.implicit_residual.is_empty() || log.explicit_residual.is_empty() {
        return Err(param("residual divergence needs both residual histories"));
    }
    if log.implicit_residual.len() != log.explicit_residual.len() {
        return Err(dim("residual histories have different lengths"));
    }
    Ok(log
        .implicit_residual
        .iter()
        .zip(&log.explicit_residual)
        .map(|(&i, &e)| (e - i).abs() / i.max(1e-30))
        .fold(0.0, f64::max))
}
