//! Linear operator pairs `(A, B)` where `A` maps volumes to projections and
//! `B` is a (possibly approximate) adjoint.

mod compose;
mod dense;
mod geometry;
mod gradient;
mod projector;
mod volume;

pub use compose::{augment_tikhonov, FnPair, ScaledIdentity, Stack, WeightedGradient};
pub use dense::{dense_pair, DensePair};
pub use geometry::{equispaced_angles, ConeGeometry, GeometryMode, VolumeShape};
pub use gradient::{evaluate_tv, gradient, gradient_adjoint, Gradient, GradientField};
pub use projector::{back_project, forward_project, Backprojector, CtProjector};
pub use volume::{ProjectionSet, Volume};

use crate::error::{dim, Result};
use crate::scalar::Real;
use crate::vecops::{dot, norm};

/// A forward map and a backprojector acting on flat arrays.
///
/// `forward_into` computes `y = A x`; `back_into` computes `x = B y`. Both
/// overwrite their output. Implementations must be pure and thread-safe.
pub trait OperatorPair<T: Real>: Sync {
    /// Number of unknowns (length of `x`).
    fn domain_len(&self) -> usize;
    /// Number of measurements (length of `y`).
    fn range_len(&self) -> usize;
    /// True when `B` is the exact transpose of `A`.
    fn matched(&self) -> bool;

    fn forward_into(&self, x: &[T], y: &mut [T]);
    fn back_into(&self, y: &[T], x: &mut [T]);

    fn forward(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.range_len()];
        self.forward_into(x, &mut y);
        y
    }

    fn back(&self, y: &[T]) -> Vec<T> {
        let mut x = vec![T::zero(); self.domain_len()];
        self.back_into(y, &mut x);
        x
    }
}

impl<T: Real, P: OperatorPair<T> + ?Sized> OperatorPair<T> for &P {
    fn domain_len(&self) -> usize {
        (**self).domain_len()
    }
    fn range_len(&self) -> usize {
        (**self).range_len()
    }
    fn matched(&self) -> bool {
        (**self).matched()
    }
    fn forward_into(&self, x: &[T], y: &mut [T]) {
        (**self).forward_into(x, y)
    }
    fn back_into(&self, y: &[T], x: &mut [T]) {
        (**self).back_into(y, x)
    }
}

pub(crate) fn check_rhs<T: Real, P: OperatorPair<T> + ?Sized>(pair: &P, b: &[T]) -> Result<()> {
    if b.len() != pair.range_len() {
        return Err(dim(format!("right-hand side has length {}, operator range is {}", b.len(), pair.range_len())));
    }
    Ok(())
}

/// Relative adjoint mismatch `|<Ax, y> - <x, By>| / (‖Ax‖ ‖y‖)`, evaluated in `f64`.
pub fn adjoint_mismatch<T: Real, P: OperatorPair<T> + ?Sized>(pair: &P, x: &[T], y: &[T]) -> f64 {
    let ax = pair.forward(x);
    let by = pair.back(y);
    let to64 = |v: &[T]| v.iter().map(|a| a.as_f64()).collect::<Vec<_>>();
    let (ax, by, x, y) = (to64(&ax), to64(&by), to64(x), to64(y));
    let lhs = dot(&ax, &y);
    let rhs = dot(&x, &by);
    let denom = norm(&ax) * norm(&y);
    if denom == 0.0 {
        (lhs - rhs).abs()
    } else {
        (lhs - rhs).abs() / denom
    }
}
