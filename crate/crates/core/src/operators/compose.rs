//! Operator combinators: vertical stacking, scaled identity, weighted
//! gradient and closure-backed pairs.

use super::gradient::Gradient;
use super::OperatorPair;
use crate::error::{param, Result};
use crate::scalar::Real;

/// `[P; Q]`: range is the concatenation of both ranges, `back` sums both backprojections.
#[derive(Debug, Clone)]
pub struct Stack<P, Q> {
    pub top: P,
    pub bottom: Q,
}

impl<P, Q> Stack<P, Q> {
    pub fn new(top: P, bottom: Q) -> Self {
        Stack { top, bottom }
    }
}

impl<T: Real, P: OperatorPair<T>, Q: OperatorPair<T>> OperatorPair<T> for Stack<P, Q> {
    fn domain_len(&self) -> usize {
        self.top.domain_len()
    }

    fn range_len(&self) -> usize {
        self.top.range_len() + self.bottom.range_len()
    }

    fn matched(&self) -> bool {
        self.top.matched() && self.bottom.matched()
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        let (y1, y2) = y.split_at_mut(self.top.range_len());
        self.top.forward_into(x, y1);
        self.bottom.forward_into(x, y2);
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        let (y1, y2) = y.split_at(self.top.range_len());
        self.top.back_into(y1, x);
        let extra = self.bottom.back(y2);
        for (xi, e) in x.iter_mut().zip(extra) {
            *xi += e;
        }
    }
}

/// `s · I` on a space of dimension `n`.
#[derive(Debug, Clone, Copy)]
pub struct ScaledIdentity<T> {
    pub n: usize,
    pub scale: T,
}

impl<T: Real> OperatorPair<T> for ScaledIdentity<T> {
    fn domain_len(&self) -> usize {
        self.n
    }

    fn range_len(&self) -> usize {
        self.n
    }

    fn matched(&self) -> bool {
        true
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        for (yi, &xi) in y.iter_mut().zip(x) {
            *yi = self.scale * xi;
        }
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        self.forward_into(y, x)
    }
}

/// Tikhonov augmentation `[A; λI]` with backprojection `B y₁ + λ y₂`.
pub fn augment_tikhonov<T: Real, P: OperatorPair<T>>(pair: P, lambda: f64) -> Result<Stack<P, ScaledIdentity<T>>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(param(format!("Tikhonov parameter must be nonnegative, got {lambda}")));
    }
    let n = pair.domain_len();
    Ok(Stack::new(pair, ScaledIdentity { n, scale: T::of(lambda) }))
}

/// `s · diag(w) D`, with the per-voxel weight `w` applied to all three
/// gradient components of that voxel.
#[derive(Debug, Clone)]
pub struct WeightedGradient<T> {
    pub grad: Gradient,
    pub weights: Vec<T>,
    pub scale: T,
}

impl<T: Real> OperatorPair<T> for WeightedGradient<T> {
    fn domain_len(&self) -> usize {
        self.weights.len()
    }

    fn range_len(&self) -> usize {
        3 * self.weights.len()
    }

    fn matched(&self) -> bool {
        true
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        OperatorPair::<T>::forward_into(&self.grad, x, y);
        let n = self.weights.len();
        for (c, yi) in y.iter_mut().enumerate() {
            *yi *= self.scale * self.weights[c % n];
        }
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        let n = self.weights.len();
        let scaled: Vec<T> = y.iter().enumerate().map(|(c, &v)| v * self.scale * self.weights[c % n]).collect();
        OperatorPair::<T>::back_into(&self.grad, &scaled, x);
    }
}

/// Operator pair backed by two closures.
pub struct FnPair<F, G> {
    domain: usize,
    range: usize,
    matched: bool,
    forward: F,
    back: G,
}

impl<F, G> FnPair<F, G> {
    pub fn new(domain: usize, range: usize, matched: bool, forward: F, back: G) -> Self {
        FnPair { domain, range, matched, forward, back }
    }
}

impl<T, F, G> OperatorPair<T> for FnPair<F, G>
where
    T: Real,
    F: Fn(&[T], &mut [T]) + Sync,
    G: Fn(&[T], &mut [T]) + Sync,
{
    fn domain_len(&self) -> usize {
        self.domain
    }

    fn range_len(&self) -> usize {
        self.range
    }

    fn matched(&self) -> bool {
        self.matched
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        (self.forward)(x, y)
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        (self.back)(y, x)
    }
}
