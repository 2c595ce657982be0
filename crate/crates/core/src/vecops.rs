//! Sequential BLAS-1 style helpers.
//!
//! Reductions run in a fixed left-to-right order so that results do not
//! depend on the thread configuration.

use crate::scalar::Real;

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// `a - b`
pub fn sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn all_finite<T: Real>(a: &[T]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Normalizes `x` in place and returns its former norm; leaves a zero vector untouched.
pub fn normalize<T: Real>(x: &mut [T]) -> T {
    let n = norm(x);
    if n > T::zero() {
        scale(T::one() / n, x);
    }
    n
}

/// Two passes of classical Gram–Schmidt of `x` against the orthonormal `basis`.
pub fn cgs2<T: Real>(basis: &[Vec<T>], x: &mut [T]) {
    for _ in 0..2 {
        let coeffs: Vec<T> = basis.iter().map(|q| dot(q, x)).collect();
        for (q, c) in basis.iter().zip(coeffs) {
            axpy(-c, q, x);
        }
    }
}

pub fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

pub fn from_f64<T: Real>(x: &[f64]) -> Vec<T> {
    x.iter().map(|&v| T::of(v)).collect()
}
