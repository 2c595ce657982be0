//! Forward-difference gradient `D` and its transpose.
//!
//! `[D_x v]_{ijk} = v_{i+1,j,k} - v_{ijk}` for `i < nx - 1` and zero on the far
//! face (the grid is extended by replicating the boundary voxel). The same rule
//! applies along y and z. No division by the voxel spacing.

use super::volume::Volume;
use super::OperatorPair;
use crate::error::{dim, Result};
use crate::scalar::Real;

/// Three directional differences, each with the length of the source volume.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub spacing: f64,
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    pub dz: Vec<T>,
}

impl<T: Real> GradientField<T> {
    pub fn new(nx: usize, ny: usize, nz: usize, spacing: f64, dx: Vec<T>, dy: Vec<T>, dz: Vec<T>) -> Result<Self> {
        let n = nx * ny * nz;
        if n == 0 || dx.len() != n || dy.len() != n || dz.len() != n {
            return Err(dim(format!(
                "gradient components must each have {n} values (got {}, {}, {})",
                dx.len(),
                dy.len(),
                dz.len()
            )));
        }
        Ok(GradientField { nx, ny, nz, spacing, dx, dy, dz })
    }

    /// Pointwise magnitude `sqrt(dx² + dy² + dz²)`.
    pub fn magnitude(&self) -> Vec<T> {
        self.dx.iter().zip(&self.dy).zip(&self.dz).map(|((&a, &b), &c)| (a * a + b * b + c * c).sqrt()).collect()
    }
}

/// The gradient as an operator pair from volumes to stacked `[dx; dy; dz]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gradient {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Gradient {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Gradient { nx, ny, nz }
    }

    pub fn for_volume<T>(vol: &Volume<T>) -> Self {
        Gradient { nx: vol.nx, ny: vol.ny, nz: vol.nz }
    }

    fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub(crate) fn apply<T: Real>(&self, v: &[T], dx: &mut [T], dy: &mut [T], dz: &mut [T]) {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = i + nx * (j + ny * k);
                    let c = v[p];
                    dx[p] = if i + 1 < nx { v[p + 1] - c } else { T::zero() };
                    dy[p] = if j + 1 < ny { v[p + nx] - c } else { T::zero() };
                    dz[p] = if k + 1 < nz { v[p + nx * ny] - c } else { T::zero() };
                }
            }
        }
    }

    pub(crate) fn apply_adjoint<T: Real>(&self, dx: &[T], dy: &[T], dz: &[T], out: &mut [T]) {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    let p = i + nx * (j + ny * k);
                    let mut acc = T::zero();
                    if i + 1 < nx {
                        acc -= dx[p];
                    }
                    if i > 0 {
                        acc += dx[p - 1];
                    }
                    if j + 1 < ny {
                        acc -= dy[p];
                    }
                    if j > 0 {
                        acc += dy[p - nx];
                    }
                    if k + 1 < nz {
                        acc -= dz[p];
                    }
                    if k > 0 {
                        acc += dz[p - nx * ny];
                    }
                    out[p] = acc;
                }
            }
        }
    }
}

impl<T: Real> OperatorPair<T> for Gradient {
    fn domain_len(&self) -> usize {
        self.len()
    }

    fn range_len(&self) -> usize {
        3 * self.len()
    }

    fn matched(&self) -> bool {
        true
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        let n = self.len();
        assert_eq!(x.len(), n);
        assert_eq!(y.len(), 3 * n);
        let (dx, rest) = y.split_at_mut(n);
        let (dy, dz) = rest.split_at_mut(n);
        self.apply(x, dx, dy, dz);
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        let n = self.len();
        assert_eq!(y.len(), 3 * n);
        assert_eq!(x.len(), n);
        self.apply_adjoint(&y[..n], &y[n..2 * n], &y[2 * n..], x);
    }
}

pub fn gradient<T: Real>(vol: &Volume<T>) -> GradientField<T> {
    let n = vol.len();
    let mut dx = vec![T::zero(); n];
    let mut dy = vec![T::zero(); n];
    let mut dz = vec![T::zero(); n];
    Gradient::for_volume(vol).apply(&vol.data, &mut dx, &mut dy, &mut dz);
    GradientField { nx: vol.nx, ny: vol.ny, nz: vol.nz, spacing: vol.spacing, dx, dy, dz }
}

/// Transpose of [`gradient`] (a negative divergence).
pub fn gradient_adjoint<T: Real>(g: &GradientField<T>) -> Result<Volume<T>> {
    let n = g.nx * g.ny * g.nz;
    if g.dx.len() != n || g.dy.len() != n || g.dz.len() != n {
        return Err(dim("gradient field components do not match its shape"));
    }
    let mut out = vec![T::zero(); n];
    Gradient::new(g.nx, g.ny, g.nz).apply_adjoint(&g.dx, &g.dy, &g.dz, &mut out);
    Volume::new(g.nx, g.ny, g.nz, g.spacing, out)
}

/// Isotropic total variation `Σ_i sqrt([D_x v]_i² + [D_y v]_i² + [D_z v]_i²)`.
pub fn evaluate_tv<T: Real>(vol: &Volume<T>) -> f64 {
    gradient(vol).magnitude().iter().map(|m| m.as_f64()).sum()
}
