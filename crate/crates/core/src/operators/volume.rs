use std::f64::consts::TAU;

use crate::error::{dim, param, Result};
use crate::scalar::Real;

/// A voxel grid with isotropic spacing (mm). Index order is x fastest, then y, then z.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume<T> {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub spacing: f64,
    pub data: Vec<T>,
}

impl<T: Real> Volume<T> {
    pub fn new(nx: usize, ny: usize, nz: usize, spacing: f64, data: Vec<T>) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(dim("volume dimensions must be positive"));
        }
        if !(spacing > 0.0 && spacing.is_finite()) {
            return Err(param(format!("voxel spacing must be positive, got {spacing}")));
        }
        if data.len() != nx * ny * nz {
            return Err(dim(format!("volume data has {} values, expected {}x{}x{}", data.len(), nx, ny, nz)));
        }
        Ok(Volume { nx, ny, nz, spacing, data })
    }

    pub fn zeros(nx: usize, ny: usize, nz: usize, spacing: f64) -> Result<Self> {
        Self::new(nx, ny, nz, spacing, vec![T::zero(); nx * ny * nz])
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> T {
        self.data[self.index(i, j, k)]
    }

    pub fn same_shape(&self, other: &Volume<T>) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.nz == other.nz
    }

    pub fn cast<U: Real>(&self) -> Volume<U> {
        Volume {
            nx: self.nx,
            ny: self.ny,
            nz: self.nz,
            spacing: self.spacing,
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Stacked detector measurements. Index order is detector column fastest,
/// then detector row, then angle.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet<T> {
    pub n_angles: usize,
    pub nu: usize,
    pub nv: usize,
    /// Radians, strictly increasing in `[0, 2π)`.
    pub angles: Vec<f64>,
    pub data: Vec<T>,
}

impl<T: Real> ProjectionSet<T> {
    pub fn new(nu: usize, nv: usize, angles: Vec<f64>, data: Vec<T>) -> Result<Self> {
        let n_angles = angles.len();
        if n_angles == 0 || nu == 0 || nv == 0 {
            return Err(dim("projection set needs at least one angle and one detector pixel"));
        }
        validate_angles(&angles)?;
        if data.len() != n_angles * nu * nv {
            return Err(dim(format!("projection data has {} values, expected {}x{}x{}", data.len(), n_angles, nv, nu)));
        }
        Ok(ProjectionSet { n_angles, nu, nv, angles, data })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn cast<U: Real>(&self) -> ProjectionSet<U> {
        ProjectionSet {
            n_angles: self.n_angles,
            nu: self.nu,
            nv: self.nv,
            angles: self.angles.clone(),
            data: self.data.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

pub(crate) fn validate_angles(angles: &[f64]) -> Result<()> {
    for (i, &a) in angles.iter().enumerate() {
        if !(a.is_finite() && (0.0..TAU).contains(&a)) {
            return Err(param(format!("angle {i} = {a} lies outside [0, 2π)")));
        }
        if i > 0 && a <= angles[i - 1] {
            return Err(param("angles must be strictly increasing"));
        }
    }
    Ok(())
}
