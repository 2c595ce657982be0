use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeometryMode {
    Parallel2d,
    Parallel3d,
    Cone3d,
}

impl std::str::FromStr for GeometryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "parallel2d" => Ok(GeometryMode::Parallel2d),
            "parallel3d" => Ok(GeometryMode::Parallel3d),
            "cone3d" => Ok(GeometryMode::Cone3d),
            other => Err(format!("unknown geometry mode '{other}'")),
        }
    }
}

impl GeometryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            GeometryMode::Parallel2d => "parallel2d",
            GeometryMode::Parallel3d => "parallel3d",
            GeometryMode::Cone3d => "cone3d",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolumeShape {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Isotropic voxel size in mm.
    pub spacing: f64,
}

impl VolumeShape {
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn half_diagonal(&self) -> f64 {
        let (x, y, z) = (self.nx as f64, self.ny as f64, self.nz as f64);
        0.5 * self.spacing * (x * x + y * y + z * z).sqrt()
    }
}

/// Circular-trajectory acquisition. The source rotates about the z axis;
/// at angle θ it sits on the `(cos θ, sin θ, 0)` side of the origin and the
/// detector column axis points along `(-sin θ, cos θ, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeGeometry {
    pub mode: GeometryMode,
    /// Source to rotation axis (mm). Only used in cone mode.
    pub source_to_origin: f64,
    /// Rotation axis to detector (mm).
    pub origin_to_detector: f64,
    /// Square detector pixel size (mm).
    pub detector_pixel_size: f64,
    pub nu: usize,
    pub nv: usize,
    pub volume: VolumeShape,
    /// View angles in radians. Any finite value is accepted; only θ mod 2π matters.
    pub angles: Vec<f64>,
}

/// `n` equispaced angles `i·range/n` for `i = 0..n`.
pub fn equispaced_angles(n: usize, range: f64) -> Vec<f64> {
    (0..n).map(|i| i as f64 * range / n as f64).collect()
}

impl ConeGeometry {
    /// Single-slice parallel beam on an `n × n` grid with a detector wide
    /// enough to cover the grid diagonal. Views span `[0, π)`: opposite
    /// parallel views measure the same line integrals.
    pub fn parallel2d(n: usize, spacing: f64, n_angles: usize) -> Result<Self> {
        let nu = (n as f64 * std::f64::consts::SQRT_2).ceil() as usize;
        Self::new(
            GeometryMode::Parallel2d,
            VolumeShape { nx: n, ny: n, nz: 1, spacing },
            equispaced_angles(n_angles, PI),
            nu,
            1,
            spacing,
            0.0,
            n as f64 * spacing,
        )
    }

    pub fn parallel3d(n: usize, spacing: f64, n_angles: usize) -> Result<Self> {
        let nu = (n as f64 * std::f64::consts::SQRT_2).ceil() as usize;
        Self::new(
            GeometryMode::Parallel3d,
            VolumeShape { nx: n, ny: n, nz: n, spacing },
            equispaced_angles(n_angles, PI),
            nu,
            n,
            spacing,
            0.0,
            n as f64 * spacing,
        )
    }

    /// Cone beam with the detector sized to cover the magnified volume.
    pub fn cone3d(
        n: usize,
        spacing: f64,
        n_angles: usize,
        source_to_origin: f64,
        origin_to_detector: f64,
    ) -> Result<Self> {
        let shape = VolumeShape { nx: n, ny: n, nz: n, spacing };
        let r = shape.half_diagonal();
        let mag = (source_to_origin + origin_to_detector) / (source_to_origin - r).max(f64::EPSILON);
        let pixel = spacing * (source_to_origin + origin_to_detector) / source_to_origin;
        let nu = ((2.0 * r * mag / pixel).ceil() as usize).max(1);
        let nv = nu;
        Self::new(
            GeometryMode::Cone3d,
            shape,
            equispaced_angles(n_angles, TAU),
            nu,
            nv,
            pixel,
            source_to_origin,
            origin_to_detector,
        )
    }

    /// Same setup with a different view list.
    pub fn with_angles(mut self, angles: Vec<f64>) -> Result<Self> {
        self.angles = angles;
        self.validate()?;
        Ok(self)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mode: GeometryMode,
        volume: VolumeShape,
        angles: Vec<f64>,
        nu: usize,
        nv: usize,
        detector_pixel_size: f64,
        source_to_origin: f64,
        origin_to_detector: f64,
    ) -> Result<Self> {
        let geom =
            ConeGeometry { mode, source_to_origin, origin_to_detector, detector_pixel_size, nu, nv, volume, angles };
        geom.validate()?;
        Ok(geom)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Geometry(m));
        let v = &self.volume;
        if v.nx == 0 || v.ny == 0 || v.nz == 0 {
            return bad("volume dimensions must be positive".into());
        }
        if !(v.spacing > 0.0 && v.spacing.is_finite()) {
            return bad(format!("voxel spacing must be positive, got {}", v.spacing));
        }
        if self.angles.is_empty() {
            return bad("at least one projection angle is required".into());
        }
        if self.angles.iter().any(|a| !a.is_finite()) {
            return bad("projection angles must be finite".into());
        }
        if self.nu == 0 || self.nv == 0 {
            return bad("detector must have at least one pixel".into());
        }
        if !(self.detector_pixel_size > 0.0 && self.detector_pixel_size.is_finite()) {
            return bad("detector pixel size must be positive".into());
        }
        if !(self.origin_to_detector > 0.0 && self.origin_to_detector.is_finite()) {
            return bad("origin-to-detector distance must be positive".into());
        }
        match self.mode {
            GeometryMode::Parallel2d => {
                if v.nz != 1 || self.nv != 1 {
                    return bad("parallel2d requires nz = 1 and a single detector row".into());
                }
            }
            GeometryMode::Parallel3d => {}
            GeometryMode::Cone3d => {
                if !(self.source_to_origin > 0.0 && self.source_to_origin.is_finite()) {
                    return bad("source-to-origin distance must be positive".into());
                }
                if self.source_to_origin <= v.half_diagonal() {
                    return bad(format!(
                        "source at {} mm lies inside the volume (half diagonal {} mm)",
                        self.source_to_origin,
                        v.half_diagonal()
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn range_len(&self) -> usize {
        self.angles.len() * self.nu * self.nv
    }

    /// Detector pixel center offsets `(u, v)` in mm for column `m`, row `l`.
    pub(crate) fn pixel_center(&self, m: usize, l: usize) -> (f64, f64) {
        let d = self.detector_pixel_size;
        ((m as f64 - (self.nu as f64 - 1.0) * 0.5) * d, (l as f64 - (self.nv as f64 - 1.0) * 0.5) * d)
    }
}
