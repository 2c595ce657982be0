use std::fmt;
use std::str::FromStr;

use crate::error::{param, Error, Result};
use crate::operators::Volume;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PhantomKind {
    SheppLogan3d,
    SheppLogan2d,
    /// Nested cubes, `n³`.
    PiecewiseBlocks,
    /// Nested squares, `n² × 1`.
    PiecewiseBlocks2d,
}

impl PhantomKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PhantomKind::SheppLogan3d => "shepp_logan_3d",
            PhantomKind::SheppLogan2d => "shepp_logan_2d",
            PhantomKind::PiecewiseBlocks => "piecewise_blocks",
            PhantomKind::PiecewiseBlocks2d => "piecewise_blocks_2d",
        }
    }

    /// Default physical width of the grid. Chosen so that the longest line
    /// integrals are about 10 (Shepp-Logan) or 4 (blocks), which puts the
    /// central rays in the low-count regime for `I0` between 1e4 and 1e5.
    pub fn default_field_of_view(self) -> f64 {
        match self {
            PhantomKind::SheppLogan3d | PhantomKind::SheppLogan2d => 40.0,
            PhantomKind::PiecewiseBlocks | PhantomKind::PiecewiseBlocks2d => 4.0,
        }
    }

    pub fn is_2d(self) -> bool {
        matches!(self, PhantomKind::SheppLogan2d | PhantomKind::PiecewiseBlocks2d)
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shepp_logan_3d" => Ok(PhantomKind::SheppLogan3d),
            "shepp_logan_2d" => Ok(PhantomKind::SheppLogan2d),
            "piecewise_blocks" => Ok(PhantomKind::PiecewiseBlocks),
            "piecewise_blocks_2d" => Ok(PhantomKind::PiecewiseBlocks2d),
            _ => Err(Error::Parse(format!("unknown phantom kind '{s}'"))),
        }
    }
}

/// One ellipsoid in normalized coordinates (the grid spans `[-1, 1]` along
/// each axis). `angle` rotates the x-y semi-axes about z, in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub intensity: f64,
    pub semi_axes: [f64; 3],
    pub center: [f64; 3],
    pub angle: f64,
}

impl Ellipsoid {
    pub fn contains(&self, p: [f64; 3]) -> bool {
        let (s, c) = self.angle.to_radians().sin_cos();
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let dz = p[2] - self.center[2];
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        let [a, b, cz] = self.semi_axes;
        (u / a).powi(2) + (v / b).powi(2) + (dz / cz).powi(2) <= 1.0
    }

    /// Reflection through the `x = 0` plane.
    pub fn mirrored(&self) -> Self {
        Ellipsoid { center: [-self.center[0], self.center[1], self.center[2]], angle: -self.angle, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidPhantom {
    pub ellipsoids: Vec<Ellipsoid>,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub spacing: f64,
}

impl EllipsoidPhantom {
    pub fn new(ellipsoids: Vec<Ellipsoid>, nx: usize, ny: usize, nz: usize, spacing: f64) -> Result<Self> {
        for e in &ellipsoids {
            if e.semi_axes.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
                return Err(param("ellipsoid semi-axes must be positive"));
            }
            if !e.intensity.is_finite() || e.center.iter().any(|c| !c.is_finite()) || !e.angle.is_finite() {
                return Err(param("ellipsoid parameters must be finite"));
            }
        }
        if nx == 0 || ny == 0 || nz == 0 || !(spacing > 0.0) {
            return Err(param("phantom grid must be non-empty with positive spacing"));
        }
        Ok(EllipsoidPhantom { ellipsoids, nx, ny, nz, spacing })
    }

    /// Normalized coordinate of voxel `i` along an axis of `n` voxels; a
    /// single-voxel axis sits at 0.
    pub fn coordinate(i: usize, n: usize) -> f64 {
        (i as f64 - (n as f64 - 1.0) / 2.0) / (n as f64 / 2.0)
    }

    /// Sum of intensities of the ellipsoids containing `p`.
    pub fn value_at(&self, p: [f64; 3]) -> f64 {
        self.ellipsoids.iter().filter(|e| e.contains(p)).map(|e| e.intensity).sum()
    }

    pub fn rasterize<T: Real>(&self) -> Volume<T> {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        let mut data = Vec::with_capacity(nx * ny * nz);
        for k in 0..nz {
            let z = if nz == 1 { 0.0 } else { Self::coordinate(k, nz) };
            for j in 0..ny {
                let y = Self::coordinate(j, ny);
                for i in 0..nx {
                    data.push(T::of(self.value_at([Self::coordinate(i, nx), y, z])));
                }
            }
        }
        Volume { nx, ny, nz, spacing: self.spacing, data }
    }
}

/// Modified Shepp-Logan ellipses: (A, a, b, x0, y0, phi in degrees).
const SHEPP_LOGAN: [[f64; 6]; 10] = [
    [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
    [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
    [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
    [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
    [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
    [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
    [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
    [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
    [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
    [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
];
/// Third semi-axis and z-center of the 3D extension.
const SHEPP_LOGAN_Z: [[f64; 2]; 10] = [
    [0.81, 0.0],
    [0.78, 0.0],
    [0.22, 0.0],
    [0.28, 0.0],
    [0.41, 0.0],
    [0.05, -0.15],
    [0.05, 0.25],
    [0.05, 0.25],
    [0.02, 0.0],
    [0.02, 0.0],
];

pub fn shepp_logan_2d_table() -> Vec<Ellipsoid> {
    SHEPP_LOGAN
        .iter()
        .map(|r| Ellipsoid { intensity: r[0], semi_axes: [r[1], r[2], 1.0], center: [r[3], r[4], 0.0], angle: r[5] })
        .collect()
}

pub fn shepp_logan_3d_table() -> Vec<Ellipsoid> {
    SHEPP_LOGAN
        .iter()
        .zip(&SHEPP_LOGAN_Z)
        .map(|(r, z)| Ellipsoid {
            intensity: r[0],
            semi_axes: [r[1], r[2], z[0]],
            center: [r[3], r[4], z[1]],
            angle: r[5],
        })
        .collect()
}

fn blocks<T: Real>(n: usize, nz: usize, spacing: f64) -> Volume<T> {
    let outer = (n / 8)..(n - n / 8);
    let inner = (3 * n / 8)..(n - 3 * n / 8);
    let (outer_z, inner_z) = if nz == 1 { (0..1, 0..1) } else { (outer.clone(), inner.clone()) };
    let mut data = Vec::with_capacity(n * n * nz);
    for k in 0..nz {
        for j in 0..n {
            for i in 0..n {
                let v = if inner.contains(&i) && inner.contains(&j) && inner_z.contains(&k) {
                    2.0
                } else if outer.contains(&i) && outer.contains(&j) && outer_z.contains(&k) {
                    1.0
                } else {
                    0.0
                };
                data.push(T::of(v));
            }
        }
    }
    Volume { nx: n, ny: n, nz, spacing, data }
}

/// Phantom on an `n`-voxel grid spanning [`PhantomKind::default_field_of_view`].
pub fn make_phantom<T: Real>(kind: PhantomKind, n: usize) -> Result<Volume<T>> {
    make_phantom_with_spacing(kind, n, kind.default_field_of_view() / n.max(1) as f64)
}

pub fn make_phantom_with_spacing<T: Real>(kind: PhantomKind, n: usize, spacing: f64) -> Result<Volume<T>> {
    if n < 8 {
        return Err(param(format!("phantom size must be at least 8, got {n}")));
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(param("phantom spacing must be positive"));
    }
    Ok(match kind {
        PhantomKind::SheppLogan2d => EllipsoidPhantom::new(shepp_logan_2d_table(), n, n, 1, spacing)?.rasterize(),
        PhantomKind::SheppLogan3d => EllipsoidPhantom::new(shepp_logan_3d_table(), n, n, n, spacing)?.rasterize(),
        PhantomKind::PiecewiseBlocks => blocks(n, n, spacing),
        PhantomKind::PiecewiseBlocks2d => blocks(n, 1, spacing),
    })
}
