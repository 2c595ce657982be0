//! Ray-driven projector with slice interpolation (Joseph's method).
//!
//! Each ray is stepped through the voxel-center planes orthogonal to its
//! dominant axis. At every plane the volume is bilinearly interpolated in the
//! two remaining axes (zero outside the grid) and weighted by the step length
//! `h / |d_a|`. The matched backprojector scatters the very same weights, so it
//! is the exact transpose. The voxel-driven backprojector instead samples the
//! detector at each voxel's projected position, which is only an approximate
//! adjoint.

use std::f64::consts::TAU;
use std::marker::PhantomData;

use rayon::prelude::*;

use super::geometry::{ConeGeometry, GeometryMode};
use super::volume::{ProjectionSet, Volume};
use super::OperatorPair;
use crate::error::{dim, Result};
use crate::scalar::Real;

/// Which backprojector the pair uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backprojector {
    /// Exact transpose of the forward projector.
    Matched,
    /// Interpolating voxel-driven backprojection (not the transpose).
    VoxelDriven,
}

impl std::str::FromStr for Backprojector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matched" => Ok(Backprojector::Matched),
            "voxel_driven" => Ok(Backprojector::VoxelDriven),
            other => Err(format!("unknown backprojector '{other}'")),
        }
    }
}

impl Backprojector {
    pub fn as_str(self) -> &'static str {
        match self {
            Backprojector::Matched => "matched",
            Backprojector::VoxelDriven => "voxel_driven",
        }
    }
}

/// Angles processed per partial volume in the matched backprojector. Fixed so
/// that the summation order does not depend on the thread count.
const ANGLE_BLOCK: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Frame {
    /// Unit vector from the origin towards the source.
    src: [f64; 3],
    /// Detector column axis.
    eu: [f64; 3],
}

/// Projector/backprojector pair for a fixed geometry.
#[derive(Debug, Clone)]
pub struct CtProjector<T> {
    geom: ConeGeometry,
    variant: Backprojector,
    frames: Vec<Frame>,
    _scalar: PhantomData<T>,
}

impl<T: Real> CtProjector<T> {
    pub fn new(geom: ConeGeometry, variant: Backprojector) -> Result<Self> {
        geom.validate()?;
        let frames = geom
            .angles
            .iter()
            .map(|&a| {
                let a = a.rem_euclid(TAU);
                let (s, c) = a.sin_cos();
                Frame { src: [c, s, 0.0], eu: [-s, c, 0.0] }
            })
            .collect();
        Ok(CtProjector { geom, variant, frames, _scalar: PhantomData })
    }

    pub fn geometry(&self) -> &ConeGeometry {
        &self.geom
    }

    pub fn variant(&self) -> Backprojector {
        self.variant
    }

    /// Source point and unit direction of the ray hitting pixel `(m, l)` at view `a`.
    fn ray(&self, a: usize, m: usize, l: usize) -> ([f64; 3], [f64; 3]) {
        let f = &self.frames[a];
        let (u, v) = self.geom.pixel_center(m, l);
        match self.geom.mode {
            GeometryMode::Parallel2d | GeometryMode::Parallel3d => {
                let o = [u * f.eu[0], u * f.eu[1], v];
                let d = [-f.src[0], -f.src[1], 0.0];
                (o, d)
            }
            GeometryMode::Cone3d => {
                let dso = self.geom.source_to_origin;
                let dod = self.geom.origin_to_detector;
                let o = [dso * f.src[0], dso * f.src[1], 0.0];
                let p = [-dod * f.src[0] + u * f.eu[0], -dod * f.src[1] + u * f.eu[1], v];
                let mut d = [p[0] - o[0], p[1] - o[1], p[2] - o[2]];
                let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                for c in d.iter_mut() {
                    *c /= n;
                }
                (o, d)
            }
        }
    }

    /// Visits every `(voxel index, weight)` contribution of one ray.
    fn trace(&self, origin: [f64; 3], dir: [f64; 3], mut visit: impl FnMut(usize, f64)) {
        let vs = &self.geom.volume;
        let n = [vs.nx, vs.ny, vs.nz];
        let h = vs.spacing;
        let a = (0..3).max_by(|&i, &j| dir[i].abs().total_cmp(&dir[j].abs())).unwrap_or(0);
        let (b1, b2) = match a {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        let step = h / dir[a].abs();
        let center = |axis: usize| (n[axis] as f64 - 1.0) * 0.5;
        let stride = [1, n[0], n[0] * n[1]];

        for s in 0..n[a] {
            let plane = (s as f64 - center(a)) * h;
            let t = (plane - origin[a]) / dir[a];
            let q1 = (origin[b1] + t * dir[b1]) / h + center(b1);
            let q2 = (origin[b2] + t * dir[b2]) / h + center(b2);
            if q1 <= -1.0 || q1 >= n[b1] as f64 || q2 <= -1.0 || q2 >= n[b2] as f64 {
                continue;
            }
            let f1 = q1.floor();
            let f2 = q2.floor();
            let (w1, w2) = (q1 - f1, q2 - f2);
            let (i1, i2) = (f1 as isize, f2 as isize);
            let base = s * stride[a];
            for (d1, c1) in [(0isize, 1.0 - w1), (1, w1)] {
                let j1 = i1 + d1;
                if c1 == 0.0 || j1 < 0 || j1 >= n[b1] as isize {
                    continue;
                }
                for (d2, c2) in [(0isize, 1.0 - w2), (1, w2)] {
                    let j2 = i2 + d2;
                    if c2 == 0.0 || j2 < 0 || j2 >= n[b2] as isize {
                        continue;
                    }
                    let idx = base + j1 as usize * stride[b1] + j2 as usize * stride[b2];
                    visit(idx, step * c1 * c2);
                }
            }
        }
    }

    fn matched_back(&self, y: &[T], x: &mut [T]) {
        let g = &self.geom;
        let per_view = g.nu * g.nv;
        let nvox = g.volume.len();
        let blocks: Vec<Vec<T>> = (0..self.frames.len())
            .collect::<Vec<_>>()
            .par_chunks(ANGLE_BLOCK)
            .map(|views| {
                let mut part = vec![T::zero(); nvox];
                for &a in views {
                    for l in 0..g.nv {
                        for m in 0..g.nu {
                            let val = y[a * per_view + l * g.nu + m];
                            if val == T::zero() {
                                continue;
                            }
                            let (o, d) = self.ray(a, m, l);
                            self.trace(o, d, |idx, w| part[idx] += T::of(w) * val);
                        }
                    }
                }
                part
            })
            .collect();
        x.iter_mut().for_each(|v| *v = T::zero());
        for part in &blocks {
            for (xi, &pi) in x.iter_mut().zip(part) {
                *xi += pi;
            }
        }
    }

    fn voxel_driven_back(&self, y: &[T], x: &mut [T]) {
        let g = &self.geom;
        let vs = g.volume;
        let h = vs.spacing;
        let du = g.detector_pixel_size;
        let per_view = g.nu * g.nv;
        let three_d = g.mode != GeometryMode::Parallel2d;
        let area = if three_d { h * h * h / (du * du) } else { h * h / du };
        let (cx, cy, cz) = ((vs.nx as f64 - 1.0) * 0.5, (vs.ny as f64 - 1.0) * 0.5, (vs.nz as f64 - 1.0) * 0.5);
        let (cu, cv) = ((g.nu as f64 - 1.0) * 0.5, (g.nv as f64 - 1.0) * 0.5);

        x.par_iter_mut().enumerate().for_each(|(idx, out)| {
            let i = idx % vs.nx;
            let j = (idx / vs.nx) % vs.ny;
            let k = idx / (vs.nx * vs.ny);
            let p = [(i as f64 - cx) * h, (j as f64 - cy) * h, (k as f64 - cz) * h];
            let mut acc = T::zero();
            for (a, f) in self.frames.iter().enumerate() {
                let along = p[0] * f.eu[0] + p[1] * f.eu[1];
                let (mag, weight) = match g.mode {
                    GeometryMode::Cone3d => {
                        let depth = g.source_to_origin - (p[0] * f.src[0] + p[1] * f.src[1]);
                        let mag = (g.source_to_origin + g.origin_to_detector) / depth;
                        (mag, area * mag * mag)
                    }
                    _ => (1.0, area),
                };
                let qu = along * mag / du + cu;
                let qv = p[2] * mag / du + cv;
                let view = &y[a * per_view..(a + 1) * per_view];
                let s = bilinear(view, g.nu, g.nv, qu, qv);
                acc += T::of(weight) * s;
            }
            *out = acc;
        });
    }
}

/// Bilinear detector sample with zero outside; `img` is row-major `nv × nu`.
fn bilinear<T: Real>(img: &[T], nu: usize, nv: usize, qu: f64, qv: f64) -> T {
    if qu <= -1.0 || qu >= nu as f64 || qv <= -1.0 || qv >= nv as f64 {
        return T::zero();
    }
    let (fu, fv) = (qu.floor(), qv.floor());
    let (wu, wv) = (qu - fu, qv - fv);
    let (iu, iv) = (fu as isize, fv as isize);
    let mut acc = T::zero();
    for (dv, cv) in [(0isize, 1.0 - wv), (1, wv)] {
        let r = iv + dv;
        if cv == 0.0 || r < 0 || r >= nv as isize {
            continue;
        }
        for (du, cu) in [(0isize, 1.0 - wu), (1, wu)] {
            let c = iu + du;
            if cu == 0.0 || c < 0 || c >= nu as isize {
                continue;
            }
            acc += T::of(cv * cu) * img[r as usize * nu + c as usize];
        }
    }
    acc
}

impl<T: Real> OperatorPair<T> for CtProjector<T> {
    fn domain_len(&self) -> usize {
        self.geom.volume.len()
    }

    fn range_len(&self) -> usize {
        self.geom.range_len()
    }

    fn matched(&self) -> bool {
        self.variant == Backprojector::Matched
    }

    fn forward_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.domain_len(), "forward: volume length");
        assert_eq!(y.len(), self.range_len(), "forward: projection length");
        let (nu, nv) = (self.geom.nu, self.geom.nv);
        y.par_iter_mut().enumerate().for_each(|(idx, out)| {
            let m = idx % nu;
            let l = (idx / nu) % nv;
            let a = idx / (nu * nv);
            let (o, d) = self.ray(a, m, l);
            let mut acc = T::zero();
            self.trace(o, d, |vi, w| acc += T::of(w) * x[vi]);
            *out = acc;
        });
    }

    fn back_into(&self, y: &[T], x: &mut [T]) {
        assert_eq!(y.len(), self.range_len(), "back: projection length");
        assert_eq!(x.len(), self.domain_len(), "back: volume length");
        match self.variant {
            Backprojector::Matched => self.matched_back(y, x),
            Backprojector::VoxelDriven => self.voxel_driven_back(y, x),
        }
    }
}

fn check_volume<T: Real>(vol: &Volume<T>, geom: &ConeGeometry) -> Result<()> {
    let v = &geom.volume;
    if vol.nx != v.nx || vol.ny != v.ny || vol.nz != v.nz {
        return Err(dim(format!(
            "volume is {}x{}x{}, geometry expects {}x{}x{}",
            vol.nx, vol.ny, vol.nz, v.nx, v.ny, v.nz
        )));
    }
    Ok(())
}

/// Line integrals of `vol` along every ray of `geom`.
///
/// The returned angles are the geometry angles reduced to `[0, 2π)`.
pub fn forward_project<T: Real>(vol: &Volume<T>, geom: &ConeGeometry) -> Result<ProjectionSet<T>> {
    check_volume(vol, geom)?;
    let proj = CtProjector::<T>::new(geom.clone(), Backprojector::Matched)?;
    let data = proj.forward(&vol.data);
    let angles = geom.angles.iter().map(|a| a.rem_euclid(TAU)).collect();
    ProjectionSet::new(geom.nu, geom.nv, angles, data)
}

pub fn back_project<T: Real>(
    proj: &ProjectionSet<T>,
    geom: &ConeGeometry,
    variant: Backprojector,
) -> Result<Volume<T>> {
    if proj.nu != geom.nu || proj.nv != geom.nv || proj.n_angles != geom.n_angles() {
        return Err(dim(format!(
            "projections are {}x{}x{}, geometry expects {}x{}x{}",
            proj.n_angles,
            proj.nv,
            proj.nu,
            geom.n_angles(),
            geom.nv,
            geom.nu
        )));
    }
    let op = CtProjector::<T>::new(geom.clone(), variant)?;
    let data = op.back(&proj.data);
    let v = geom.volume;
    Volume::new(v.nx, v.ny, v.nz, v.spacing, data)
}
