//! On-disk formats.
//!
//! A volume `name` is stored as `name.raw` (little-endian `f32`, x fastest)
//! and `name.hdr` holding `nx ny nz spacing` on one line. A projection set
//! uses the same raw layout (detector column fastest, then row, then angle)
//! with a header `n_angles nu nv` followed by one angle in radians per line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::operators::{ProjectionSet, Volume};
use crate::scalar::Real;

pub fn raw_path(base: &Path) -> PathBuf {
    base.with_extension("raw")
}

pub fn header_path(base: &Path) -> PathBuf {
    base.with_extension("hdr")
}

/// Shortest decimal that round-trips the value.
fn decimal(x: f64) -> String {
    format!("{x:?}")
}

fn encode<T: Real>(data: &[T]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 * data.len());
    for v in data {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    out
}

fn decode<T: Real>(bytes: &[u8], expected: usize, what: &str) -> Result<Vec<T>> {
    if bytes.len() != 4 * expected {
        return Err(Error::Parse(format!("{what} has {} bytes, header implies {}", bytes.len(), 4 * expected)));
    }
    Ok(bytes.chunks_exact(4).map(|c| T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)).collect())
}

fn field<V: std::str::FromStr>(tok: Option<&str>, what: &str, path: &Path) -> Result<V> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("{}: missing or malformed {what}", path.display())))
}

pub fn write_volume<T: Real>(base: &Path, vol: &Volume<T>) -> Result<()> {
    fs::write(raw_path(base), encode(&vol.data))?;
    fs::write(header_path(base), format!("{} {} {} {}\n", vol.nx, vol.ny, vol.nz, decimal(vol.spacing)))?;
    Ok(())
}

pub fn read_volume<T: Real>(base: &Path) -> Result<Volume<T>> {
    let hp = header_path(base);
    let header = fs::read_to_string(&hp)?;
    let mut toks = header.split_whitespace();
    let nx: usize = field(toks.next(), "nx", &hp)?;
    let ny: usize = field(toks.next(), "ny", &hp)?;
    let nz: usize = field(toks.next(), "nz", &hp)?;
    let spacing: f64 = field(toks.next(), "spacing", &hp)?;
    let bytes = fs::read(raw_path(base))?;
    let data = decode(&bytes, nx * ny * nz, "volume data")?;
    Volume::new(nx, ny, nz, spacing, data)
}

pub fn write_projections<T: Real>(base: &Path, proj: &ProjectionSet<T>) -> Result<()> {
    fs::write(raw_path(base), encode(&proj.data))?;
    let mut f = fs::File::create(header_path(base))?;
    writeln!(f, "{} {} {}", proj.n_angles, proj.nu, proj.nv)?;
    for a in &proj.angles {
        writeln!(f, "{}", decimal(*a))?;
    }
    Ok(())
}

pub fn read_projections<T: Real>(base: &Path) -> Result<ProjectionSet<T>> {
    let hp = header_path(base);
    let header = fs::read_to_string(&hp)?;
    let mut lines = header.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().ok_or_else(|| Error::Parse(format!("{}: empty header", hp.display())))?;
    let mut toks = first.split_whitespace();
    let n_angles: usize = field(toks.next(), "n_angles", &hp)?;
    let nu: usize = field(toks.next(), "nu", &hp)?;
    let nv: usize = field(toks.next(), "nv", &hp)?;
    let angles = lines.map(|l| field::<f64>(Some(l.trim()), "angle", &hp)).collect::<Result<Vec<_>>>()?;
    if angles.len() != n_angles {
        return Err(Error::Parse(format!(
            "{}: header declares {n_angles} angles but lists {}",
            hp.display(),
            angles.len()
        )));
    }
    let bytes = fs::read(raw_path(base))?;
    let data = decode(&bytes, n_angles * nu * nv, "projection data")?;
    ProjectionSet::new(nu, nv, angles, data)
}

/// Plane orientation for slice export.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlicePlane {
    /// Constant z (x-y plane).
    Transversal,
    /// Constant x (y-z plane).
    Sagittal,
}

/// Central slice as row-major `(width, height, values)`.
pub fn central_slice<T: Real>(vol: &Volume<T>, plane: SlicePlane) -> (usize, usize, Vec<f64>) {
    match plane {
        SlicePlane::Transversal => {
            let k = vol.nz / 2;
            let vals = (0..vol.ny)
                .flat_map(|j| (0..vol.nx).map(move |i| (i, j)))
                .map(|(i, j)| vol.get(i, j, k).as_f64())
                .collect();
            (vol.nx, vol.ny, vals)
        }
        SlicePlane::Sagittal => {
            let i = vol.nx / 2;
            let vals = (0..vol.nz)
                .flat_map(|k| (0..vol.ny).map(move |j| (j, k)))
                .map(|(j, k)| vol.get(i, j, k).as_f64())
                .collect();
            (vol.ny, vol.nz, vals)
        }
    }
}

/// Binary 16-bit graymap. Values are mapped linearly from `[lo, hi]` to
/// `[0, 65535]` and clipped.
pub fn write_pgm16(path: &Path, width: usize, height: usize, values: &[f64], window: (f64, f64)) -> Result<()> {
    if values.len() != width * height {
        return Err(Error::Dimension("slice size does not match its dimensions".into()));
    }
    let (lo, hi) = window;
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &v in values {
        let t = ((v - lo) / span).clamp(0.0, 1.0);
        let q = (t * 65535.0).round() as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

/// `(min, max)` of the data; the default display window.
pub fn data_window<T: Real>(data: &[T]) -> (f64, f64) {
    data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        let x = v.as_f64();
        (lo.min(x), hi.max(x))
    })
}
