//! Flat `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Unknown keys are an
//! error so that typos do not silently fall back to defaults. The metadata
//! file written by every command is a complete config in the same format.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ctkrylov::operators::{equispaced_angles, Backprojector, ConeGeometry, GeometryMode};
use ctkrylov::simulation::{NoiseModel, PhantomKind};
use ctkrylov::solvers::{HybridStrategy, SolverOptions, TvOptions, DEFAULT_EPS_SCALE};
use ctkrylov::{Precision, Real};

pub const SOLVERS: &[&str] =
    &["cgls", "lsqr", "lsmr", "hybrid_lsqr", "ab_gmres", "ba_gmres", "sirt", "cgls_tv", "flsqr_tv"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub phantom: PhantomKind,
    pub size: usize,
    /// Physical grid width in mm; defaults to the phantom's own.
    pub field_of_view: Option<f64>,
    pub geometry: GeometryMode,
    pub angles: usize,
    /// Angular range in degrees; 180 for parallel beams, 360 for cone.
    pub angle_range: Option<f64>,
    pub source_to_origin: Option<f64>,
    pub origin_to_detector: Option<f64>,
    pub i0: f64,
    pub sigma: f64,
    pub seed: u64,
    pub solver: Option<String>,
    pub solvers: Vec<String>,
    pub lambda: Option<f64>,
    pub strategy: Option<String>,
    pub nl: Option<f64>,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub eps_scale: f64,
    pub warm_start: bool,
    pub max_iters: usize,
    pub stop_on_increase: bool,
    pub tolerance: f64,
    pub reorth: bool,
    pub backprojector: Backprojector,
    pub precision: Precision,
    pub threads: Option<usize>,
    pub concurrent: bool,
    pub output: Option<PathBuf>,
    pub projections: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub display_min: Option<f64>,
    pub display_max: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            phantom: PhantomKind::SheppLogan2d,
            size: 64,
            field_of_view: None,
            geometry: GeometryMode::Parallel2d,
            angles: 60,
            angle_range: None,
            source_to_origin: None,
            origin_to_detector: None,
            i0: 1e5,
            sigma: 0.5,
            seed: 0,
            solver: None,
            solvers: Vec::new(),
            lambda: None,
            strategy: None,
            nl: None,
            outer_iters: 4,
            inner_iters: 15,
            eps_scale: DEFAULT_EPS_SCALE,
            warm_start: false,
            max_iters: 60,
            stop_on_increase: true,
            tolerance: 1e-6,
            reorth: false,
            backprojector: Backprojector::Matched,
            precision: Precision::Double,
            threads: None,
            concurrent: false,
            output: None,
            projections: None,
            ground_truth: None,
            display_min: None,
            display_max: None,
        }
    }
}

/// Everything a solver needs besides the operator and the data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverSpec {
    Cgls,
    Lsqr,
    Lsmr(f64),
    Hybrid(HybridStrategy),
    AbGmres,
    BaGmres,
    Sirt,
    CglsTv(TvOptions),
    FlsqrTv(HybridStrategy, f64),
}

fn parse_value<V: FromStr>(key: &str, value: &str) -> Result<V, String>
where
    V::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("invalid value '{value}' for '{key}': {e}"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("invalid value '{value}' for '{key}': expected true or false")),
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut cfg = RunConfig::default();
        let mut seen = BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| format!("line {}: {msg}", n + 1);
            let (key, value) = line.split_once('=').ok_or_else(|| at("expected 'key = value'".into()))?;
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(at(format!("duplicate key '{key}'")));
            }
            if value.is_empty() {
                return Err(at(format!("missing value for '{key}'")));
            }
            cfg.set(key, value).map_err(at)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let some_f64 = |v: &str| parse_value::<f64>(key, v).map(Some);
        match key {
            "phantom" => self.phantom = v.parse().map_err(|e: ctkrylov::Error| e.to_string())?,
            "size" => self.size = parse_value(key, v)?,
            "field_of_view" => self.field_of_view = some_f64(v)?,
            "geometry" => self.geometry = parse_value(key, v)?,
            "angles" => self.angles = parse_value(key, v)?,
            "angle_range" => self.angle_range = some_f64(v)?,
            "source_to_origin" => self.source_to_origin = some_f64(v)?,
            "origin_to_detector" => self.origin_to_detector = some_f64(v)?,
            "i0" => self.i0 = parse_value(key, v)?,
            "sigma" => self.sigma = parse_value(key, v)?,
            "seed" => self.seed = parse_value(key, v)?,
            "solver" => self.solver = Some(v.to_string()),
            "solvers" => self.solvers = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            "lambda" => self.lambda = some_f64(v)?,
            "strategy" => self.strategy = Some(v.to_string()),
            "nl" => self.nl = some_f64(v)?,
            "outer_iters" => self.outer_iters = parse_value(key, v)?,
            "inner_iters" => self.inner_iters = parse_value(key, v)?,
            "eps_scale" => self.eps_scale = parse_value(key, v)?,
            "warm_start" => self.warm_start = parse_bool(key, v)?,
            "max_iters" => self.max_iters = parse_value(key, v)?,
            "stop_on_increase" => self.stop_on_increase = parse_bool(key, v)?,
            "tolerance" => self.tolerance = parse_value(key, v)?,
            "reorth" => self.reorth = parse_bool(key, v)?,
            "backprojector" => self.backprojector = parse_value(key, v)?,
            "precision" => self.precision = parse_value(key, v)?,
            "threads" => self.threads = Some(parse_value(key, v)?),
            "concurrent" => self.concurrent = parse_bool(key, v)?,
            "output" => self.output = Some(PathBuf::from(v)),
            "projections" => self.projections = Some(PathBuf::from(v)),
            "ground_truth" => self.ground_truth = Some(PathBuf::from(v)),
            "display_min" => self.display_min = some_f64(v)?,
            "display_max" => self.display_max = some_f64(v)?,
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    /// Complete config text; parsing it gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        let num = |x: f64| format!("{x:?}");
        put("phantom", self.phantom.to_string());
        put("size", self.size.to_string());
        put("geometry", self.geometry.as_str().into());
        put("angles", self.angles.to_string());
        for (k, v) in [
            ("field_of_view", self.field_of_view),
            ("angle_range", self.angle_range),
            ("source_to_origin", self.source_to_origin),
            ("origin_to_detector", self.origin_to_detector),
        ] {
            if let Some(v) = v {
                put(k, num(v));
            }
        }
        put("i0", num(self.i0));
        put("sigma", num(self.sigma));
        put("seed", self.seed.to_string());
        if let Some(v) = &self.solver {
            put("solver", v.clone());
        }
        if !self.solvers.is_empty() {
            put("solvers", self.solvers.join(","));
        }
        if let Some(v) = self.lambda {
            put("lambda", num(v));
        }
        if let Some(v) = &self.strategy {
            put("strategy", v.clone());
        }
        if let Some(v) = self.nl {
            put("nl", num(v));
        }
        put("outer_iters", self.outer_iters.to_string());
        put("inner_iters", self.inner_iters.to_string());
        put("eps_scale", num(self.eps_scale));
        put("warm_start", self.warm_start.to_string());
        put("max_iters", self.max_iters.to_string());
        put("stop_on_increase", self.stop_on_increase.to_string());
        put("tolerance", num(self.tolerance));
        put("reorth", self.reorth.to_string());
        put("backprojector", self.backprojector.as_str().into());
        put("precision", self.precision.as_str().into());
        if let Some(v) = self.threads {
            put("threads", v.to_string());
        }
        put("concurrent", self.concurrent.to_string());
        for (k, v) in
            [("output", &self.output), ("projections", &self.projections), ("ground_truth", &self.ground_truth)]
        {
            if let Some(v) = v {
                put(k, v.display().to_string());
            }
        }
        for (k, v) in [("display_min", self.display_min), ("display_max", self.display_max)] {
            if let Some(v) = v {
                put(k, num(v));
            }
        }
        s
    }

    pub fn spacing(&self) -> f64 {
        self.field_of_view.unwrap_or_else(|| self.phantom.default_field_of_view()) / self.size as f64
    }

    /// Checks everything that does not need the data: phantom/geometry
    /// compatibility, noise model and all named solvers with their parameters.
    pub fn validate(&self) -> Result<(), String> {
        if self.size < 8 {
            return Err(format!("size must be at least 8, got {}", self.size));
        }
        if let Some(f) = self.field_of_view {
            if !(f > 0.0 && f.is_finite()) {
                return Err("field_of_view must be positive".into());
            }
        }
        if self.angles == 0 {
            return Err("angles must be at least 1".into());
        }
        if let Some(r) = self.angle_range {
            if !(r > 0.0 && r <= 360.0) {
                return Err(format!("angle_range must lie in (0, 360] degrees, got {r}"));
            }
        }
        let flat = self.phantom.is_2d();
        match (self.geometry, flat) {
            (GeometryMode::Parallel2d, false) => {
                return Err(format!("geometry parallel2d needs a 2D phantom, got {}", self.phantom))
            }
            (GeometryMode::Parallel3d | GeometryMode::Cone3d, true) => {
                return Err(format!("geometry {} needs a 3D phantom, got {}", self.geometry.as_str(), self.phantom))
            }
            _ => {}
        }
        NoiseModel::new(self.i0, self.sigma, self.seed).map_err(|e| e.to_string())?;
        if self.max_iters == 0 {
            return Err("max_iters must be at least 1".into());
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err("tolerance must be nonnegative".into());
        }
        if self.threads == Some(0) {
            return Err("threads must be at least 1".into());
        }
        if let (Some(lo), Some(hi)) = (self.display_min, self.display_max) {
            if !(hi > lo) {
                return Err("display_max must exceed display_min".into());
            }
        }
        self.geometry_spec().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn geometry_spec(&self) -> ctkrylov::Result<ConeGeometry> {
        let h = self.spacing();
        let n = self.size;
        let fov = n as f64 * h;
        let (geom, default_range) = match self.geometry {
            GeometryMode::Parallel2d => (ConeGeometry::parallel2d(n, h, self.angles)?, 180.0),
            GeometryMode::Parallel3d => (ConeGeometry::parallel3d(n, h, self.angles)?, 180.0),
            GeometryMode::Cone3d => (
                ConeGeometry::cone3d(
                    n,
                    h,
                    self.angles,
                    self.source_to_origin.unwrap_or(3.0 * fov),
                    self.origin_to_detector.unwrap_or(1.5 * fov),
                )?,
                360.0,
            ),
        };
        let mut geom = geom;
        if let Some(d) = self.origin_to_detector {
            if self.geometry != GeometryMode::Cone3d {
                geom.origin_to_detector = d;
            }
        }
        let range = self.angle_range.unwrap_or(default_range).to_radians();
        geom.with_angles(equispaced_angles(self.angles, range))
    }

    pub fn noise_model(&self) -> NoiseModel {
        NoiseModel { i0: self.i0, sigma: self.sigma, seed: self.seed }
    }

    pub fn solver_options<T: Real>(&self) -> SolverOptions<T> {
        SolverOptions {
            max_iters: self.max_iters,
            stop_on_increase: self.stop_on_increase,
            tolerance: self.tolerance,
            reorth: self.reorth,
            ground_truth: None,
            record_iterates: false,
        }
    }

    fn strategy_spec(&self, solver: &str) -> Result<HybridStrategy, String> {
        let s = match self.strategy.as_deref().unwrap_or("gcv") {
            "gcv" => HybridStrategy::Gcv,
            "dp" => HybridStrategy::Dp(self.nl.ok_or_else(|| format!("{solver} with strategy dp needs nl"))?),
            "fixed" => {
                HybridStrategy::Fixed(self.lambda.ok_or_else(|| format!("{solver} with strategy fixed needs lambda"))?)
            }
            other => return Err(format!("unknown strategy '{other}' (expected fixed, dp or gcv)")),
        };
        s.validate().map_err(|e| e.to_string())?;
        Ok(s)
    }

    /// Resolves a solver name and its parameters.
    pub fn solver_spec(&self, name: &str) -> Result<SolverSpec, String> {
        let spec = match name {
            "cgls" => SolverSpec::Cgls,
            "lsqr" => SolverSpec::Lsqr,
            "lsmr" => {
                let l = self.lambda.unwrap_or(0.0);
                if !(l >= 0.0 && l.is_finite()) {
                    return Err(format!("lsmr lambda must be nonnegative, got {l}"));
                }
                SolverSpec::Lsmr(l)
            }
            "hybrid_lsqr" => SolverSpec::Hybrid(self.strategy_spec(name)?),
            "ab_gmres" => SolverSpec::AbGmres,
            "ba_gmres" => SolverSpec::BaGmres,
            "sirt" => SolverSpec::Sirt,
            "cgls_tv" => {
                let lambda = self.lambda.ok_or("cgls_tv needs lambda")?;
                let tv = TvOptions {
                    lambda,
                    outer_iters: self.outer_iters,
                    inner_iters: self.inner_iters,
                    warm_start: self.warm_start,
                    eps_scale: self.eps_scale,
                };
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return Err(format!("cgls_tv lambda must be positive, got {lambda}"));
                }
                if tv.outer_iters == 0 || tv.inner_iters == 0 {
                    return Err("outer_iters and inner_iters must be at least 1".into());
                }
                SolverSpec::CglsTv(tv)
            }
            "flsqr_tv" => SolverSpec::FlsqrTv(self.strategy_spec(name)?, self.eps_scale),
            other => return Err(format!("unknown solver '{other}' (expected one of: {})", SOLVERS.join(", "))),
        };
        if matches!(spec, SolverSpec::CglsTv(_) | SolverSpec::FlsqrTv(..)) && !(self.eps_scale > 0.0) {
            return Err("eps_scale must be positive".into());
        }
        Ok(spec)
    }
}
