use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ctkrylov::io::{
    central_slice, data_window, header_path, raw_path, read_projections, read_volume, write_pgm16, write_projections,
    write_volume, SlicePlane,
};
use ctkrylov::metrics::{format_decimal, semiconvergence_of, ConvergenceLog};
use ctkrylov::operators::{forward_project, ConeGeometry, CtProjector, Gradient, ProjectionSet, Volume};
use ctkrylov::simulation::{add_noise, make_phantom_with_spacing, RNG_NAME};
use ctkrylov::solvers::*;
use ctkrylov::{Precision, Real};
use rayon::prelude::*;

use crate::config::{RunConfig, SolverSpec};

#[derive(Debug)]
pub enum CliError {
    /// Bad input, configuration or environment. Exit status 2.
    Invalid(String),
    /// A solver failed numerically. Exit status 1.
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Numerical(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Invalid(m) | CliError::Numerical(m) => f.write_str(m),
        }
    }
}

impl From<ctkrylov::Error> for CliError {
    fn from(e: ctkrylov::Error) -> Self {
        match e {
            ctkrylov::Error::Numerical { .. } => CliError::Numerical(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<String> for CliError {
    fn from(e: String) -> Self {
        CliError::Invalid(e)
    }
}

impl From<&str> for CliError {
    fn from(e: &str) -> Self {
        CliError::Invalid(e.to_string())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |e| CliError::Invalid(format!("{}: {e}", path.display()))
}

/// Creates the output directory and returns its absolute path.
fn prepare_output(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output.clone().ok_or("no output directory (use --output or the 'output' key)")?;
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let probe = dir.join(".write-test");
    fs::write(&probe, b"").map_err(io_err(&dir))?;
    let _ = fs::remove_file(&probe);
    fs::canonicalize(&dir).map_err(io_err(&dir))
}

/// Refuses to overwrite any of the files a command reads.
fn check_inputs_untouched(inputs: &[PathBuf], outputs: &[PathBuf]) -> Result<(), CliError> {
    let canon = |p: &PathBuf| fs::canonicalize(p).ok();
    for o in outputs {
        let Some(o) = canon(o) else { continue };
        if inputs.iter().filter_map(canon).any(|i| i == o) {
            return Err(CliError::Invalid(format!("output {} would overwrite an input file", o.display())));
        }
    }
    Ok(())
}

fn base_files(base: &Path) -> [PathBuf; 2] {
    [raw_path(base), header_path(base)]
}

fn write_slices<T: Real>(
    dir: &Path,
    stem: &str,
    vol: &Volume<T>,
    window: (f64, f64),
    meta: &mut String,
) -> Result<(), CliError> {
    let mut planes = vec![(SlicePlane::Transversal, "transversal")];
    if vol.nz > 1 {
        planes.push((SlicePlane::Sagittal, "sagittal"));
    }
    for (plane, name) in planes {
        let (w, h, values) = central_slice(vol, plane);
        write_pgm16(&dir.join(format!("{stem}_{name}.pgm")), w, h, &values, window)?;
    }
    let _ = writeln!(meta, "# {stem} display window = {} {}", format_decimal(window.0), format_decimal(window.1));
    Ok(())
}

fn display_window<T: Real>(cfg: &RunConfig, data: &[T]) -> (f64, f64) {
    let (lo, hi) = data_window(data);
    (cfg.display_min.unwrap_or(lo), cfg.display_max.unwrap_or(hi))
}

const SHOWN_WARNINGS: usize = 3;

fn print_warnings(tag: &str, warnings: &[String]) {
    for w in warnings.iter().take(SHOWN_WARNINGS) {
        eprintln!("warning{tag}: {w}");
    }
    if warnings.len() > SHOWN_WARNINGS {
        eprintln!("warning{tag}: {} more warnings suppressed", warnings.len() - SHOWN_WARNINGS);
    }
}

pub struct Simulated {
    pub truth: Volume<f64>,
    pub geometry: ConeGeometry,
    pub clean: ProjectionSet<f64>,
    pub noisy: ProjectionSet<f64>,
}

/// Phantom, clean and noisy projections. The projections are rounded to
/// `f32`, the on-disk precision, so in-memory and file-based runs agree.
pub fn simulate_data(cfg: &RunConfig) -> Result<Simulated, CliError> {
    let truth: Volume<f64> = make_phantom_with_spacing(cfg.phantom, cfg.size, cfg.spacing())?;
    let geometry = cfg.geometry_spec()?;
    let clean = forward_project(&truth, &geometry)?.cast::<f32>().cast::<f64>();
    let noisy = add_noise(&clean, &cfg.noise_model())?.cast::<f32>().cast::<f64>();
    let truth = truth.cast::<f32>().cast::<f64>();
    Ok(Simulated { truth, geometry, clean, noisy })
}

pub fn simulate(cfg: &RunConfig, config_path: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let dir = prepare_output(cfg)?;
    let (phantom, clean, noisy) = (dir.join("phantom"), dir.join("clean"), dir.join("noisy"));
    let meta_path = dir.join("simulate.cfg");
    let outputs: Vec<PathBuf> =
        [&phantom, &clean, &noisy].iter().flat_map(|b| base_files(b)).chain([meta_path.clone()]).collect();
    check_inputs_untouched(&config_path.map(Path::to_path_buf).into_iter().collect::<Vec<_>>(), &outputs)?;

    let sim = simulate_data(cfg)?;
    write_volume(&phantom, &sim.truth)?;
    write_projections(&clean, &sim.clean)?;
    write_projections(&noisy, &sim.noisy)?;

    let mut out = cfg.clone();
    out.output = Some(dir.clone());
    out.projections = Some(noisy);
    out.ground_truth = Some(phantom);
    let mut meta = out.to_text();
    let _ = writeln!(meta, "# rng = {RNG_NAME}");
    let _ =
        writeln!(meta, "# volume = {}x{}x{} voxels of {} mm", sim.truth.nx, sim.truth.ny, sim.truth.nz, cfg.spacing());
    let _ = writeln!(
        meta,
        "# detector = {} x {} pixels of {} mm, {} views",
        sim.geometry.nu,
        sim.geometry.nv,
        sim.geometry.detector_pixel_size,
        sim.geometry.n_angles()
    );
    let window = display_window(cfg, &sim.truth.data);
    write_slices(&dir, "phantom", &sim.truth, window, &mut meta)?;
    fs::write(&meta_path, meta).map_err(io_err(&meta_path))?;
    println!("wrote phantom, clean and noisy projections to {}", dir.display());
    Ok(())
}

fn run_solver<T: Real>(
    spec: SolverSpec,
    pair: &CtProjector<T>,
    b: &[T],
    grid: Gradient,
    opts: &SolverOptions<T>,
) -> ctkrylov::Result<SolveResult<T>> {
    match spec {
        SolverSpec::Cgls => cgls(pair, b, opts),
        SolverSpec::Lsqr => lsqr(pair, b, opts),
        SolverSpec::Lsmr(lambda) => lsmr(pair, b, lambda, opts),
        SolverSpec::Hybrid(s) => hybrid_lsqr(pair, b, s, opts),
        SolverSpec::AbGmres => ab_gmres(pair, b, opts),
        SolverSpec::BaGmres => ba_gmres(pair, b, opts),
        SolverSpec::Sirt => sirt(pair, b, opts),
        SolverSpec::CglsTv(tv) => cgls_tv(pair, b, grid, &tv, opts),
        SolverSpec::FlsqrTv(s, eps) => flsqr_tv(pair, b, grid, s, eps, opts),
    }
}

fn check_projections<T: Real>(proj: &ProjectionSet<T>, geom: &ConeGeometry) -> Result<(), CliError> {
    if proj.nu != geom.nu || proj.nv != geom.nv || proj.n_angles != geom.n_angles() {
        return Err(CliError::Invalid(format!(
            "projections are {} views of {}x{}, the configured geometry has {} views of {}x{}",
            proj.n_angles,
            proj.nu,
            proj.nv,
            geom.n_angles(),
            geom.nu,
            geom.nv
        )));
    }
    let tau = std::f64::consts::TAU;
    if proj.angles.iter().zip(&geom.angles).any(|(a, g)| (a - g.rem_euclid(tau)).abs() > 1e-9) {
        return Err(CliError::Invalid("projection angles do not match the configured geometry".into()));
    }
    Ok(())
}

fn check_truth<T>(truth: &Volume<T>, geom: &ConeGeometry) -> Result<(), CliError> {
    let v = &geom.volume;
    if (truth.nx, truth.ny, truth.nz) != (v.nx, v.ny, v.nz) {
        return Err(CliError::Invalid(format!(
            "ground truth is {}x{}x{}, the configured volume is {}x{}x{}",
            truth.nx, truth.ny, truth.nz, v.nx, v.ny, v.nz
        )));
    }
    Ok(())
}

fn require_solver(cfg: &RunConfig) -> Result<(String, SolverSpec), CliError> {
    let name = cfg.solver.clone().ok_or("no solver configured (set 'solver')")?;
    let spec = cfg.solver_spec(&name)?;
    Ok((name, spec))
}

pub fn reconstruct(cfg: &RunConfig, config_path: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    let (name, spec) = require_solver(cfg)?;
    let proj_base =
        cfg.projections.clone().ok_or("no projections given (use --projections or the 'projections' key)")?;
    let dir = prepare_output(cfg)?;
    let recon = dir.join("reconstruction");
    let csv = dir.join("convergence.csv");
    let meta_path = dir.join("reconstruct.cfg");
    let mut inputs: Vec<PathBuf> = base_files(&proj_base).into();
    inputs.extend(config_path.map(Path::to_path_buf));
    if let Some(gt) = &cfg.ground_truth {
        inputs.extend(base_files(gt));
    }
    let mut outputs: Vec<PathBuf> = base_files(&recon).into();
    outputs.extend([csv.clone(), meta_path.clone()]);
    check_inputs_untouched(&inputs, &outputs)?;

    match cfg.precision {
        Precision::Single => reconstruct_in::<f32>(cfg, &name, spec, &proj_base, &dir),
        Precision::Double => reconstruct_in::<f64>(cfg, &name, spec, &proj_base, &dir),
    }
}

fn reconstruct_in<T: Real>(
    cfg: &RunConfig,
    name: &str,
    spec: SolverSpec,
    proj_base: &Path,
    dir: &Path,
) -> Result<(), CliError> {
    let geom = cfg.geometry_spec()?;
    let proj: ProjectionSet<T> = read_projections(proj_base)?;
    check_projections(&proj, &geom)?;
    let mut opts = cfg.solver_options::<T>();
    if let Some(gt) = &cfg.ground_truth {
        let truth: Volume<T> = read_volume(gt)?;
        check_truth(&truth, &geom)?;
        opts.ground_truth = Some(truth.data);
    }
    let pair = CtProjector::<T>::new(geom.clone(), cfg.backprojector)?;
    let v = geom.volume;
    let grid = Gradient::new(v.nx, v.ny, v.nz);
    let result = run_solver(spec, &pair, &proj.data, grid, &opts)?;
    print_warnings("", &result.warnings);

    let vol = Volume::new(v.nx, v.ny, v.nz, v.spacing, result.x.clone())?;
    write_volume(&dir.join("reconstruction"), &vol)?;
    let csv = dir.join("convergence.csv");
    result.log.write_csv(fs::File::create(&csv).map_err(io_err(&csv))?)?;

    let mut out = cfg.clone();
    out.output = Some(dir.to_path_buf());
    let mut meta = out.to_text();
    let _ = writeln!(meta, "# solver = {name}");
    let _ = writeln!(meta, "# stop_reason = {}", result.stop_reason.as_str());
    let _ = writeln!(meta, "# iterations = {}", result.iterations);
    write_slices(dir, "reconstruction", &vol, display_window(cfg, &vol.data), &mut meta)?;
    let meta_path = dir.join("reconstruct.cfg");
    fs::write(&meta_path, meta).map_err(io_err(&meta_path))?;
    println!("{name}: {} after {} iterations", result.stop_reason.as_str(), result.iterations);
    Ok(())
}

/// Per-solver line of the comparison summary.
struct Row {
    name: String,
    log: ConvergenceLog,
    iterations: usize,
    stop: StopReason,
    seconds: f64,
}

pub fn compare(cfg: &RunConfig, config_path: Option<&Path>) -> Result<(), CliError> {
    cfg.validate()?;
    if cfg.solvers.len() < 2 {
        return Err(CliError::Invalid(format!(
            "compare needs at least two solvers in 'solvers', got {}",
            cfg.solvers.len()
        )));
    }
    let mut specs = Vec::new();
    for (i, name) in cfg.solvers.iter().enumerate() {
        if cfg.solvers[..i].contains(name) {
            return Err(CliError::Invalid(format!("solver '{name}' is listed twice")));
        }
        specs.push((name.clone(), cfg.solver_spec(name)?));
    }
    let dir = prepare_output(cfg)?;
    let mut outputs: Vec<PathBuf> = cfg.solvers.iter().map(|s| dir.join(format!("{s}.csv"))).collect();
    outputs.extend(["merged.csv", "summary.txt", "compare.cfg"].map(|f| dir.join(f)));
    let mut inputs: Vec<PathBuf> = config_path.map(Path::to_path_buf).into_iter().collect();
    for p in [&cfg.projections, &cfg.ground_truth].into_iter().flatten() {
        inputs.extend(base_files(p));
    }
    check_inputs_untouched(&inputs, &outputs)?;

    let rows = match cfg.precision {
        Precision::Single => compare_in::<f32>(cfg, &specs)?,
        Precision::Double => compare_in::<f64>(cfg, &specs)?,
    };

    for r in &rows {
        let p = dir.join(format!("{}.csv", r.name));
        r.log.write_csv(fs::File::create(&p).map_err(io_err(&p))?)?;
    }
    let merged = dir.join("merged.csv");
    fs::write(&merged, merged_csv(&rows)).map_err(io_err(&merged))?;
    let table = summary_table(&rows);
    let summary = dir.join("summary.txt");
    fs::write(&summary, &table).map_err(io_err(&summary))?;
    let mut out = cfg.clone();
    out.output = Some(dir.clone());
    let meta_path = dir.join("compare.cfg");
    fs::write(&meta_path, out.to_text()).map_err(io_err(&meta_path))?;
    print!("{table}");
    Ok(())
}

fn compare_in<T: Real>(cfg: &RunConfig, specs: &[(String, SolverSpec)]) -> Result<Vec<Row>, CliError> {
    let geom = cfg.geometry_spec()?;
    let (b, truth): (Vec<T>, Vec<T>) = match &cfg.projections {
        Some(p) => {
            let proj: ProjectionSet<T> = read_projections(p)?;
            check_projections(&proj, &geom)?;
            let gt = cfg.ground_truth.as_ref().ok_or("compare with 'projections' also needs 'ground_truth'")?;
            let truth: Volume<T> = read_volume(gt)?;
            check_truth(&truth, &geom)?;
            (proj.data, truth.data)
        }
        None => {
            let sim = simulate_data(cfg)?;
            (sim.noisy.cast::<T>().data, sim.truth.cast::<T>().data)
        }
    };
    let pair = CtProjector::<T>::new(geom.clone(), cfg.backprojector)?;
    let v = geom.volume;
    let grid = Gradient::new(v.nx, v.ny, v.nz);
    let mut opts = cfg.solver_options::<T>();
    opts.ground_truth = Some(truth);

    let run = |(name, spec): &(String, SolverSpec)| -> Result<Row, CliError> {
        let t = Instant::now();
        let r = run_solver(*spec, &pair, &b, grid, &opts).map_err(|e| CliError::from(e).prefixed(name))?;
        print_warnings(&format!(" ({name})"), &r.warnings);
        Ok(Row {
            name: name.clone(),
            log: r.log,
            iterations: r.iterations,
            stop: r.stop_reason,
            seconds: t.elapsed().as_secs_f64(),
        })
    };
    if cfg.concurrent {
        specs.par_iter().map(run).collect()
    } else {
        specs.iter().map(run).collect()
    }
}

impl CliError {
    fn prefixed(self, name: &str) -> Self {
        match self {
            CliError::Invalid(m) => CliError::Invalid(format!("{name}: {m}")),
            CliError::Numerical(m) => CliError::Numerical(format!("{name}: {m}")),
        }
    }
}

fn merged_csv(rows: &[Row]) -> String {
    let mut s = String::from("iter");
    for r in rows {
        for col in ["implicit_residual", "explicit_residual", "relative_error", "lambda"] {
            let _ = write!(s, ",{}.{col}", r.name);
        }
    }
    s.push('\n');
    let len = rows.iter().map(|r| r.log.len()).max().unwrap_or(0);
    let cell = |v: Option<f64>| v.map(format_decimal).unwrap_or_default();
    for i in 0..len {
        let _ = write!(s, "{}", i + 1);
        for r in rows {
            let l = &r.log;
            let at = |v: &[f64]| v.get(i).copied();
            let _ = write!(
                s,
                ",{},{},{},{}",
                cell(at(&l.implicit_residual)),
                cell(at(&l.explicit_residual)),
                cell(l.relative_error.as_deref().and_then(at)),
                cell(l.lambda.as_deref().and_then(at)),
            );
        }
        s.push('\n');
    }
    s
}

fn summary_table(rows: &[Row]) -> String {
    let mut s = format!(
        "{:<12} {:>10} {:<18} {:>14} {:>14} {:>14} {:>16} {:>11}\n",
        "solver",
        "iterations",
        "stop_reason",
        "min_rel_error",
        "min_error_iter",
        "rebound_ratio",
        "final_residual",
        "wall_time_s"
    );
    for r in rows {
        let err = r.log.relative_error.as_deref().unwrap_or(&[]);
        let (min_err, min_iter) =
            err.iter().enumerate().fold((f64::INFINITY, 0), |best, (i, &e)| if e < best.0 { (e, i + 1) } else { best });
        let rebound = semiconvergence_of(err).map(|s| format!("{:.6}", s.rebound_ratio)).unwrap_or_else(|_| "-".into());
        let last = r.log.explicit_residual.last().map(|v| format!("{v:.6e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "{:<12} {:>10} {:<18} {:>14.6} {:>14} {:>14} {:>16} {:>11.3}",
            r.name,
            r.iterations,
            r.stop.as_str(),
            min_err,
            min_iter,
            rebound,
            last,
            r.seconds
        );
    }
    s
}
