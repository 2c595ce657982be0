use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctkrylov::io::{read_projections, read_volume};
use ctkrylov::operators::{ProjectionSet, Volume};
use tempfile::TempDir;

fn ctkrylov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctkrylov")).args(args).output().expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

/// Replaces the value of `key` in a config text.
fn with_key(text: &str, key: &str, value: &str) -> String {
    let mut found = false;
    let mut out: String = text
        .lines()
        .map(|l| {
            if l.split('=').next().is_some_and(|k| k.trim() == key) {
                found = true;
                format!("{key} = {value}\n")
            } else {
                format!("{l}\n")
            }
        })
        .collect();
    if !found {
        out += &format!("{key} = {value}\n");
    }
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// 64² Shepp-Logan, 60 views, I0 = 1e5.
const SHEPP_2D: &str = "phantom = shepp_logan_2d\nsize = 64\nangles = 60\ni0 = 1e5\nseed = 2024\n";

/// 32² blocks, 20 views, I0 = 1e4.
const BLOCKS_2D: &str = "phantom = piecewise_blocks_2d\nsize = 32\nangles = 20\ni0 = 1e4\nseed = 2024\n";

fn simulate(tmp: &Path, cfg: &str) -> PathBuf {
    let c = write_cfg(tmp, "sim.cfg", cfg);
    let out = tmp.join("sim");
    ok(ctkrylov(&["simulate", "--config", s(&c), "--output", s(&out)]));
    out
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(p: &Path) -> Csv {
        let text = fs::read_to_string(p).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap().split(',').map(str::to_string).collect();
        let rows = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
        Csv { header, rows }
    }

    fn column(&self, name: &str) -> Vec<String> {
        let i = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].clone()).collect()
    }

    fn numbers(&self, name: &str) -> Vec<f64> {
        self.column(name).iter().map(|v| v.parse().unwrap()).collect()
    }
}

/// `solver -> column -> value` from summary.txt.
fn summary(dir: &Path) -> Vec<(String, Vec<(String, String)>)> {
    let text = fs::read_to_string(dir.join("summary.txt")).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split_whitespace().map(str::to_string).collect();
    lines
        .map(|l| {
            let f: Vec<&str> = l.split_whitespace().collect();
            (f[0].to_string(), header.iter().cloned().zip(f.iter().map(|v| v.to_string())).collect())
        })
        .collect()
}

fn summary_value(rows: &[(String, Vec<(String, String)>)], solver: &str, col: &str) -> f64 {
    let (_, r) = rows.iter().find(|(n, _)| n == solver).unwrap();
    r.iter().find(|(c, _)| c == col).unwrap().1.parse().unwrap()
}

#[test]
fn simulate_cone_volume_writes_matching_files() {
    let tmp = TempDir::new().unwrap();
    let dir = simulate(tmp.path(), "phantom = shepp_logan_3d\nsize = 64\ngeometry = cone3d\nangles = 60\n");
    let phantom: Volume<f32> = read_volume(&dir.join("phantom")).unwrap();
    assert_eq!((phantom.nx, phantom.ny, phantom.nz), (64, 64, 64));
    let clean: ProjectionSet<f32> = read_projections(&dir.join("clean")).unwrap();
    let noisy: ProjectionSet<f32> = read_projections(&dir.join("noisy")).unwrap();
    assert_eq!(clean.n_angles, 60);
    assert_eq!((clean.nu, clean.nv, clean.angles.clone()), (noisy.nu, noisy.nv, noisy.angles.clone()));
    assert_eq!(noisy.data.len(), 60 * noisy.nu * noisy.nv);
    assert!(noisy.nv > 1);
    assert!(clean.data.iter().all(|v| v.is_finite() && *v >= 0.0));
    assert_ne!(clean.data, noisy.data);
    for f in ["phantom_transversal.pgm", "phantom_sagittal.pgm", "simulate.cfg"] {
        assert!(dir.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn zero_angles_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let c = write_cfg(tmp.path(), "a.cfg", "angles = 0\n");
    let out = ctkrylov(&["simulate", "--config", s(&c), "--output", s(&tmp.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("angles"));
    assert!(!tmp.path().join("o").join("noisy.raw").exists());
}

#[test]
fn bad_config_lines_are_usage_errors() {
    let tmp = TempDir::new().unwrap();
    for text in ["size = 64\nsize = 32\n", "colour = red\n", "size = big\n", "size 64\n"] {
        let c = write_cfg(tmp.path(), "a.cfg", text);
        let out = ctkrylov(&["simulate", "--config", s(&c), "--output", s(&tmp.path().join("o"))]);
        assert_eq!(out.status.code(), Some(2), "{text:?}");
    }
    let out = ctkrylov(&["simulate", "--config", s(&tmp.path().join("missing.cfg"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_noise() {
    let tmp = TempDir::new().unwrap();
    let c = write_cfg(tmp.path(), "a.cfg", SHEPP_2D);
    let run = |name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        let mut args = vec!["simulate", "--config", s(&c), "--output", s(&out)];
        args.extend_from_slice(extra);
        ok(ctkrylov(&args));
        fs::read(out.join("noisy.raw")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &["--threads", "3"]);
    let c2 = run("c", &["--seed", "5"]);
    assert_eq!(a, b);
    assert_ne!(a, c2);
}

#[test]
fn lsqr_reconstruction_log() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let c = write_cfg(tmp.path(), "r.cfg", &format!("{SHEPP_2D}solver = lsqr\nmax_iters = 30\n"));
    let out = tmp.path().join("rec");
    ok(ctkrylov(&["reconstruct", "--config", s(&c), "--projections", s(&sim.join("noisy")), "--output", s(&out)]));
    let csv = Csv::read(&out.join("convergence.csv"));
    assert_eq!(csv.header, ["iter", "implicit_residual", "explicit_residual", "relative_error", "lambda"]);
    assert!(!csv.rows.is_empty() && csv.rows.len() <= 30);
    let r = csv.numbers("implicit_residual");
    assert!(r.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{r:?}");
    // no ground truth configured
    assert!(csv.column("relative_error").iter().all(String::is_empty));
    let recon: Volume<f32> = read_volume(&out.join("reconstruction")).unwrap();
    assert_eq!((recon.nx, recon.ny, recon.nz), (64, 64, 1));
    assert!(out.join("reconstruction_transversal.pgm").is_file());
    let meta = fs::read_to_string(out.join("reconstruct.cfg")).unwrap();
    assert!(meta.contains("# stop_reason = "));
}

#[test]
fn unknown_solver_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let c = write_cfg(tmp.path(), "r.cfg", &format!("{SHEPP_2D}solver = kaczmarz\n"));
    let out = ctkrylov(&[
        "reconstruct",
        "--config",
        s(&c),
        "--projections",
        s(&sim.join("noisy")),
        "--output",
        s(&tmp.path().join("rec")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kaczmarz"));
}

#[test]
fn mismatched_projections_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let text = SHEPP_2D.replace("angles = 60", "angles = 59") + "solver = lsqr\n";
    let c = write_cfg(tmp.path(), "r.cfg", &text);
    let out = ctkrylov(&[
        "reconstruct",
        "--config",
        s(&c),
        "--projections",
        s(&sim.join("noisy")),
        "--output",
        s(&tmp.path().join("rec")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn discrepancy_hybrid_logs_lambda_from_the_first_row() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let out = tmp.path().join("rec");
    let c = write_cfg(
        tmp.path(),
        "r.cfg",
        &format!("{SHEPP_2D}solver = hybrid_lsqr\nstrategy = dp\nnl = 0.015\nmax_iters = 20\n"),
    );
    ok(ctkrylov(&["reconstruct", "--config", s(&c), "--projections", s(&sim.join("noisy")), "--output", s(&out)]));
    let csv = Csv::read(&out.join("convergence.csv"));
    let lambda = csv.column("lambda");
    assert!(!lambda.is_empty());
    assert!(lambda.iter().all(|v| v.parse::<f64>().is_ok_and(|l| l >= 0.0)), "{lambda:?}");
}

#[test]
fn compare_lsqr_cgls_sirt() {
    let tmp = TempDir::new().unwrap();
    let c = write_cfg(
        tmp.path(),
        "c.cfg",
        &format!("{SHEPP_2D}solvers = lsqr, cgls, sirt\nmax_iters = 60\nstop_on_increase = false\n"),
    );
    let out = tmp.path().join("cmp");
    ok(ctkrylov(&["compare", "--config", s(&c), "--output", s(&out)]));
    let rows = summary(&out);
    assert_eq!(rows.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>(), ["lsqr", "cgls", "sirt"]);
    let lsqr_at = summary_value(&rows, "lsqr", "min_error_iter");
    let sirt_at = summary_value(&rows, "sirt", "min_error_iter");
    assert!(lsqr_at < sirt_at, "lsqr {lsqr_at} sirt {sirt_at}");

    let merged = Csv::read(&out.join("merged.csv"));
    assert_eq!(merged.header.len(), 1 + 3 * 4);
    assert_eq!(merged.header[1], "lsqr.implicit_residual");
    assert_eq!(merged.rows.len(), 60);
    for solver in ["lsqr", "cgls", "sirt"] {
        let own = Csv::read(&out.join(format!("{solver}.csv")));
        assert_eq!(own.column("relative_error"), merged.column(&format!("{solver}.relative_error")));
    }
}

#[test]
fn compare_needs_two_distinct_solvers() {
    let tmp = TempDir::new().unwrap();
    for list in ["lsqr", "lsqr, lsqr", "lsqr, nope"] {
        let c = write_cfg(tmp.path(), "c.cfg", &format!("{SHEPP_2D}solvers = {list}\n"));
        let out = ctkrylov(&["compare", "--config", s(&c), "--output", s(&tmp.path().join("cmp"))]);
        assert_eq!(out.status.code(), Some(2), "{list}");
    }
    assert!(!tmp.path().join("cmp").join("summary.txt").exists());
}

#[test]
fn compare_with_projection_files_needs_ground_truth() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let c = write_cfg(
        tmp.path(),
        "c.cfg",
        &format!("{SHEPP_2D}solvers = lsqr, cgls\nprojections = {}\n", s(&sim.join("noisy"))),
    );
    let out = ctkrylov(&["compare", "--config", s(&c), "--output", s(&tmp.path().join("cmp"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn compare_total_variation_solvers() {
    let tmp = TempDir::new().unwrap();
    let c = write_cfg(
        tmp.path(),
        "c.cfg",
        &format!(
            "{BLOCKS_2D}solvers = cgls, cgls_tv, flsqr_tv\nlambda = 0.1\nmax_iters = 60\nstop_on_increase = false\n\
             concurrent = true\n"
        ),
    );
    let out = tmp.path().join("cmp");
    ok(ctkrylov(&["compare", "--config", s(&c), "--output", s(&out)]));
    let rows = summary(&out);
    let cgls = summary_value(&rows, "cgls", "rebound_ratio");
    let flsqr = summary_value(&rows, "flsqr_tv", "rebound_ratio");
    assert!(cgls >= 0.05, "cgls rebound {cgls}");
    assert!(flsqr < 0.02, "flsqr_tv rebound {flsqr}");
    assert!(summary_value(&rows, "cgls_tv", "min_rel_error") < summary_value(&rows, "cgls", "min_rel_error"));
}

#[test]
fn in_memory_and_file_compare_agree() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let base = format!("{SHEPP_2D}solvers = lsqr, sirt\nmax_iters = 10\n");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let c = write_cfg(tmp.path(), "a.cfg", &base);
    ok(ctkrylov(&["compare", "--config", s(&c), "--output", s(&a)]));
    let c = write_cfg(
        tmp.path(),
        "b.cfg",
        &format!("{base}projections = {}\nground_truth = {}\n", s(&sim.join("noisy")), s(&sim.join("phantom"))),
    );
    ok(ctkrylov(&["compare", "--config", s(&c), "--output", s(&b)]));
    assert_eq!(fs::read(a.join("merged.csv")).unwrap(), fs::read(b.join("merged.csv")).unwrap());
}

#[test]
fn metadata_reproduces_the_run() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    // simulate.cfg already names the projections and the phantom
    let c = {
        let text = fs::read_to_string(sim.join("simulate.cfg")).unwrap();
        write_cfg(tmp.path(), "r.cfg", &(with_key(&text, "max_iters", "25") + "solver = lsmr\nlambda = 0.05\n"))
    };
    ok(ctkrylov(&["reconstruct", "--config", s(&c), "--output", s(&first)]));
    ok(ctkrylov(&["reconstruct", "--config", s(&first.join("reconstruct.cfg")), "--output", s(&second)]));
    for f in ["convergence.csv", "reconstruction.raw", "reconstruction.hdr"] {
        assert_eq!(fs::read(first.join(f)).unwrap(), fs::read(second.join(f)).unwrap(), "{f}");
    }
    let csv = Csv::read(&first.join("convergence.csv"));
    assert!(csv.column("relative_error").iter().all(|v| !v.is_empty()));

    let resim = tmp.path().join("resim");
    ok(ctkrylov(&["simulate", "--config", s(&sim.join("simulate.cfg")), "--output", s(&resim)]));
    assert_eq!(fs::read(sim.join("noisy.raw")).unwrap(), fs::read(resim.join("noisy.raw")).unwrap());
}

#[test]
fn single_precision_tracks_double() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let c = {
        let text = fs::read_to_string(sim.join("simulate.cfg")).unwrap();
        let text = with_key(&with_key(&text, "max_iters", "30"), "stop_on_increase", "false");
        write_cfg(tmp.path(), "r.cfg", &(text + "solver = cgls\n"))
    };
    let run = |p: &str| {
        let out = tmp.path().join(p);
        ok(ctkrylov(&["reconstruct", "--config", s(&c), "--output", s(&out), "--precision", p]));
        Csv::read(&out.join("convergence.csv")).numbers("relative_error")
    };
    let single = run("single");
    let double = run("double");
    // Rounding only shows once the leading singular values have converged;
    // after that f32 lags by an iteration or two.
    for (a, b) in single.iter().zip(&double).take(5) {
        assert!((a - b).abs() < 1e-4 * b, "{a} vs {b}");
    }
    let best = |e: &[f64]| e.iter().copied().fold(f64::INFINITY, f64::min);
    assert!((best(&single) - best(&double)).abs() < 0.05 * best(&double));
}

#[test]
fn inputs_are_not_modified() {
    let tmp = TempDir::new().unwrap();
    let sim = simulate(tmp.path(), SHEPP_2D);
    let inputs = ["noisy.raw", "noisy.hdr", "phantom.raw", "phantom.hdr", "simulate.cfg"].map(|f| sim.join(f));
    let before: Vec<Vec<u8>> = inputs.iter().map(|p| fs::read(p).unwrap()).collect();

    let c = {
        let text = fs::read_to_string(sim.join("simulate.cfg")).unwrap();
        write_cfg(tmp.path(), "r.cfg", &(with_key(&text, "max_iters", "5") + "solver = sirt\n"))
    };
    // writing next to the inputs is allowed
    ok(ctkrylov(&["reconstruct", "--config", s(&c), "--output", s(&sim)]));
    // overwriting them is not
    let out = ctkrylov(&["simulate", "--config", s(&sim.join("simulate.cfg")), "--output", s(&sim)]);
    assert_eq!(out.status.code(), Some(2));

    let after: Vec<Vec<u8>> = inputs.iter().map(|p| fs::read(p).unwrap()).collect();
    assert!(before == after);
}
