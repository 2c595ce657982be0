mod common;

use common::*;
use ctkrylov::metrics::*;
use ctkrylov::operators::{Backprojector, CtProjector, OperatorPair};
use ctkrylov::solvers::{lsqr, SolverOptions};
use ctkrylov::Precision;
use proptest::prelude::*;

fn log_with(implicit: Vec<f64>, explicit: Vec<f64>) -> ConvergenceLog {
    ConvergenceLog {
        implicit_residual: implicit,
        explicit_residual: explicit,
        ..ConvergenceLog::new("t", Precision::Double, true)
    }
}

#[test]
fn residual_of_exact_solution_is_zero() {
    let a = dense(&random_rows(8, 8, 1));
    let x = normal_vec(8, &mut rng(2));
    let b = a.forward(&x);
    assert!(relative_residual(&a, &x, &b).unwrap() < 1e-12);
    assert_eq!(relative_residual(&a, &[0.0; 8], &b).unwrap(), 1.0);
}

#[test]
fn residual_matches_hand_computation() {
    let a = ctkrylov::operators::dense_pair(&[vec![1.0, 2.0], vec![0.0, 1.0], vec![3.0, -1.0]]).unwrap();
    let x = [1.0, 1.0];
    let b = [2.0, 2.0, 2.0];
    // Ax = (3, 1, 2), r = (1, −1, 0), ‖r‖ = √2, ‖b‖ = √12.
    let got = relative_residual(&a, &x, &b).unwrap();
    assert!((got - (2.0f64 / 12.0).sqrt()).abs() < 1e-15);
    assert!(relative_residual(&a, &x, &[0.0; 3]).is_err());
    assert!(relative_residual(&a, &[1.0], &b).is_err());
}

#[test]
fn relative_error_cases() {
    assert_eq!(relative_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
    assert!((relative_error(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 1.0).abs() < 1e-15);
    assert!((relative_error(&[3.0, 0.0], &[3.0, 4.0]).unwrap() - 0.8).abs() < 1e-15);
    assert!(relative_error(&[1.0], &[0.0]).is_err());
    assert!(relative_error(&[1.0, 2.0], &[1.0]).is_err());
}

#[test]
fn semiconvergence_statistics() {
    let s = semiconvergence_of(&[1.0, 0.8, 0.5, 0.3]).unwrap();
    assert_eq!((s.min_index, s.rebound_ratio), (3, 0.0));
    let s = semiconvergence_of(&[1.0, 0.4, 0.9]).unwrap();
    assert_eq!(s.min_index, 1);
    assert!((s.rebound_ratio - 1.25).abs() < 1e-12);
    assert!(semiconvergence_of(&[1.0, 0.5]).is_err());
    let log = log_with(vec![1.0; 3], vec![1.0; 3]);
    assert!(detect_semiconvergence(&log).is_err());
}

#[test]
fn lsqr_semiconverges_on_noisy_phantom() {
    let e = shepp_logan_64();
    let a = CtProjector::new(e.geometry.clone(), Backprojector::Matched).unwrap();
    let opts = SolverOptions { ground_truth: Some(e.truth.data.clone()), ..fixed_iters(60) };
    let r = lsqr(&a, &e.noisy.data, &opts).unwrap();
    let s = detect_semiconvergence(&r.log).unwrap();
    assert!(s.rebound_ratio >= 0.05, "{}", s.rebound_ratio);
}

#[test]
fn divergence_cases() {
    assert_eq!(residual_divergence(&log_with(vec![0.5, 0.2], vec![0.5, 0.2])).unwrap(), 0.0);
    assert!((residual_divergence(&log_with(vec![0.5, 0.2], vec![0.5, 0.3])).unwrap() - 0.5).abs() < 1e-15);
    assert!(residual_divergence(&log_with(vec![], vec![])).is_err());
    assert!(residual_divergence(&log_with(vec![1.0], vec![1.0, 2.0])).is_err());

    let a = dense(&random_rows(20, 15, 3));
    let b = normal_vec(20, &mut rng(4));
    let r = lsqr(&a, &b, &fixed_iters(15)).unwrap();
    assert!(residual_divergence(&r.log).unwrap() < 1e-8);
}

#[test]
fn single_precision_unmatched_run_diverges() {
    let e = shepp_logan_64();
    let matched = CtProjector::<f64>::new(e.geometry.clone(), Backprojector::Matched).unwrap();
    let reference = lsqr(&matched, &e.noisy.data, &fixed_iters(60)).unwrap();
    let a32 = CtProjector::<f32>::new(e.geometry.clone(), Backprojector::VoxelDriven).unwrap();
    let b32: Vec<f32> = e.noisy.data.iter().map(|&v| v as f32).collect();
    let unmatched = lsqr(&a32, &b32, &fixed_iters(60)).unwrap();
    let (d_ref, d) = (residual_divergence(&reference.log).unwrap(), residual_divergence(&unmatched.log).unwrap());
    assert!(d >= 10.0 * d_ref, "{d} vs {d_ref}");
    assert!(!unmatched.log.matched);
    assert_eq!(unmatched.log.precision, Precision::Single);
}

#[test]
fn csv_layout() {
    let mut log = log_with(vec![1.0, 0.5], vec![1.0, 0.25]);
    log.lambda = Some(vec![0.1, 0.02]);
    let csv = log.to_csv_string().unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines[1], "1,1.00000000000,1.00000000000,,0.100000000000");
    assert_eq!(lines[2], "2,0.500000000000,0.250000000000,,0.0200000000000");
    log.lambda = Some(vec![0.1]);
    assert!(log.to_csv_string().is_err());
}

#[test]
fn decimal_formatting() {
    assert_eq!(format_decimal(0.0), "0");
    assert_eq!(format_decimal(1234.5), "1234.50000000");
    assert!(!format_decimal(3.2e-9).contains('e'));
    assert!((format_decimal(3.2e-9).parse::<f64>().unwrap() - 3.2e-9).abs() < 1e-20);
}

proptest! {
    #[test]
    fn rebound_is_nonnegative_and_min_is_first(err in proptest::collection::vec(0.01f64..10.0, 3..40)) {
        let s = semiconvergence_of(&err).unwrap();
        prop_assert!(s.rebound_ratio >= 0.0);
        prop_assert!(err[..s.min_index].iter().all(|&e| e > err[s.min_index]));
        prop_assert!(err.iter().all(|&e| e >= err[s.min_index]));
    }

    #[test]
    fn decimal_round_trips_to_twelve_digits(x in 1e-12f64..1e6) {
        let back: f64 = format_decimal(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x);
    }
}
