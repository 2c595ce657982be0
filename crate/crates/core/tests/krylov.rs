mod common;

use common::*;
use ctkrylov::krylov::{gk_init, ArnoldiState, BidiagState, FlexibleState, Step};
use ctkrylov::operators::OperatorPair;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn cols(basis: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(basis[0].len(), basis.len(), |i, j| basis[j][i])
}

fn expanded(rows: &[Vec<f64>], b: &[f64], k: usize) -> BidiagState<f64> {
    let pair = dense(rows);
    let mut s = gk_init(&pair, b, true).unwrap();
    for _ in 0..k {
        s.expand(&pair);
    }
    s
}

#[test]
fn identity_initialization() {
    let id: Vec<Vec<f64>> = (0..4).map(|i| (0..4).map(|j| f64::from(i == j)).collect()).collect();
    let e1 = vec![1.0, 0.0, 0.0, 0.0];
    let s = gk_init(&dense(&id), &e1, false).unwrap();
    assert_eq!(s.u_basis()[0], e1);
    assert_eq!(s.v_basis()[0], e1);
    assert_eq!(s.alphas()[0], 1.0);
    assert_eq!(s.beta1(), 1.0);
}

#[test]
fn initial_constants_match_explicit_normalization() {
    let rows = random_rows(6, 4, 1);
    let b = normal_vec(6, &mut rng(2));
    let s = gk_init(&dense(&rows), &b, false).unwrap();
    let a = to_matrix(&rows);
    let bv = DVector::from_column_slice(&b);
    let beta = bv.norm();
    let atb = a.transpose() * (&bv / beta);
    assert!((s.beta1() - beta).abs() < 1e-14 * beta);
    assert!((s.alphas()[0] - atb.norm()).abs() < 1e-14 * atb.norm());
    assert!(rel_diff(&s.v_basis()[0], (atb.clone() / atb.norm()).as_slice()) < 1e-14);
}

#[test]
fn zero_rhs_is_rejected() {
    let rows = random_rows(6, 4, 3);
    assert!(gk_init(&dense(&rows), &[0.0; 6], false).is_err());
    assert!(ArnoldiState::<f64>::new(&[0.0; 3], true).is_err());
    assert!(gk_init(&dense(&rows), &[0.0; 5], false).is_err());
}

#[test]
fn factorization_residual_and_orthogonality() {
    let rows = random_rows(30, 20, 4);
    let b = normal_vec(30, &mut rng(5));
    let s = expanded(&rows, &b, 10);
    assert_eq!(s.k(), 10);
    let a = to_matrix(&rows);
    let v = cols(&s.v_basis()[..10]);
    let u = cols(&s.u_basis()[..11]);
    let res = (&a * &v - &u * s.projected_matrix()).norm() / a.norm();
    assert!(res < 1e-12, "{res}");
    let vv = cols(s.v_basis());
    let gram = vv.transpose() * &vv;
    assert!((gram - DMatrix::identity(11, 11)).abs().max() < 1e-12);
}

#[test]
fn orthogonal_operator_breaks_down_immediately() {
    let q = to_matrix(&random_rows(6, 6, 6)).qr().q();
    let rows: Vec<Vec<f64>> = (0..6).map(|i| q.row(i).iter().copied().collect()).collect();
    let pair = dense(&rows);
    let b = normal_vec(6, &mut rng(7));
    let mut s = gk_init(&pair, &b, true).unwrap();
    assert_eq!(s.expand(&pair), Step::Breakdown);
    assert_eq!(s.k(), 1);
    // One step already solves the system exactly.
    let y = s.beta1() / s.alphas()[0];
    let x: Vec<f64> = s.v_basis()[0].iter().map(|v| v * y).collect();
    assert!(rel_diff(&pair.forward(&x), &b) < 1e-12);
}

#[test]
fn right_basis_spans_normal_krylov_space() {
    let rows = random_rows(10, 8, 8);
    let a = to_matrix(&rows);
    let b = normal_vec(10, &mut rng(9));
    let k = 5;
    let s = expanded(&rows, &b, k);
    let v = cols(&s.v_basis()[..k]);
    let ata = a.transpose() * &a;
    let mut w = a.transpose() * DVector::from_column_slice(&b);
    for _ in 0..k {
        let resid = &w - &v * (v.transpose() * &w);
        assert!(resid.norm() / w.norm() < 1e-8);
        w = &ata * w;
    }
}

#[test]
fn arnoldi_identity_converges_at_once() {
    let mut s = ArnoldiState::<f64>::new(&[1.0, 2.0, 2.0], true).unwrap();
    assert_eq!(s.expand(|w| w.to_vec()), Step::Breakdown);
    assert_eq!(s.k(), 1);
    assert!((s.column(0)[0] - 1.0).abs() < 1e-15);
    assert_eq!(s.beta1(), 3.0);
}

#[test]
fn arnoldi_on_symmetric_matrix_is_tridiagonal() {
    let r = to_matrix(&random_rows(8, 8, 10));
    let m = &r + r.transpose();
    let pair = dense(&(0..8).map(|i| m.row(i).iter().copied().collect()).collect::<Vec<_>>());
    let mut s = ArnoldiState::new(&normal_vec(8, &mut rng(11)), true).unwrap();
    for _ in 0..6 {
        s.expand(|w| pair.forward(w));
    }
    let h = s.hessenberg();
    for j in 0..h.ncols() {
        for i in 0..j.saturating_sub(1) {
            assert!(h[(i, j)].abs() < 1e-10, "h[{i},{j}] = {}", h[(i, j)]);
        }
    }
}

#[test]
fn arnoldi_factorization_residual() {
    let rows = random_rows(12, 12, 12);
    let m = to_matrix(&rows);
    let pair = dense(&rows);
    let mut s = ArnoldiState::new(&normal_vec(12, &mut rng(13)), true).unwrap();
    for _ in 0..9 {
        s.expand(|w| pair.forward(w));
    }
    let w = cols(s.basis());
    let wk = w.columns(0, 9).into_owned();
    assert!((&m * wk - &w * s.hessenberg()).norm() < 1e-10);
}

#[test]
fn flexible_with_identity_matches_plain_bidiagonalization() {
    let rows = random_rows(10, 6, 14);
    let pair = dense(&rows);
    let b = normal_vec(10, &mut rng(15));
    let plain = expanded(&rows, &b, 5);
    let mut flex = FlexibleState::new(&pair, &b).unwrap();
    for _ in 0..5 {
        flex.expand(&pair, |v| v.to_vec());
    }
    let (h, m) = (plain.projected_matrix(), flex.projected_matrix());
    assert!((h.abs() - m.abs()).abs().max() < 1e-10);
}

#[test]
fn flexible_with_fixed_diagonal_factorizes() {
    let rows = random_rows(10, 6, 16);
    let pair = dense(&rows);
    let a = to_matrix(&rows);
    let d: Vec<f64> = (0..6).map(|i| 0.5 + i as f64).collect();
    let mut s = FlexibleState::new(&pair, &normal_vec(10, &mut rng(17))).unwrap();
    for _ in 0..5 {
        s.expand(&pair, |v| v.iter().zip(&d).map(|(a, b)| a * b).collect());
    }
    let z = cols(s.z_basis());
    let u = cols(s.u_basis());
    assert_eq!(s.z_basis().len(), 5);
    assert_eq!(s.u_basis().len(), 6);
    assert!((&a * z - u * s.projected_matrix()).norm() < 1e-8);
}

#[test]
fn flexible_zero_direction_breaks_down() {
    let rows = random_rows(10, 6, 18);
    let pair = dense(&rows);
    let mut s = FlexibleState::new(&pair, &normal_vec(10, &mut rng(19))).unwrap();
    assert_eq!(s.expand(&pair, |v| vec![0.0; v.len()]), Step::Breakdown);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn bidiagonal_factorization_holds(seed in any::<u64>(), m in 6usize..20, n in 2usize..6, k in 1usize..5) {
        let k = k.min(n);
        let rows = random_rows(m, n, seed);
        let b = normal_vec(m, &mut rng(seed ^ 1));
        let s = expanded(&rows, &b, k);
        let a = to_matrix(&rows);
        let v = cols(&s.v_basis()[..k]);
        let u = cols(&s.u_basis()[..k + 1]);
        prop_assert!((&a * &v - &u * s.projected_matrix()).norm() / a.norm() < 1e-10);
        let uu = u.transpose() * &u;
        prop_assert!((uu - DMatrix::identity(k + 1, k + 1)).abs().max() < 1e-10);
    }

    #[test]
    fn short_recurrence_matches_stored(seed in any::<u64>(), k in 1usize..6) {
        let rows = random_rows(15, 8, seed);
        let pair = dense(&rows);
        let b = normal_vec(15, &mut rng(seed ^ 2));
        let mut full = BidiagState::new(&pair, &b, false, true).unwrap();
        let mut short = BidiagState::new(&pair, &b, false, false).unwrap();
        for _ in 0..k {
            full.expand(&pair);
            short.expand(&pair);
        }
        prop_assert_eq!(full.alphas(), short.alphas());
        prop_assert_eq!(full.betas(), short.betas());
        prop_assert_eq!(short.v_basis().len(), 1);
    }
}
