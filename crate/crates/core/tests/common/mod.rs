#![allow(dead_code)]

use ctkrylov::operators::{forward_project, ConeGeometry, DensePair, ProjectionSet, Volume};
use ctkrylov::simulation::{add_noise, make_phantom, NoiseModel, PhantomKind};
use ctkrylov::solvers::SolverOptions;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn random_rows(rows: usize, cols: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..rows).map(|_| normal_vec(cols, &mut r)).collect()
}

pub fn to_matrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j])
}

pub fn dense(rows: &[Vec<f64>]) -> DensePair<f64> {
    DensePair::from_rows(rows).unwrap()
}

/// Solves `(AᵀA + shift·I) x = Aᵀb` by Cholesky.
pub fn normal_solve(a: &DMatrix<f64>, b: &[f64], shift: f64) -> Vec<f64> {
    let n = a.ncols();
    let g = a.transpose() * a + DMatrix::identity(n, n) * shift;
    let rhs = a.transpose() * DVector::from_column_slice(b);
    g.cholesky().unwrap().solve(&rhs).as_slice().to_vec()
}

pub fn rel_diff(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    let den: f64 = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    num / den
}

/// Runs exactly `k` iterations (no tolerance, no increase rule).
pub fn fixed_iters<T: ctkrylov::Real>(k: usize) -> SolverOptions<T> {
    SolverOptions { max_iters: k, stop_on_increase: false, tolerance: 0.0, ..Default::default() }
}

pub struct Experiment {
    pub truth: Volume<f64>,
    pub geometry: ConeGeometry,
    pub clean: ProjectionSet<f64>,
    pub noisy: ProjectionSet<f64>,
}

pub fn experiment(kind: PhantomKind, n: usize, views: usize, i0: f64, seed: u64) -> Experiment {
    let truth: Volume<f64> = make_phantom(kind, n).unwrap();
    let geometry = ConeGeometry::parallel2d(n, truth.spacing, views).unwrap();
    let clean = forward_project(&truth, &geometry).unwrap();
    let noisy = add_noise(&clean, &NoiseModel::new(i0, 0.5, seed).unwrap()).unwrap();
    Experiment { truth, geometry, clean, noisy }
}

/// 64² Shepp-Logan, 60 views, I0 = 1e5, σ = 0.5.
pub fn shepp_logan_64() -> Experiment {
    experiment(PhantomKind::SheppLogan2d, 64, 60, 1e5, 2024)
}

/// 32² nested blocks, 20 views, I0 = 1e4, σ = 0.5.
pub fn blocks_32() -> Experiment {
    experiment(PhantomKind::PiecewiseBlocks2d, 32, 20, 1e4, 2024)
}
