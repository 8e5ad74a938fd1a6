#![allow(dead_code)]

use kms_core::critical::{self, CriticalConfig};
use kms_core::graph;
use kms_core::words::{count_words, Endpoints};
use kms_core::SystemModel;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn model(rows: &[&[i64]], n: &[f64]) -> SystemModel {
    let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
    SystemModel::from_01(&rows, n.to_vec()).unwrap()
}

pub fn full(n: usize, energy: f64) -> SystemModel {
    let rows = vec![vec![1i64; n]; n];
    SystemModel::from_01(&rows, vec![energy; n]).unwrap()
}

/// Random 0-1 matrix of size `m` at the given density, resampled until it is
/// irreducible and not a permutation matrix.
pub fn random_irreducible(rng: &mut ChaCha8Rng, m: usize, density: f64) -> Vec<Vec<bool>> {
    loop {
        let a: Vec<Vec<bool>> = (0..m)
            .map(|_| (0..m).map(|_| rng.random_bool(density)).collect())
            .collect();
        let succ: Vec<Vec<usize>> = a
            .iter()
            .map(|row| row.iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j).collect())
            .collect();
        let branching = a.iter().any(|row| row.iter().filter(|&&b| b).count() > 1);
        if branching && graph::is_strongly_connected(&succ) {
            return a;
        }
    }
}

pub fn to_model(a: &[Vec<bool>], energies: Vec<f64>) -> SystemModel {
    let rows: Vec<Vec<i64>> = a.iter().map(|r| r.iter().map(|&b| b as i64).collect()).collect();
    SystemModel::from_01(&rows, energies).unwrap()
}

/// Irreducible non-permutation models with `m ∈ 2..=max_m` and energies
/// drawn uniformly from `[lo, hi]`.
pub fn suite(seed: u64, count: usize, max_m: usize, lo: f64, hi: f64) -> Vec<SystemModel> {
    let mut rng = rng(seed);
    (0..count)
        .map(|_| {
            let m = rng.random_range(2..=max_m);
            let a = random_irreducible(&mut rng, m, 0.5);
            let n = (0..m).map(|_| rng.random_range(lo..=hi)).collect();
            to_model(&a, n)
        })
        .collect()
}

/// Number of prefixes a word walk up to length `len` would visit.
pub fn words_up_to(model: &SystemModel, len: usize) -> u128 {
    (0..=len).map(|n| count_words(model, n, Endpoints::free())).sum()
}

pub fn dense_a(model: &SystemModel) -> DMatrix<f64> {
    let m = model.size();
    DMatrix::from_fn(m, m, |x, y| if model.entry(x, y) { 1.0 } else { 0.0 })
}

/// Spectral radius from the full eigenvalue set.
pub fn eigen_radius(a: &DMatrix<f64>) -> f64 {
    a.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Right null vector of `a` from the SVD, made nonnegative.
pub fn svd_null_vector(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.ncols();
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.unwrap();
    let (k, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v: Vec<f64> = (0..n).map(|j| vt[(k, j)]).collect();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.into_iter().map(|x| x * sign).collect()
}

/// Number of affinely independent points among `points`.
pub fn affine_rank(points: &[Vec<f64>]) -> usize {
    if points.is_empty() {
        return 0;
    }
    let d = points[0].len();
    let rows = points.len() - 1;
    if rows == 0 {
        return 1;
    }
    let diff = DMatrix::from_fn(rows, d, |i, j| points[i + 1][j] - points[0][j]);
    let sv = diff.singular_values();
    let top = sv.iter().copied().fold(0.0, f64::max);
    1 + sv.iter().filter(|&&s| s > 1e-9 * top.max(1.0)).count()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Reducible model: a small block feeding a full `l×l` block with uniform
/// energy `nl`, with no path back. Returns the model, the block root
/// `ln l / ln nl` and the number of small-block generators.
pub fn two_block(rng: &mut ChaCha8Rng, ccfg: &CriticalConfig) -> (SystemModel, f64, usize) {
    loop {
        let s = rng.random_range(1..=2);
        let l = rng.random_range(2..=3);
        let nl = rng.random_range(1.5..=3.0);
        let m = s + l;
        let mut a = vec![vec![false; m]; m];
        if s == 1 {
            a[0][0] = true;
        } else {
            a[0][1] = true;
            a[1][0] = true;
            a[0][0] = rng.random_bool(0.5);
        }
        for row in a.iter_mut().take(s) {
            for v in row.iter_mut().skip(s) {
                *v = rng.random_bool(0.5);
            }
        }
        a[0][s] = true;
        for row in a.iter_mut().skip(s) {
            for v in row.iter_mut().skip(s) {
                *v = true;
            }
        }
        let mut n: Vec<f64> = (0..s).map(|_| rng.random_range(1.5..=4.0)).collect();
        n.extend(std::iter::repeat_n(nl, l));
        let model = to_model(&a, n);
        let root = (l as f64).ln() / nl.ln();
        let small: Vec<usize> = (0..s).collect();
        let r_small = critical::component_radius(&model, &small, root, &ccfg.power);
        if r_small < 0.9 {
            return (model, root, s);
        }
    }
}
