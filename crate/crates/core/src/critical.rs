//! Spectral radius of the transfer matrix, the critical inverse temperature
//! and the Perron vector.
//!
//! For a finite model every generator has a successor, so the transition
//! graph has a cycle and `r(β)`, the spectral radius of `AN^{-β}`, is
//! continuous and strictly decreasing from `r(0) = r(A) ≥ 1` to 0. The
//! abscissa of the partition function is the root of `r(β) = 1`; the
//! convergence interval is open at that root.

use serde::Serialize;
use thiserror::Error;

use crate::graph;
use crate::linalg::{self, DominantPair, PowerSettings, RadiusMethod, SparseRows};
use crate::model::SystemModel;
use crate::partition::{transfer_matrix, TransferMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CriticalError {
    #[error("the transition matrix is not irreducible")]
    NotIrreducible,
    #[error("shell length must be at least 2, got {0}")]
    InvalidLength(usize),
    #[error("shell sum of length {0} vanishes")]
    DegenerateShells(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalConfig {
    pub power: PowerSettings,
    /// Width of the final bisection bracket on `β`.
    pub bisection_tol: f64,
    /// `r(0) ≤ 1 + permutation_tol` puts the root at `β = 0`.
    pub permutation_tol: f64,
}

impl Default for CriticalConfig {
    fn default() -> Self {
        CriticalConfig {
            power: PowerSettings::default(),
            bisection_tol: 1e-10,
            permutation_tol: 1e-9,
        }
    }
}

pub(crate) fn spectral_radius_of(tm: &TransferMatrix, settings: &PowerSettings) -> f64 {
    if tm.beta == f64::INFINITY {
        return 0.0;
    }
    linalg::dominant_pair(&tm.sparse, settings).value
}

/// Dominant eigenvalue modulus of `AN^{-β}`; exactly 0 at `β = ∞`.
pub fn spectral_radius(model: &SystemModel, beta: f64, cfg: &CriticalConfig) -> f64 {
    spectral_radius_of(&transfer_matrix(model, beta), &cfg.power)
}

/// Eigenpair together with the method that produced it.
pub fn dominant(model: &SystemModel, beta: f64, cfg: &CriticalConfig) -> DominantPair {
    if beta == f64::INFINITY {
        return DominantPair {
            value: 0.0,
            vector: vec![0.0; model.size()],
            iterations: 0,
            method: RadiusMethod::Exact,
        };
    }
    linalg::dominant_pair(&transfer_matrix(model, beta).sparse, &cfg.power)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalReport {
    pub beta_c: f64,
    /// The convergence interval is `(β_c, ∞]`.
    pub interval_open_at_left: bool,
    /// The three critical temperatures (total, fixed-target, fixed
    /// source-and-target) coincide.
    pub coincide: bool,
    /// `r(0) ≤ 1`: the root sits at `β = 0` and no positive temperature is
    /// critical.
    pub permutation_like: bool,
    pub spectral_radius_at_critical: f64,
    pub perron_at_critical: Option<Vec<f64>>,
    pub bisection_width: f64,
}

/// Locate `β_c` by bisection on `r(β) − 1`.
pub fn beta_c(model: &SystemModel, cfg: &CriticalConfig) -> CriticalReport {
    let r = |b: f64| spectral_radius(model, b, cfg);
    let irreducible = graph::is_strongly_connected(model.successor_lists());
    let r0 = r(0.0);
    if r0 <= 1.0 + cfg.permutation_tol {
        return CriticalReport {
            beta_c: 0.0,
            interval_open_at_left: true,
            coincide: true,
            permutation_like: true,
            spectral_radius_at_critical: r0,
            perron_at_critical: None,
            bisection_width: 0.0,
        };
    }
    let mut hi = 1.0;
    while r(hi) >= 1.0 {
        hi *= 2.0;
    }
    let (lo, hi) = linalg::bisect_decreasing(|b| r(b) - 1.0, 0.0, hi, cfg.bisection_tol);
    let bc = 0.5 * (lo + hi);
    let perron = irreducible.then(|| perron_vector(model, bc, cfg).expect("irreducible"));
    CriticalReport {
        beta_c: bc,
        interval_open_at_left: true,
        coincide: true,
        permutation_like: false,
        spectral_radius_at_critical: r(bc),
        perron_at_critical: perron,
        bisection_width: hi - lo,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AbscissaEstimate {
    pub beta: f64,
    /// `s_L(β)/s_{L−1}(β) − 1` at the estimate.
    pub residual: f64,
}

/// Ratio `s_L(β)/s_{L−1}(β)` of consecutive shell sums computed through
/// powers of the transfer matrix, rescaled at every step.
fn shell_ratio(model: &SystemModel, beta: f64, len: usize) -> f64 {
    let tm = transfer_matrix(model, beta);
    let min_ln = (0..model.size())
        .map(|x| model.ln_energy(x))
        .fold(f64::INFINITY, f64::min);
    // Scaling w by a constant leaves the ratio unchanged.
    let w: Vec<f64> = (0..model.size())
        .map(|x| (-beta * (model.ln_energy(x) - min_ln)).exp())
        .collect();
    let mut u = vec![1.0; model.size()];
    for _ in 0..len.saturating_sub(2) {
        u = tm.apply(&u);
        let mx = u.iter().fold(0.0f64, |a, &b| a.max(b));
        if mx > 0.0 {
            u.iter_mut().for_each(|v| *v /= mx);
        }
    }
    let mu = tm.apply(&u);
    let num: f64 = w.iter().zip(&mu).map(|(a, b)| a * b).sum();
    let den: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
    num / den
}

/// Estimate the abscissa from the growth of the length-`L` shells: the root
/// of `s_L(β)/s_{L−1}(β) = 1`.
pub fn abscissa_estimate(
    model: &SystemModel,
    len: usize,
    cfg: &CriticalConfig,
) -> Result<AbscissaEstimate, CriticalError> {
    if len < 2 {
        return Err(CriticalError::InvalidLength(len));
    }
    let ratio = |b: f64| shell_ratio(model, b, len);
    let r0 = ratio(0.0);
    if !(r0 > 0.0) {
        return Err(CriticalError::DegenerateShells(len));
    }
    if r0 <= 1.0 {
        return Ok(AbscissaEstimate {
            beta: 0.0,
            residual: r0 - 1.0,
        });
    }
    let mut hi = 1.0;
    while ratio(hi) >= 1.0 {
        hi *= 2.0;
    }
    let (lo, hi) = linalg::bisect_decreasing(|b| ratio(b) - 1.0, 0.0, hi, cfg.bisection_tol);
    let beta = 0.5 * (lo + hi);
    Ok(AbscissaEstimate {
        beta,
        residual: ratio(beta) - 1.0,
    })
}

/// Perron vector of `AN^{-β}`, normalized so that `Σ_x N(x)^{-β} v_x = 1`.
pub fn perron_vector(model: &SystemModel, beta: f64, cfg: &CriticalConfig) -> Result<Vec<f64>, CriticalError> {
    if !graph::is_strongly_connected(model.successor_lists()) {
        return Err(CriticalError::NotIrreducible);
    }
    let pair = dominant(model, beta, cfg);
    let w = model.weights(beta);
    let mut v: Vec<f64> = pair.vector.iter().map(|x| x.abs()).collect();
    let s: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
    v.iter_mut().for_each(|x| *x /= s);
    Ok(v)
}

/// Spectral radius of `M(β)` restricted to the generators in `comp`.
pub fn component_radius(model: &SystemModel, comp: &[usize], beta: f64, power: &PowerSettings) -> f64 {
    let pos: std::collections::HashMap<usize, usize> = comp.iter().enumerate().map(|(i, &x)| (x, i)).collect();
    let rows = comp
        .iter()
        .map(|&x| {
            model
                .successors(x)
                .iter()
                .filter_map(|y| pos.get(y).map(|&j| (j, model.weight(*y, beta))))
                .collect()
        })
        .collect();
    linalg::dominant_pair(&SparseRows { size: comp.len(), rows }, power).value
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rows: &[&[i64]], n: &[f64]) -> SystemModel {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        SystemModel::from_01(&rows, n.to_vec()).unwrap()
    }

    fn full(n: usize, energy: f64) -> SystemModel {
        let rows = vec![vec![1i64; n]; n];
        SystemModel::from_01(&rows, vec![energy; n]).unwrap()
    }

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn radius_examples() {
        let cfg = CriticalConfig::default();
        let f2 = full(2, 2.0);
        for beta in [0.5, 1.0, 2.0, 3.0] {
            assert!((spectral_radius(&f2, beta, &cfg) - 2f64.powf(1.0 - beta)).abs() < 1e-12);
        }
        let cyc = model(&[&[0, 1], &[1, 0]], &[2.0, 2.0]);
        assert!((spectral_radius(&cyc, 1.0, &cfg) - 0.5).abs() < 1e-12);
        assert!(spectral_radius(&cyc, 0.0, &cfg) >= 1.0 - 1e-12);
        assert_eq!(spectral_radius(&cyc, f64::INFINITY, &cfg), 0.0);
    }

    #[test]
    fn beta_c_examples() {
        let cfg = CriticalConfig::default();
        let e = std::f64::consts::E;
        let r = beta_c(&full(3, e), &cfg);
        assert!((r.beta_c - 3f64.ln()).abs() < 1e-9);
        assert!(!r.permutation_like);
        let gm = model(&[&[0, 1], &[1, 1]], &[e, e]);
        let r = beta_c(&gm, &cfg);
        assert!((r.beta_c - PHI.ln()).abs() < 1e-9);
        assert!((r.spectral_radius_at_critical - 1.0).abs() < 1e-9);
        let cyc = model(&[&[0, 1], &[1, 0]], &[2.0, 2.0]);
        let r = beta_c(&cyc, &cfg);
        assert_eq!(r.beta_c, 0.0);
        assert!(r.permutation_like);
        assert!(r.perron_at_critical.is_none());
    }

    #[test]
    fn abscissa_examples() {
        let cfg = CriticalConfig::default();
        let est = abscissa_estimate(&full(2, 2.0), 10, &cfg).unwrap();
        assert!((est.beta - 1.0).abs() < 1e-9);
        let cyc = model(&[&[0, 1], &[1, 0]], &[2.0, 2.0]);
        assert_eq!(abscissa_estimate(&cyc, 10, &cfg).unwrap().beta, 0.0);
        let e = std::f64::consts::E;
        let gm = model(&[&[0, 1], &[1, 1]], &[e, e]);
        let est = abscissa_estimate(&gm, 20, &cfg).unwrap();
        assert!((est.beta - PHI.ln()).abs() < 1e-2);
        assert_eq!(abscissa_estimate(&gm, 1, &cfg), Err(CriticalError::InvalidLength(1)));
    }

    #[test]
    fn perron_examples() {
        let cfg = CriticalConfig::default();
        let v = perron_vector(&full(2, 2.0), 1.0, &cfg).unwrap();
        assert!((v[0] - 1.0).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
        let e = std::f64::consts::E;
        let gm = model(&[&[0, 1], &[1, 1]], &[e, e]);
        let v = perron_vector(&gm, PHI.ln(), &cfg).unwrap();
        assert!((v[0] - 1.0 / PHI).abs() < 1e-10);
        assert!((v[1] - 1.0).abs() < 1e-10);
        let tri = model(&[&[1, 1], &[0, 1]], &[2.0, 2.0]);
        assert_eq!(perron_vector(&tri, 1.0, &cfg), Err(CriticalError::NotIrreducible));
    }
}
