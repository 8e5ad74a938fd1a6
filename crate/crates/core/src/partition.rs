//! Closed-form partition functions through the transfer matrix
//! `M = AN^{-β}`, `M(x, y) = A(x, y) N(y)^{-β}`.
//!
//! Summing admissible words by first and last letter gives
//! `Z_{xy}(β) = N(x)^{-β} [(I − M)^{-1}]_{xy}` whenever the Neumann series of
//! `M` converges, i.e. whenever its spectral radius is below one. The other
//! partition functions follow by summation:
//! `Z_y = Σ_x Z_{xy}` and `Z = 1 + Σ_y Z_y`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::critical::{self, CriticalConfig};
use crate::graph;
use crate::linalg::{kahan_sum, SparseRows};
use crate::model::SystemModel;
use crate::states::RootMeasure;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PartitionError {
    #[error("inverse temperature {0} is not in (0, ∞]")]
    InvalidBeta(f64),
    #[error("root measure has {found} weights but the column space has {expected} points")]
    MeasureDimension { expected: usize, found: usize },
}

/// Value of a series that may diverge.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Series<T> {
    Finite(T),
    Divergent,
}

impl<T> Series<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Series::Finite(v) => Some(v),
            Series::Divergent => None,
        }
    }

    pub fn as_ref(&self) -> Series<&T> {
        match self {
            Series::Finite(v) => Series::Finite(v),
            Series::Divergent => Series::Divergent,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, Series::Divergent)
    }
}

/// `AN^{-β}` in sparse row form.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    pub beta: f64,
    pub sparse: SparseRows,
}

impl TransferMatrix {
    pub fn size(&self) -> usize {
        self.sparse.size
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.sparse.rows[x]
            .iter()
            .find(|&&(j, _)| j == y)
            .map_or(0.0, |&(_, a)| a)
    }

    /// Dense entries, row-major.
    pub fn entries(&self) -> Vec<Vec<f64>> {
        (0..self.size())
            .map(|x| (0..self.size()).map(|y| self.get(x, y)).collect())
            .collect()
    }

    pub fn dense(&self) -> DMatrix<f64> {
        self.sparse.to_dense()
    }

    /// `Mv`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        self.sparse.apply(v, &mut out);
        out
    }
}

pub fn transfer_matrix(model: &SystemModel, beta: f64) -> TransferMatrix {
    let w = model.weights(beta);
    let rows = (0..model.size())
        .map(|x| model.successors(x).iter().map(|&y| (y, w[y])).collect())
        .collect();
    TransferMatrix {
        beta,
        sparse: SparseRows {
            size: model.size(),
            rows,
        },
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvergenceStatus {
    Convergent,
    /// `1 − margin ≤ r(M) < 1`: values are computed but ill-conditioned.
    NearCritical,
    Divergent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PartitionConfig {
    pub margin: f64,
    pub critical: CriticalConfig,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            margin: 1e-9,
            critical: CriticalConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    #[serde(with = "crate::beta_serde")]
    pub beta: f64,
    pub spectral_radius: f64,
    pub status: ConvergenceStatus,
    pub z_xy: Series<Vec<Vec<f64>>>,
    pub z_y: Series<Vec<f64>>,
    pub z_total: Series<f64>,
    /// 1-norm condition number of `I − M` when a solve was performed.
    pub condition_estimate: Option<f64>,
}

impl PartitionReport {
    pub fn z_xy_at(&self, x: usize, y: usize) -> Option<f64> {
        match &self.z_xy {
            Series::Finite(z) => Some(z[x][y]),
            Series::Divergent => None,
        }
    }
}

fn check_beta(beta: f64) -> Result<(), PartitionError> {
    if beta > 0.0 {
        Ok(())
    } else {
        Err(PartitionError::InvalidBeta(beta))
    }
}

/// Evaluate `Z_{xy}`, `Z_y` and `Z` at `β`.
///
/// Convergence is decided by the spectral radius of `M`, never by whether
/// the linear solve happens to succeed.
pub fn evaluate(model: &SystemModel, beta: f64, cfg: &PartitionConfig) -> Result<PartitionReport, PartitionError> {
    check_beta(beta)?;
    let m = model.size();
    let tm = transfer_matrix(model, beta);
    let r = critical::spectral_radius_of(&tm, &cfg.critical.power);
    let status = if r < 1.0 - cfg.margin {
        ConvergenceStatus::Convergent
    } else if r < 1.0 {
        ConvergenceStatus::NearCritical
    } else {
        ConvergenceStatus::Divergent
    };
    let divergent = PartitionReport {
        beta,
        spectral_radius: r,
        status: ConvergenceStatus::Divergent,
        z_xy: Series::Divergent,
        z_y: Series::Divergent,
        z_total: Series::Divergent,
        condition_estimate: None,
    };
    if status == ConvergenceStatus::Divergent {
        return Ok(divergent);
    }

    let i_minus_m = DMatrix::<f64>::identity(m, m) - tm.dense();
    let Some(inv) = i_minus_m.clone().lu().try_inverse() else {
        return Ok(divergent);
    };
    let w = model.weights(beta);
    let z_xy: Vec<Vec<f64>> = (0..m).map(|x| (0..m).map(|y| w[x] * inv[(x, y)]).collect()).collect();
    let z_y: Vec<f64> = (0..m).map(|y| kahan_sum((0..m).map(|x| z_xy[x][y]))).collect();
    let z_total = 1.0 + kahan_sum(z_y.iter().copied());
    let condition = one_norm(&i_minus_m) * one_norm(&inv);
    Ok(PartitionReport {
        beta,
        spectral_radius: r,
        status,
        z_xy: Series::Finite(z_xy),
        z_y: Series::Finite(z_y),
        z_total: Series::Finite(z_total),
        condition_estimate: Some(condition),
    })
}

fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `Z_{xy}(β)` on the generators whose series converge.
///
/// `Z_y` is finite exactly when every strongly connected component that can
/// reach `y` has spectral radius below one; words ending in `y` never leave
/// the ancestors of `y`. Components within `margin` of one count as
/// divergent. Rows and columns outside `convergent` are zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Resolvent {
    pub beta: f64,
    pub convergent: Vec<bool>,
    pub z_xy: Vec<Vec<f64>>,
}

impl Resolvent {
    /// `Z(β, γ)` with the generator masses `g_x = γ(Ω_e^x)`.
    pub fn z_gamma(&self, model: &SystemModel, gamma: &RootMeasure) -> Series<f64> {
        let masses = gamma.generator_masses(model);
        if masses.iter().zip(&self.convergent).any(|(&g, &ok)| g > 0.0 && !ok) {
            return Series::Divergent;
        }
        let m = self.z_xy.len();
        let z_y = (0..m).map(|y| kahan_sum((0..m).map(|x| self.z_xy[x][y])));
        Series::Finite(gamma.total() + kahan_sum(z_y.zip(&masses).map(|(z, g)| z * g)))
    }
}

pub fn resolvent(model: &SystemModel, beta: f64, cfg: &PartitionConfig) -> Result<Resolvent, PartitionError> {
    let report = evaluate(model, beta, cfg)?;
    let m = model.size();
    if let (ConvergenceStatus::Convergent, Series::Finite(z_xy)) = (report.status, report.z_xy) {
        return Ok(Resolvent {
            beta,
            convergent: vec![true; m],
            z_xy,
        });
    }

    let succ = model.successor_lists();
    let mut tainted = vec![false; m];
    let mut stack = Vec::new();
    for comp in graph::strongly_connected_components(succ) {
        let cyclic = comp.len() > 1 || succ[comp[0]].contains(&comp[0]);
        if cyclic && critical::component_radius(model, &comp, beta, &cfg.critical.power) >= 1.0 - cfg.margin {
            for &x in &comp {
                if !tainted[x] {
                    tainted[x] = true;
                    stack.push(x);
                }
            }
        }
    }
    while let Some(x) = stack.pop() {
        for &y in &succ[x] {
            if !tainted[y] {
                tainted[y] = true;
                stack.push(y);
            }
        }
    }

    let keep: Vec<usize> = (0..m).filter(|&x| !tainted[x]).collect();
    let k = keep.len();
    let mut z_xy = vec![vec![0.0; m]; m];
    if k > 0 {
        let sub = DMatrix::from_fn(k, k, |i, j| {
            let (x, y) = (keep[i], keep[j]);
            let id = if i == j { 1.0 } else { 0.0 };
            id - if model.entry(x, y) { model.weight(y, beta) } else { 0.0 }
        });
        let Some(inv) = sub.lu().try_inverse() else {
            return Ok(Resolvent {
                beta,
                convergent: vec![false; m],
                z_xy,
            });
        };
        for (i, &x) in keep.iter().enumerate() {
            let wx = model.weight(x, beta);
            for (j, &y) in keep.iter().enumerate() {
                z_xy[x][y] = wx * inv[(i, j)];
            }
        }
    }
    Ok(Resolvent {
        beta,
        convergent: tainted.iter().map(|t| !t).collect(),
        z_xy,
    })
}

/// `Z(β, γ) = γ(Ω_e) + Σ_x Z_x(β) γ(Ω_e^x)`.
///
/// Finite whenever `γ` only charges generators whose `Z_x` converges, even
/// if `Z(β)` itself diverges.
pub fn z_gamma(
    model: &SystemModel,
    beta: f64,
    gamma: &RootMeasure,
    cfg: &PartitionConfig,
) -> Result<Series<f64>, PartitionError> {
    let d = model.column_space().d();
    if gamma.weights.len() != d {
        return Err(PartitionError::MeasureDimension {
            expected: d,
            found: gamma.weights.len(),
        });
    }
    Ok(resolvent(model, beta, cfg)?.z_gamma(model, gamma))
}

/// `1/(1 − Σ_x N(x)^{-β})` when the sum is below one.
pub fn geometric_bound(model: &SystemModel, beta: f64) -> Option<f64> {
    if !(beta > 0.0) || beta == f64::INFINITY {
        return None;
    }
    let s = kahan_sum(model.weights(beta));
    (s < 1.0).then(|| 1.0 / (1.0 - s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(rows: &[&[i64]], n: &[f64]) -> SystemModel {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        SystemModel::from_01(&rows, n.to_vec()).unwrap()
    }

    fn full2() -> SystemModel {
        model(&[&[1, 1], &[1, 1]], &[2.0, 2.0])
    }

    #[test]
    fn transfer_examples() {
        let tm = transfer_matrix(&full2(), 2.0);
        assert_eq!(tm.entries(), vec![vec![0.25, 0.25], vec![0.25, 0.25]]);
        let gm = model(&[&[0, 1], &[1, 1]], &[3.0, 5.0]);
        let tm0 = transfer_matrix(&gm, 0.0);
        assert_eq!(tm0.entries(), vec![vec![0.0, 1.0], vec![1.0, 1.0]]);
        let tinf = transfer_matrix(&gm, f64::INFINITY);
        assert!(tinf.entries().iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn full2_at_two() {
        let r = evaluate(&full2(), 2.0, &PartitionConfig::default()).unwrap();
        assert_eq!(r.status, ConvergenceStatus::Convergent);
        assert!((r.z_xy_at(0, 0).unwrap() - 0.375).abs() < 1e-15);
        assert!((r.z_total.clone().finite().unwrap() - 2.0).abs() < 1e-14);
        assert!((r.spectral_radius - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infinite_beta_leaves_empty_word() {
        let r = evaluate(&full2(), f64::INFINITY, &PartitionConfig::default()).unwrap();
        assert_eq!(r.z_total, Series::Finite(1.0));
        assert_eq!(r.z_y, Series::Finite(vec![0.0, 0.0]));
        assert_eq!(r.spectral_radius, 0.0);
    }

    #[test]
    fn divergent_below_critical() {
        let r = evaluate(&full2(), 0.5, &PartitionConfig::default()).unwrap();
        assert_eq!(r.status, ConvergenceStatus::Divergent);
        assert!(r.z_total.is_divergent());
    }

    #[test]
    fn near_critical_band_is_flagged() {
        // r(β) = 2^{1−β}; choose β just above 1 so that r lies in the band.
        let cfg = PartitionConfig {
            margin: 1e-3,
            ..Default::default()
        };
        let r = evaluate(&full2(), 1.0 + 1e-4, &cfg).unwrap();
        assert_eq!(r.status, ConvergenceStatus::NearCritical);
        assert!(r.z_total.finite().unwrap() > 1000.0);
    }

    #[test]
    fn nonpositive_beta_rejected() {
        assert_eq!(
            evaluate(&full2(), 0.0, &PartitionConfig::default()),
            Err(PartitionError::InvalidBeta(0.0))
        );
    }

    #[test]
    fn z_gamma_examples() {
        let cfg = PartitionConfig::default();
        let m = full2();
        let zero = RootMeasure::new(vec![0.0]);
        assert_eq!(z_gamma(&m, 2.0, &zero, &cfg).unwrap(), Series::Finite(0.0));
        let unit = RootMeasure::new(vec![1.0]);
        let z = z_gamma(&m, 2.0, &unit, &cfg).unwrap().finite().unwrap();
        assert!((z - 2.0).abs() < 1e-14);
        let z = z_gamma(&m, f64::INFINITY, &RootMeasure::new(vec![3.5]), &cfg).unwrap();
        assert_eq!(z, Series::Finite(3.5));
        assert!(z_gamma(&m, 0.5, &unit, &cfg).unwrap().is_divergent());
        assert_eq!(z_gamma(&m, 0.5, &zero, &cfg).unwrap(), Series::Finite(0.0));
    }

    #[test]
    fn geometric_bound_examples() {
        assert_eq!(geometric_bound(&full2(), 2.0), Some(2.0));
        assert_eq!(geometric_bound(&full2(), 1.0), None);
        let m4 = model(&[&[1, 1, 1, 1], &[1, 1, 1, 1], &[1, 1, 1, 1], &[1, 1, 1, 1]], &[4.0; 4]);
        assert!((geometric_bound(&m4, 2.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn every_z_y_is_at_least_the_single_letter() {
        let m = model(&[&[0, 1, 0], &[0, 0, 1], &[1, 1, 0]], &[1.5, 2.0, 3.0]);
        let r = evaluate(&m, 3.0, &PartitionConfig::default()).unwrap();
        let z_y = r.z_y.finite().unwrap();
        for (y, z) in z_y.iter().enumerate() {
            assert!(*z >= m.weight(y, 3.0));
        }
    }

    #[test]
    fn resolvent_keeps_blocks_upstream_of_divergence() {
        let m = model(&[&[1, 1, 0], &[0, 1, 1], &[0, 1, 1]], &[2.0, 2.0, 2.0]);
        let cfg = PartitionConfig::default();
        assert!(evaluate(&m, 1.0, &cfg).unwrap().z_total.is_divergent());
        let res = resolvent(&m, 1.0, &cfg).unwrap();
        assert_eq!(res.convergent, vec![true, false, false]);
        assert!((res.z_xy[0][0] - 1.0).abs() < 1e-14);
        let d = m.column_space().d();
        let at = |bits: &str| {
            m.column_space()
                .index_of(&crate::model::Column::parse_bit_string(bits).unwrap())
                .unwrap()
        };
        let g = RootMeasure::point_mass(d, at("100"));
        assert_eq!(res.z_gamma(&m, &g), Series::Finite(2.0));
        let g = RootMeasure::point_mass(d, at("011"));
        assert!(res.z_gamma(&m, &g).is_divergent());
    }
}
