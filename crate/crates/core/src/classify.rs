//! Phase diagram of KMS states on `T_A` and the KMS simplices of `O_A`.
//!
//! For irreducible `A` the diagram is a trichotomy around `β_c`: no states
//! below, a unique (infinite-type) state at `β_c`, and a simplex of
//! finite-type states of dimension `d(A) − 1` above, whose extreme points
//! are the states `T_β(δ_c)`. States on `O_A` correspond to normalized
//! nonnegative fixed points of `AN^{-β}` and need no irreducibility.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use thiserror::Error;

use crate::critical::{self, CriticalConfig};
use crate::graph;
use crate::invariance::{self, fixed_point_residual, InvarianceError};
use crate::linalg::{self, kahan_sum};
use crate::model::SystemModel;
use crate::partition::{transfer_matrix, PartitionConfig};
use crate::states::{self, QState, RootMeasure, StatesError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("the transition matrix is not irreducible")]
    NotIrreducible,
    #[error("the matrix has an identically zero column")]
    ZeroColumn,
    #[error("inverse temperature {0} is not admissible here")]
    InvalidBeta(f64),
    #[error("eigenvalue 1 has a {0}-dimensional eigenspace; at most {max} is supported", max = MAX_NULL_DIM)]
    NullSpaceTooLarge(usize),
    #[error(transparent)]
    States(#[from] StatesError),
    #[error(transparent)]
    Invariance(#[from] InvarianceError),
}

/// Largest eigenspace handled by vertex enumeration.
pub const MAX_NULL_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassifyConfig {
    pub partition: PartitionConfig,
    /// `|λ − 1|` below this counts as eigenvalue 1.
    pub eigen_tol: f64,
    /// Singular values below `null_rel_tol·‖M‖` span the eigenspace.
    pub null_rel_tol: f64,
    /// Relative residual accepted for a fixed point.
    pub fixed_point_tol: f64,
    /// Grid size for the eigenvalue-1 sweep of [`oa_beta_scan`].
    pub scan_grid: usize,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            partition: PartitionConfig::default(),
            eigen_tol: 1e-8,
            null_rel_tol: 1e-9,
            fixed_point_tol: 1e-8,
            scan_grid: 400,
        }
    }
}

impl ClassifyConfig {
    fn critical(&self) -> &CriticalConfig {
        &self.partition.critical
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "regime", rename_all = "snake_case")]
pub enum PhaseRegime {
    Below {
        beta: f64,
        beta_c: f64,
    },
    Critical {
        beta: f64,
        beta_c: f64,
        unique_state: QState,
    },
    Above {
        beta: f64,
        beta_c: f64,
        extreme_states: Vec<QState>,
        simplex_dim: usize,
        /// `β_c = 0`: no positive temperature is critical.
        permutation_like: bool,
    },
    Ground {
        extreme_states: Vec<QState>,
        simplex_dim: usize,
    },
}

impl PhaseRegime {
    pub fn name(&self) -> &'static str {
        match self {
            PhaseRegime::Below { .. } => "below",
            PhaseRegime::Critical { .. } => "critical",
            PhaseRegime::Above { .. } => "above",
            PhaseRegime::Ground { .. } => "ground",
        }
    }

    pub fn states(&self) -> Vec<&QState> {
        match self {
            PhaseRegime::Below { .. } => vec![],
            PhaseRegime::Critical { unique_state, .. } => vec![unique_state],
            PhaseRegime::Above { extreme_states, .. } | PhaseRegime::Ground { extreme_states, .. } => {
                extreme_states.iter().collect()
            }
        }
    }
}

/// Classify the KMS_β states of `T_A` for irreducible `A`.
///
/// `β` within the bisection width of `β_c` counts as critical.
pub fn classify_ta(model: &SystemModel, beta: f64, cfg: &ClassifyConfig) -> Result<PhaseRegime, ClassifyError> {
    if !(beta > 0.0) {
        return Err(ClassifyError::InvalidBeta(beta));
    }
    if !graph::is_strongly_connected(model.successor_lists()) {
        return Err(ClassifyError::NotIrreducible);
    }
    let space = model.column_space();
    let d = space.d();
    if beta == f64::INFINITY {
        let extreme_states = (0..d)
            .map(|c| states::ground_state(model, &RootMeasure::point_mass(d, c)))
            .collect::<Result<_, _>>()?;
        return Ok(PhaseRegime::Ground {
            extreme_states,
            simplex_dim: d - 1,
        });
    }
    let report = critical::beta_c(model, cfg.critical());
    let bc = report.beta_c;
    if report.permutation_like {
        log::warn!("r(A) ≤ 1: β_c = 0 and every positive β lies above criticality");
    }
    let window = report.bisection_width.max(cfg.critical().bisection_tol);
    if !report.permutation_like && (beta - bc).abs() <= window {
        let v = critical::perron_vector(model, bc, cfg.critical()).map_err(|_| ClassifyError::NotIrreducible)?;
        let unique_state = invariance::invariant_state_from_fixed_point(model, bc, &v)?;
        return Ok(PhaseRegime::Critical {
            beta,
            beta_c: bc,
            unique_state,
        });
    }
    if beta < bc {
        return Ok(PhaseRegime::Below { beta, beta_c: bc });
    }
    let extreme_states = (0..d)
        .map(|c| states::finite_type_state(model, beta, &RootMeasure::point_mass(d, c), &cfg.partition))
        .collect::<Result<_, _>>()?;
    Ok(PhaseRegime::Above {
        beta,
        beta_c: bc,
        extreme_states,
        simplex_dim: d - 1,
        permutation_like: report.permutation_like,
    })
}

/// Extreme points of the normalized nonnegative fixed points of `AN^{-β}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OaSimplex {
    pub beta: f64,
    pub extreme_vectors: Vec<Vec<f64>>,
    /// Relative residual `‖Mv − v‖_∞ / ‖v‖_∞` per extreme vector.
    pub residuals: Vec<f64>,
    /// Dimension of the numerical eigenspace for eigenvalue 1 (0 if absent).
    pub eigenspace_dim: usize,
}

impl OaSimplex {
    pub fn is_empty(&self) -> bool {
        self.extreme_vectors.is_empty()
    }
}

fn require_no_zero_column(model: &SystemModel) -> Result<(), ClassifyError> {
    if model.column_space().contains_zero {
        Err(ClassifyError::ZeroColumn)
    } else {
        Ok(())
    }
}

/// KMS_β states of `O_A` as normalized nonnegative fixed points of `AN^{-β}`.
pub fn kms_oa(model: &SystemModel, beta: f64, cfg: &ClassifyConfig) -> Result<OaSimplex, ClassifyError> {
    require_no_zero_column(model)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(ClassifyError::InvalidBeta(beta));
    }
    let empty = OaSimplex {
        beta,
        extreme_vectors: vec![],
        residuals: vec![],
        eigenspace_dim: 0,
    };
    let m = model.size();
    let dense = transfer_matrix(model, beta).dense();
    let has_one = dense
        .clone()
        .complex_eigenvalues()
        .iter()
        .any(|z| (z - nalgebra::Complex::new(1.0, 0.0)).norm() < cfg.eigen_tol);
    if !has_one {
        return Ok(empty);
    }
    let shifted = &dense - DMatrix::<f64>::identity(m, m);
    let norm = dense.norm().max(1.0);
    let mut basis = linalg::null_space(&shifted, cfg.null_rel_tol * norm);
    if basis.is_empty() {
        basis = linalg::smallest_singular_vectors(&shifted, 1);
    }
    let k = basis.len();
    if k > MAX_NULL_DIM {
        return Err(ClassifyError::NullSpaceTooLarge(k));
    }
    let w = model.weights(beta);
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for v in simplex_vertices(&basis, &w) {
        if !vectors.iter().any(|u| max_diff(u, &v) < 1e-7) {
            vectors.push(v);
        }
    }
    vectors.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut kept = Vec::new();
    let mut residuals = Vec::new();
    for v in vectors {
        let res = fixed_point_residual(model, beta, &v);
        if res <= cfg.fixed_point_tol {
            kept.push(v);
            residuals.push(res);
        } else {
            log::debug!("discarding candidate fixed point with residual {res:e}");
        }
    }
    Ok(OaSimplex {
        beta,
        extreme_vectors: kept,
        residuals,
        eigenspace_dim: k,
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Vertices of `{ Bc : Bc ≥ 0, wᵀBc = 1 }` for a basis `B` of `k` columns.
///
/// Every vertex makes `k − 1` of the inequalities active, so each choice of
/// `k − 1` rows gives a square system together with the normalization.
fn simplex_vertices(basis: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    let k = basis.len();
    let m = w.len();
    let b = DMatrix::from_fn(m, k, |i, j| basis[j][i]);
    let wb: Vec<f64> = (0..k).map(|j| kahan_sum((0..m).map(|i| w[i] * b[(i, j)]))).collect();
    let mut out = Vec::new();
    let mut active = Vec::with_capacity(k.saturating_sub(1));
    let mut visit = |rows: &[usize]| {
        let mut sys = DMatrix::<f64>::zeros(k, k);
        let mut rhs = DVector::<f64>::zeros(k);
        for (r, &i) in rows.iter().enumerate() {
            for j in 0..k {
                sys[(r, j)] = b[(i, j)];
            }
        }
        for j in 0..k {
            sys[(k - 1, j)] = wb[j];
        }
        rhs[k - 1] = 1.0;
        let Some(c) = sys.lu().solve(&rhs) else {
            return;
        };
        let v: Vec<f64> = (0..m).map(|i| (0..k).map(|j| b[(i, j)] * c[j]).sum()).collect();
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !scale.is_finite() || scale == 0.0 {
            return;
        }
        if v.iter().all(|&x| x >= -1e-9 * scale) {
            let mut v: Vec<f64> = v.into_iter().map(|x| x.max(0.0)).collect();
            let s = kahan_sum(w.iter().zip(&v).map(|(a, b)| a * b));
            if s > 0.0 {
                v.iter_mut().for_each(|x| *x /= s);
                out.push(v);
            }
        }
    };
    combinations(m, k - 1, &mut active, 0, &mut visit);
    out
}

fn combinations(n: usize, r: usize, cur: &mut Vec<usize>, start: usize, f: &mut impl FnMut(&[usize])) {
    if cur.len() == r {
        f(cur);
        return;
    }
    for i in start..n {
        cur.push(i);
        combinations(n, r, cur, i + 1, f);
        cur.pop();
    }
}

/// A β found by [`oa_beta_scan`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OaCandidate {
    pub beta: f64,
    /// Strongly connected component whose radius crosses 1 at `beta`.
    pub component: Vec<usize>,
    pub simplex: OaSimplex,
}

/// Sign change of `det(I − M(β))` on the scan grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridCrossing {
    pub beta: f64,
    /// Matches a component root.
    pub explained: bool,
    /// `kms_oa` at the refined root is nonempty.
    pub has_states: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OaScan {
    pub candidates: Vec<OaCandidate>,
    /// Component roots where `kms_oa` found no nonnegative fixed point.
    pub rejected: Vec<f64>,
    pub grid_upper: f64,
    pub grid_points: usize,
    pub grid_crossings: Vec<GridCrossing>,
}

fn det_i_minus_m(model: &SystemModel, beta: f64) -> f64 {
    let m = model.size();
    (DMatrix::<f64>::identity(m, m) - transfer_matrix(model, beta).dense()).determinant()
}

/// Search all β at which `O_A` has KMS states.
///
/// A nonnegative fixed point has eigenvalue 1 equal to the spectral radius
/// of some diagonal block of the Frobenius normal form, so the candidates
/// are the roots of `r_C(β) = 1` over strongly connected components `C`.
/// A sign sweep of `det(I − M(β))` reports any other crossings of
/// eigenvalue 1.
pub fn oa_beta_scan(model: &SystemModel, cfg: &ClassifyConfig) -> Result<OaScan, ClassifyError> {
    require_no_zero_column(model)?;
    let ccfg = cfg.critical();
    let mut roots: Vec<(f64, Vec<usize>)> = Vec::new();
    for comp in graph::strongly_connected_components(model.successor_lists()) {
        let cyclic = comp.len() > 1 || model.entry(comp[0], comp[0]);
        if !cyclic {
            continue;
        }
        let r = |b: f64| critical::component_radius(model, &comp, b, &ccfg.power);
        if r(0.0) <= 1.0 + ccfg.permutation_tol {
            continue;
        }
        let mut hi = 1.0;
        while r(hi) >= 1.0 {
            hi *= 2.0;
        }
        let (lo, hi) = linalg::bisect_decreasing(|b| r(b) - 1.0, 0.0, hi, ccfg.bisection_tol);
        roots.push((0.5 * (lo + hi), comp));
    }
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut candidates: Vec<OaCandidate> = Vec::new();
    let mut rejected = Vec::new();
    for (beta, comp) in roots {
        if candidates.iter().any(|c| (c.beta - beta).abs() < 1e-8)
            || rejected.iter().any(|r: &f64| (r - beta).abs() < 1e-8)
        {
            continue;
        }
        let simplex = kms_oa(model, beta, cfg)?;
        if simplex.is_empty() {
            rejected.push(beta);
        } else {
            candidates.push(OaCandidate {
                beta,
                component: comp,
                simplex,
            });
        }
    }

    let known: Vec<f64> = candidates
        .iter()
        .map(|c| c.beta)
        .chain(rejected.iter().copied())
        .collect();
    let grid_upper = known.iter().fold(1.0f64, |a, &b| a.max(2.0 * b));
    let n = cfg.scan_grid.max(2);
    let mut grid_crossings = Vec::new();
    let mut prev = (grid_upper / n as f64, det_i_minus_m(model, grid_upper / n as f64));
    for i in 2..=n {
        let b = grid_upper * i as f64 / n as f64;
        let d = det_i_minus_m(model, b);
        if d == 0.0 || d.signum() != prev.1.signum() {
            let s0 = prev.1.signum();
            let (lo, hi) = linalg::bisect_decreasing(|x| det_i_minus_m(model, x) * s0, prev.0, b, ccfg.bisection_tol);
            let root = 0.5 * (lo + hi);
            let explained = known.iter().any(|&k| (k - root).abs() < 1e-6);
            let has_states = if explained {
                candidates.iter().any(|c| (c.beta - root).abs() < 1e-6)
            } else {
                let s = kms_oa(model, root, cfg)?;
                if !s.is_empty() {
                    log::warn!("eigenvalue 1 with nonnegative fixed point at β = {root} outside component roots");
                }
                !s.is_empty()
            };
            grid_crossings.push(GridCrossing {
                beta: root,
                explained,
                has_states,
            });
        }
        prev = (b, d);
    }
    Ok(OaScan {
        candidates,
        rejected,
        grid_upper,
        grid_points: n,
        grid_crossings,
    })
}

/// Whether the KMS state with restriction `state` factors through `O_A`:
/// for finite models this is exactly invariance.
pub fn factors_through_oa(model: &SystemModel, beta: f64, state: &QState) -> Result<bool, ClassifyError> {
    Ok(invariance::is_subinvariant(model, beta, state, false)?.invariant)
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

    fn block() -> SystemModel {
        let e = std::f64::consts::E;
        model(
            &[
                &[1, 1, 0, 0, 0],
                &[1, 1, 0, 0, 0],
                &[0, 0, 1, 1, 1],
                &[0, 0, 1, 1, 1],
                &[0, 0, 1, 1, 1],
            ],
            &[e; 5],
        )
    }

    #[test]
    fn classify_examples() {
        let cfg = ClassifyConfig::default();
        let r = classify_ta(&full2(), 2.0, &cfg).unwrap();
        match r {
            PhaseRegime::Above {
                extreme_states,
                simplex_dim,
                ..
            } => {
                assert_eq!(extreme_states.len(), 1);
                assert_eq!(simplex_dim, 0);
            }
            other => panic!("unexpected {other:?}"),
        }
        let e = std::f64::consts::E;
        let gm = model(&[&[0, 1], &[1, 1]], &[e, e]);
        assert_eq!(classify_ta(&gm, 0.3, &cfg).unwrap().name(), "below");
        let full3 = model(&[&[1, 1, 1], &[1, 1, 1], &[1, 1, 1]], &[e; 3]);
        match classify_ta(&full3, 3f64.ln(), &cfg).unwrap() {
            PhaseRegime::Critical { unique_state, .. } => {
                for q in &unique_state.q_values {
                    assert!((q - 1.0).abs() < 1e-8);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
        match classify_ta(&gm, f64::INFINITY, &cfg).unwrap() {
            PhaseRegime::Ground { simplex_dim, .. } => assert_eq!(simplex_dim, 1),
            other => panic!("unexpected {other:?}"),
        }
        let tri = model(&[&[1, 1], &[0, 1]], &[2.0, 2.0]);
        assert_eq!(classify_ta(&tri, 2.0, &cfg), Err(ClassifyError::NotIrreducible));
    }

    #[test]
    fn kms_oa_examples() {
        let cfg = ClassifyConfig::default();
        let s = kms_oa(&full2(), 1.0, &cfg).unwrap();
        assert_eq!(s.extreme_vectors.len(), 1);
        assert!(max_diff(&s.extreme_vectors[0], &[1.0, 1.0]) < 1e-10);
        assert!(kms_oa(&full2(), 2.0, &cfg).unwrap().is_empty());

        let b = block();
        let s = kms_oa(&b, 2f64.ln(), &cfg).unwrap();
        assert_eq!(s.extreme_vectors.len(), 1);
        assert!(s.extreme_vectors[0][2..].iter().all(|&x| x == 0.0));
        let s = kms_oa(&b, 3f64.ln(), &cfg).unwrap();
        assert_eq!(s.extreme_vectors.len(), 1);
        assert!(s.extreme_vectors[0][..2].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn two_dimensional_eigenspace() {
        // Two disjoint copies of full 2×2: both blocks cross at β = 1.
        let m = model(&[&[1, 1, 0, 0], &[1, 1, 0, 0], &[0, 0, 1, 1], &[0, 0, 1, 1]], &[2.0; 4]);
        let s = kms_oa(&m, 1.0, &ClassifyConfig::default()).unwrap();
        assert_eq!(s.eigenspace_dim, 2);
        assert_eq!(s.extreme_vectors.len(), 2);
    }

    #[test]
    fn scan_examples() {
        let cfg = ClassifyConfig::default();
        let s = oa_beta_scan(&block(), &cfg).unwrap();
        let betas: Vec<f64> = s.candidates.iter().map(|c| c.beta).collect();
        assert_eq!(betas.len(), 2);
        assert!((betas[0] - 2f64.ln()).abs() < 1e-8);
        assert!((betas[1] - 3f64.ln()).abs() < 1e-8);
        assert!(s.grid_crossings.iter().all(|c| c.explained));

        let cyc = model(&[&[0, 1], &[1, 0]], &[2.0, 2.0]);
        assert!(oa_beta_scan(&cyc, &cfg).unwrap().candidates.is_empty());

        let e = std::f64::consts::E;
        let gm = model(&[&[0, 1], &[1, 1]], &[e, e]);
        let s = oa_beta_scan(&gm, &cfg).unwrap();
        assert_eq!(s.candidates.len(), 1);
        assert!((s.candidates[0].beta - 1.618_033_988_749_895f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn factoring_examples() {
        let cfg = ClassifyConfig::default();
        let m = full2();
        let crit = invariance::invariant_state_from_fixed_point(&m, 1.0, &[1.0, 1.0]).unwrap();
        assert!(factors_through_oa(&m, 1.0, &crit).unwrap());
        let above = classify_ta(&m, 2.0, &cfg).unwrap();
        assert!(!factors_through_oa(&m, 2.0, above.states()[0]).unwrap());
        let ground = classify_ta(&m, f64::INFINITY, &cfg).unwrap();
        assert!(!factors_through_oa(&m, f64::INFINITY, ground.states()[0]).unwrap());
    }
}
