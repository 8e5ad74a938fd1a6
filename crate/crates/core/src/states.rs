//! β-scaling states described by their restriction `ρ` to the diagonal
//! algebra `𝒬`.
//!
//! With finitely many generators `𝒬` is spanned by the atoms `{c}`,
//! `c ∈ Σ_A`, so a state is a probability vector on the column space and
//! `ρ(q_x) = Σ_{c ∋ x} ρ({c})`. Finite-type states are built from a root
//! measure `γ` on `Ω_e ≅ Σ_A`; infinite-type states come from fixed points of
//! the transfer matrix (see [`crate::invariance`]).

use serde::Serialize;
use thiserror::Error;

use crate::invariance::{self, InvarianceError};
use crate::linalg::kahan_sum;
use crate::model::SystemModel;
use crate::partition::{self, transfer_matrix, PartitionConfig, PartitionError, Series};

/// Gaps smaller than this count as violations of subinvariance.
pub const DEFECT_TOL: f64 = 1e-10;
/// Defects of smaller magnitude are treated as exact zeros.
pub const DEFECT_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatesError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Invariance(#[from] Box<InvarianceError>),
    #[error("root measure is zero")]
    ZeroMeasure,
    #[error("root measure has negative weight {value} at point {point}")]
    NegativeWeight { point: usize, value: f64 },
    #[error("the normalizer Z(β, γ) diverges")]
    DivergentNormalizer,
    #[error("the matrix has an identically zero column; Ω_e cannot be identified with Σ_A")]
    ZeroColumn,
    #[error("inverse temperature {0} is not admissible here")]
    InvalidBeta(f64),
    #[error("negative defect {value} at point {point}: the state is not subinvariant")]
    NegativeDefect { point: usize, value: f64 },
    #[error("the state is not subinvariant at β = {0}")]
    NotSubinvariant(f64),
    #[error("cooling needs β′ ≥ β, got β = {beta}, β′ = {beta_prime}")]
    InvalidCooling { beta: f64, beta_prime: f64 },
    #[error("cooled state has finite fraction {0}, expected 1")]
    CoolingNotFinite(f64),
    #[error("Ω_∞ mass {mass} at length {n} exceeds the cooling bound {bound}")]
    CoolingBoundViolated { n: usize, mass: f64, bound: f64 },
}

impl From<InvarianceError> for StatesError {
    fn from(e: InvarianceError) -> Self {
        StatesError::Invariance(Box::new(e))
    }
}

/// A finite measure `γ` on `Ω_e ≅ Σ_A`, one weight per column point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RootMeasure {
    pub weights: Vec<f64>,
}

impl RootMeasure {
    pub fn new(weights: Vec<f64>) -> Self {
        RootMeasure { weights }
    }

    /// Point mass `δ_c` on a space with `d` points.
    pub fn point_mass(d: usize, c: usize) -> Self {
        let mut weights = vec![0.0; d];
        weights[c] = 1.0;
        RootMeasure { weights }
    }

    pub fn total(&self) -> f64 {
        kahan_sum(self.weights.iter().copied())
    }

    pub fn is_zero(&self) -> bool {
        self.weights.iter().all(|&w| w == 0.0)
    }

    pub fn scaled(&self, s: f64) -> Self {
        RootMeasure::new(self.weights.iter().map(|w| w * s).collect())
    }

    /// `γ(Ω_e^x) = Σ_{c ∋ x} γ(c)` for every generator `x`.
    pub fn generator_masses(&self, model: &SystemModel) -> Vec<f64> {
        let space = model.column_space();
        (0..model.size())
            .map(|x| {
                kahan_sum(
                    space
                        .points
                        .iter()
                        .zip(&self.weights)
                        .filter(|(c, _)| c.contains(x))
                        .map(|(_, &w)| w),
                )
            })
            .collect()
    }

    fn validate(&self, model: &SystemModel) -> Result<(), StatesError> {
        let d = model.column_space().d();
        if self.weights.len() != d {
            return Err(PartitionError::MeasureDimension {
                expected: d,
                found: self.weights.len(),
            }
            .into());
        }
        if let Some((point, &value)) = self.weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0)) {
            return Err(StatesError::NegativeWeight { point, value });
        }
        if self.is_zero() {
            return Err(StatesError::ZeroMeasure);
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeTag {
    Finite,
    Infinite,
    Mixed { finite_fraction: f64 },
}

/// The restriction `ρ` of a KMS state to `𝒬`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QState {
    #[serde(with = "crate::beta_serde")]
    pub beta: f64,
    /// `ρ({c})` per column point.
    pub atom_masses: Vec<f64>,
    /// `ρ(q_x)` per generator.
    pub q_values: Vec<f64>,
    pub type_tag: TypeTag,
}

impl QState {
    /// Build a state from atom masses, deriving `ρ(q_x)` by the bit rule
    /// `q_x(c) = [x ∈ c]`.
    pub fn from_atoms(model: &SystemModel, beta: f64, atom_masses: Vec<f64>, type_tag: TypeTag) -> Self {
        let q_values = q_from_atoms(model, &atom_masses);
        QState {
            beta,
            atom_masses,
            q_values,
            type_tag,
        }
    }

    /// `ρ(q(X, Y))`: total atom mass over `V(X, Y)`.
    pub fn q_xy(&self, model: &SystemModel, x_set: &[usize], y_set: &[usize]) -> f64 {
        kahan_sum(
            model
                .column_space()
                .points
                .iter()
                .zip(&self.atom_masses)
                .filter(|(c, _)| c.in_v(x_set, y_set))
                .map(|(_, &m)| m),
        )
    }

    /// Values `ψ(p_x) = N(x)^{-β} ρ(q_x)` of the induced KMS state.
    pub fn p_values(&self, model: &SystemModel) -> Vec<f64> {
        model
            .weights(self.beta)
            .iter()
            .zip(&self.q_values)
            .map(|(w, q)| w * q)
            .collect()
    }

    pub fn total_mass(&self) -> f64 {
        kahan_sum(self.atom_masses.iter().copied())
    }
}

pub(crate) fn q_from_atoms(model: &SystemModel, atoms: &[f64]) -> Vec<f64> {
    let points = &model.column_space().points;
    (0..model.size())
        .map(|x| kahan_sum(points.iter().zip(atoms).filter(|(c, _)| c.contains(x)).map(|(_, &m)| m)))
        .collect()
}

fn require_no_zero_column(model: &SystemModel) -> Result<(), StatesError> {
    if model.column_space().contains_zero {
        Err(StatesError::ZeroColumn)
    } else {
        Ok(())
    }
}

/// The finite-type state `T_β(γ)`.
///
/// Each stem `μ ≠ e` ending in `x` contributes `N(μ)^{-β} γ(Ω_e^x)`, placed
/// at the column of its first letter. Summing over stems by first letter `a`
/// gives `h_a = Σ_x Z_{ax}(β) γ(Ω_e^x)` and
/// `ρ({c}) = (γ(c) + Σ_{a: c_a = c} h_a) / Z(β, γ)`.
pub fn finite_type_state(
    model: &SystemModel,
    beta: f64,
    gamma: &RootMeasure,
    cfg: &PartitionConfig,
) -> Result<QState, StatesError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(StatesError::InvalidBeta(beta));
    }
    require_no_zero_column(model)?;
    gamma.validate(model)?;
    let res = partition::resolvent(model, beta, cfg)?;
    let z = match res.z_gamma(model, gamma) {
        Series::Finite(z) if z > 0.0 => z,
        _ => return Err(StatesError::DivergentNormalizer),
    };
    let z_xy = &res.z_xy;
    let g = gamma.generator_masses(model);
    let m = model.size();
    let h: Vec<f64> = (0..m).map(|a| kahan_sum((0..m).map(|x| z_xy[a][x] * g[x]))).collect();
    let space = model.column_space();
    let atoms: Vec<f64> = (0..space.d())
        .map(|c| (gamma.weights[c] + kahan_sum(space.generators_at(c).map(|a| h[a]))) / z)
        .collect();
    Ok(QState::from_atoms(model, beta, atoms, TypeTag::Finite))
}

/// The ground state `T_∞(γ)`: `γ` normalized on `Ω_e`.
pub fn ground_state(model: &SystemModel, gamma: &RootMeasure) -> Result<QState, StatesError> {
    require_no_zero_column(model)?;
    gamma.validate(model)?;
    let total = gamma.total();
    let atoms = gamma.weights.iter().map(|w| w / total).collect();
    Ok(QState::from_atoms(model, f64::INFINITY, atoms, TypeTag::Finite))
}

/// `s_n = Σ_{|μ| = n} N(μ)^{-β} ρ(q_{last μ}) = wᵀ M^{n−1} q` for
/// `n = 1..=len`, where `w_x = N(x)^{-β}`. The limit is `λ(Ω_∞)`.
pub fn omega_infinity_mass(model: &SystemModel, beta: f64, state: &QState, len: usize) -> Vec<f64> {
    let w = model.weights(beta);
    let tm = transfer_matrix(model, beta);
    let mut u = state.q_values.clone();
    let mut out = Vec::with_capacity(len);
    for n in 1..=len {
        out.push(kahan_sum(w.iter().zip(&u).map(|(a, b)| a * b)));
        if n < len {
            u = tm.apply(&u);
        }
    }
    out
}

/// A state split as `t·T_β(γ_f) + (1 − t)·ρ_∞`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    /// Per-atom defects `ρ({c}) − Σ_{z: c_z = c} N(z)^{-β} ρ(q_z)`.
    pub gamma_finite: RootMeasure,
    pub finite_fraction: f64,
    pub finite_part: Option<QState>,
    pub infinite_part: Option<QState>,
    /// `‖t·finite + (1 − t)·infinite − state‖_∞` on atom masses.
    pub reconstruction_residual: f64,
    /// `‖Mv − v‖_∞` for the infinite part's generator values.
    pub fixed_point_residual: Option<f64>,
    /// `|Σ_x N(x)^{-β} v_x − 1|` for the infinite part.
    pub normalization_residual: Option<f64>,
}

impl Decomposition {
    pub fn type_tag(&self) -> TypeTag {
        if self.infinite_part.is_none() {
            TypeTag::Finite
        } else if self.finite_part.is_none() {
            TypeTag::Infinite
        } else {
            TypeTag::Mixed {
                finite_fraction: self.finite_fraction,
            }
        }
    }
}

/// Atom defects of a state; negative entries above the tolerance mean the
/// state is not subinvariant.
pub fn defects(model: &SystemModel, beta: f64, state: &QState) -> Vec<f64> {
    let w = model.weights(beta);
    let space = model.column_space();
    (0..space.d())
        .map(|c| state.atom_masses[c] - kahan_sum(space.generators_at(c).map(|z| w[z] * state.q_values[z])))
        .collect()
}

/// Split a subinvariant state into its finite- and infinite-type parts.
pub fn decompose(
    model: &SystemModel,
    beta: f64,
    state: &QState,
    cfg: &PartitionConfig,
) -> Result<Decomposition, StatesError> {
    invariance::validate_state(model, state)?;
    let mut d = defects(model, beta, state);
    for (point, v) in d.iter_mut().enumerate() {
        if *v < -DEFECT_TOL {
            return Err(StatesError::NegativeDefect { point, value: *v });
        }
        if v.abs() < DEFECT_CLAMP || *v < 0.0 {
            *v = 0.0;
        }
    }
    let gamma = RootMeasure::new(d);
    let w = model.weights(beta);
    let tm = transfer_matrix(model, beta);

    let infinite_from = |atoms: Vec<f64>| -> (QState, f64, f64) {
        let total = kahan_sum(atoms.iter().copied());
        let atoms: Vec<f64> = atoms.iter().map(|a| a / total).collect();
        let inf = QState::from_atoms(model, beta, atoms, TypeTag::Infinite);
        let mv = tm.apply(&inf.q_values);
        let fp = mv
            .iter()
            .zip(&inf.q_values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let norm = (kahan_sum(w.iter().zip(&inf.q_values).map(|(a, b)| a * b)) - 1.0).abs();
        (inf, fp, norm)
    };

    if gamma.is_zero() {
        let (inf, fp, norm) = infinite_from(state.atom_masses.clone());
        let residual = max_diff(&inf.atom_masses, &state.atom_masses);
        return Ok(Decomposition {
            gamma_finite: gamma,
            finite_fraction: 0.0,
            finite_part: None,
            infinite_part: Some(inf),
            reconstruction_residual: residual,
            fixed_point_residual: Some(fp),
            normalization_residual: Some(norm),
        });
    }

    let (t, finite) = if beta == f64::INFINITY {
        (gamma.total(), ground_state(model, &gamma)?)
    } else {
        let t = match partition::resolvent(model, beta, cfg)?.z_gamma(model, &gamma) {
            Series::Finite(t) => t,
            Series::Divergent => return Err(StatesError::DivergentNormalizer),
        };
        (t, finite_type_state(model, beta, &gamma, cfg)?)
    };

    if 1.0 - t <= 1e-10 {
        let residual = max_diff(&finite.atom_masses, &state.atom_masses);
        return Ok(Decomposition {
            gamma_finite: gamma,
            finite_fraction: t.min(1.0),
            finite_part: Some(finite),
            infinite_part: None,
            reconstruction_residual: residual,
            fixed_point_residual: None,
            normalization_residual: None,
        });
    }

    let rest: Vec<f64> = state
        .atom_masses
        .iter()
        .zip(&finite.atom_masses)
        .map(|(a, f)| ((a - t * f) / (1.0 - t)).max(0.0))
        .collect();
    let (inf, fp, norm) = infinite_from(rest);
    let rebuilt: Vec<f64> = finite
        .atom_masses
        .iter()
        .zip(&inf.atom_masses)
        .map(|(f, i)| t * f + (1.0 - t) * i)
        .collect();
    let residual = max_diff(&rebuilt, &state.atom_masses);
    Ok(Decomposition {
        gamma_finite: gamma,
        finite_fraction: t,
        finite_part: Some(finite),
        infinite_part: Some(inf),
        reconstruction_residual: residual,
        fixed_point_residual: Some(fp),
        normalization_residual: Some(norm),
    })
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Number of shells checked against the cooling bound.
pub const COOLING_SHELLS: usize = 20;

/// Reinterpret a β-subinvariant `ρ` as a β′-scaling state.
///
/// The result has the same restriction to `𝒬` and is of finite type; its
/// shells obey `s_n ≤ R^{-nδ}` with `R = min N(x)` and `δ = β′ − β`.
pub fn cooling(
    model: &SystemModel,
    beta: f64,
    state: &QState,
    beta_prime: f64,
    cfg: &PartitionConfig,
) -> Result<QState, StatesError> {
    if !(beta_prime >= beta) || !beta_prime.is_finite() {
        return Err(StatesError::InvalidCooling { beta, beta_prime });
    }
    let verdict = invariance::is_subinvariant(model, beta, state, false)?;
    if !verdict.subinvariant {
        return Err(StatesError::NotSubinvariant(beta));
    }
    if beta_prime == beta {
        log::warn!("cooling with δ = 0 returns the state unchanged");
        return Ok(state.clone());
    }
    let dec = decompose(model, beta_prime, state, cfg)?;
    if (dec.finite_fraction - 1.0).abs() > 1e-6 {
        return Err(StatesError::CoolingNotFinite(dec.finite_fraction));
    }
    let cooled = QState {
        beta: beta_prime,
        atom_masses: state.atom_masses.clone(),
        q_values: state.q_values.clone(),
        type_tag: TypeTag::Finite,
    };
    let r = model.energies().iter().copied().fold(f64::INFINITY, f64::min);
    let delta = beta_prime - beta;
    for (i, &mass) in omega_infinity_mass(model, beta_prime, &cooled, COOLING_SHELLS)
        .iter()
        .enumerate()
    {
        let n = i + 1;
        let bound = (-(n as f64) * delta * r.ln()).exp();
        if mass > bound * (1.0 + 1e-9) + 1e-12 {
            return Err(StatesError::CoolingBoundViolated { n, mass, bound });
        }
    }
    Ok(cooled)
}
