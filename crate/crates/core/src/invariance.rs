//! Subinvariance and invariance of states on `𝒬`, and the bijection between
//! invariant states and normalized nonnegative fixed points of `AN^{-β}`.
//!
//! With finitely many generators every set `V(X, Y)` is a finite union of
//! atoms, so the inequalities
//! `Σ_z A(X, Y, z) N(z)^{-β} ρ(q_z) ≤ ρ(q(X, Y))` reduce to one inequality
//! per column point:
//! `Σ_{z: c_z = c} N(z)^{-β} ρ(q_z) ≤ ρ({c})`.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::kahan_sum;
use crate::model::SystemModel;
use crate::partition::transfer_matrix;
use crate::states::{defects, q_from_atoms, QState, TypeTag, DEFECT_TOL};

/// Largest model checked pair by pair.
pub const EXHAUSTIVE_MAX: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InvarianceError {
    #[error("exhaustive check supports at most {EXHAUSTIVE_MAX} generators, got {0}")]
    TooLargeForExhaustive(usize),
    #[error("state does not fit the model: {0}")]
    InvalidState(String),
    #[error("vector has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("negative entry {value} at generator {index}")]
    NegativeEntry { index: usize, value: f64 },
    #[error("Σ N(x)^(-β) v_x = {0}, expected 1")]
    NotNormalized(f64),
    #[error("vector is not fixed by the transfer matrix (relative residual {0})")]
    NotFixedPoint(f64),
    #[error("state is not invariant (largest atom gap {0})")]
    NotInvariant(f64),
}

/// One inequality `lhs ≤ rhs` for a pair `(X, Y)`, reported as `gap = rhs − lhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceVerdict {
    pub subinvariant: bool,
    pub invariant: bool,
    /// Pair with the most negative gap, present when a gap is below `−tol`.
    pub worst_violation: Option<Violation>,
    /// `ρ({c}) − Σ_{z: c_z = c} N(z)^{-β} ρ(q_z)` per column point.
    pub atom_gaps: Vec<f64>,
    pub tolerance: f64,
    /// Number of disjoint pairs `(X, Y)` checked in exhaustive mode.
    pub pairs_checked: Option<u64>,
}

/// Check that a state's arrays match the model and that `ρ(q_x)` follows
/// from the atoms.
pub fn validate_state(model: &SystemModel, state: &QState) -> Result<(), InvarianceError> {
    let d = model.column_space().d();
    if state.atom_masses.len() != d {
        return Err(InvarianceError::InvalidState(format!(
            "{} atom masses for {d} column points",
            state.atom_masses.len()
        )));
    }
    if state.q_values.len() != model.size() {
        return Err(InvarianceError::InvalidState(format!(
            "{} generator values for {} generators",
            state.q_values.len(),
            model.size()
        )));
    }
    if let Some(c) = state.atom_masses.iter().position(|&a| !(a >= -DEFECT_TOL)) {
        return Err(InvarianceError::InvalidState(format!(
            "negative atom mass at point {c}"
        )));
    }
    let expected = q_from_atoms(model, &state.atom_masses);
    if let Some(x) = expected
        .iter()
        .zip(&state.q_values)
        .position(|(a, b)| (a - b).abs() > 1e-9)
    {
        return Err(InvarianceError::InvalidState(format!(
            "ρ(q_{x}) = {} disagrees with the atoms ({})",
            state.q_values[x], expected[x]
        )));
    }
    Ok(())
}

fn atom_pair(model: &SystemModel, c: usize) -> (Vec<usize>, Vec<usize>) {
    let col = &model.column_space().points[c];
    (0..model.size()).partition(|&x| col.contains(x))
}

/// Decide β-subinvariance (and invariance) of `state`.
///
/// The atom check is always run. Exhaustive mode also evaluates both sides
/// of the inequality for every disjoint pair `(X, Y)` directly from the
/// generator values; overlapping pairs have `V(X, Y) = ∅` and read `0 ≤ 0`.
pub fn is_subinvariant(
    model: &SystemModel,
    beta: f64,
    state: &QState,
    exhaustive: bool,
) -> Result<InvarianceVerdict, InvarianceError> {
    let m = model.size();
    if exhaustive && m > EXHAUSTIVE_MAX {
        return Err(InvarianceError::TooLargeForExhaustive(m));
    }
    validate_state(model, state)?;
    let tol = DEFECT_TOL;
    let gaps = defects(model, beta, state);
    let mut worst: Option<Violation> = None;
    for (c, &g) in gaps.iter().enumerate() {
        if g < -tol && worst.as_ref().is_none_or(|w| g < w.gap) {
            let (x, y) = atom_pair(model, c);
            worst = Some(Violation { x, y, gap: g });
        }
    }
    let mut subinvariant = worst.is_none();
    let mut invariant = gaps.iter().all(|g| g.abs() <= tol);
    if beta == f64::INFINITY {
        subinvariant = true;
        invariant = false;
        worst = None;
    }

    let mut pairs_checked = None;
    if exhaustive && beta != f64::INFINITY {
        let (count, ex_worst) = exhaustive_pairs(model, beta, state);
        pairs_checked = Some(count);
        if let Some(v) = ex_worst {
            if v.gap < -tol {
                if subinvariant {
                    log::warn!("exhaustive check found a violation missed by the atom check");
                }
                subinvariant = false;
                invariant = false;
                if worst.as_ref().is_none_or(|w| v.gap < w.gap) {
                    worst = Some(v);
                }
            }
        }
    }
    Ok(InvarianceVerdict {
        subinvariant,
        invariant: invariant && subinvariant,
        worst_violation: worst,
        atom_gaps: gaps,
        tolerance: tol,
        pairs_checked,
    })
}

/// Scan every disjoint `(X, Y)` with bit masks, returning the pair count and
/// the pair of smallest gap.
fn exhaustive_pairs(model: &SystemModel, beta: f64, state: &QState) -> (u64, Option<Violation>) {
    let m = model.size();
    let space = model.column_space();
    let mask_of = |c: usize| -> u64 {
        (0..m)
            .filter(|&x| space.points[c].contains(x))
            .fold(0u64, |acc, x| acc | (1 << x))
    };
    let point_masks: Vec<u64> = (0..space.d()).map(mask_of).collect();
    let gen_masks: Vec<u64> = (0..m).map(|z| point_masks[space.column_of[z]]).collect();
    let w = model.weights(beta);
    let lhs_terms: Vec<f64> = (0..m).map(|z| w[z] * state.q_values[z]).collect();
    let full: u64 = (1u64 << m) - 1;
    let mut count = 0u64;
    let mut best: Option<(u64, u64, f64)> = None;
    for xm in 0..=full {
        let rest = full & !xm;
        let mut ym = rest;
        loop {
            count += 1;
            let inside = |mask: u64| mask & xm == xm && mask & ym == 0;
            let lhs = kahan_sum((0..m).filter(|&z| inside(gen_masks[z])).map(|z| lhs_terms[z]));
            let rhs = kahan_sum(
                point_masks
                    .iter()
                    .zip(&state.atom_masses)
                    .filter(|(&pm, _)| inside(pm))
                    .map(|(_, &a)| a),
            );
            let gap = rhs - lhs;
            if best.is_none_or(|b| gap < b.2) {
                best = Some((xm, ym, gap));
            }
            if ym == 0 {
                break;
            }
            ym = (ym - 1) & rest;
        }
    }
    let bits = |mask: u64| (0..m).filter(|&x| mask >> x & 1 == 1).collect::<Vec<_>>();
    let worst = best.map(|(xm, ym, gap)| Violation {
        x: bits(xm),
        y: bits(ym),
        gap,
    });
    (count, worst)
}

/// Residual `‖Mv − v‖_∞ / max(1, ‖v‖_∞)`.
pub fn fixed_point_residual(model: &SystemModel, beta: f64, v: &[f64]) -> f64 {
    let mv = transfer_matrix(model, beta).apply(v);
    let scale = v.iter().fold(1.0f64, |a, b| a.max(b.abs()));
    mv.iter().zip(v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale
}

/// The invariant state with `ρ({c}) = Σ_{z: c_z = c} N(z)^{-β} v_z`; its
/// generator values are `v` itself.
pub fn invariant_state_from_fixed_point(model: &SystemModel, beta: f64, v: &[f64]) -> Result<QState, InvarianceError> {
    let m = model.size();
    if v.len() != m {
        return Err(InvarianceError::DimensionMismatch {
            expected: m,
            found: v.len(),
        });
    }
    if let Some(index) = v.iter().position(|&x| !(x >= -1e-12)) {
        return Err(InvarianceError::NegativeEntry { index, value: v[index] });
    }
    let w = model.weights(beta);
    let norm = kahan_sum(w.iter().zip(v).map(|(a, b)| a * b));
    if !((norm - 1.0).abs() <= 1e-9) {
        return Err(InvarianceError::NotNormalized(norm));
    }
    let res = fixed_point_residual(model, beta, v);
    if res > 1e-9 {
        return Err(InvarianceError::NotFixedPoint(res));
    }
    let space = model.column_space();
    let atoms = (0..space.d())
        .map(|c| kahan_sum(space.generators_at(c).map(|z| w[z] * v[z].max(0.0))))
        .collect();
    Ok(QState {
        beta,
        atom_masses: atoms,
        q_values: v.iter().map(|x| x.max(0.0)).collect(),
        type_tag: TypeTag::Infinite,
    })
}

/// Recover the fixed point `(ρ(q_x))_x` of an invariant state.
pub fn fixed_point_from_state(model: &SystemModel, beta: f64, state: &QState) -> Result<Vec<f64>, InvarianceError> {
    let verdict = is_subinvariant(model, beta, state, false)?;
    if !verdict.invariant {
        let worst = verdict
            .atom_gaps
            .iter()
            .copied()
            .fold(0.0f64, |a, g| if g.abs() > a.abs() { g } else { a });
        return Err(InvarianceError::NotInvariant(worst));
    }
    let v = state.q_values.clone();
    let res = fixed_point_residual(model, beta, &v);
    if res > 1e-9 {
        return Err(InvarianceError::NotFixedPoint(res));
    }
    let norm = kahan_sum(model.weights(beta).iter().zip(&v).map(|(a, b)| a * b));
    if (norm - 1.0).abs() > 1e-9 {
        return Err(InvarianceError::NotNormalized(norm));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::PartitionConfig;
    use crate::states::{finite_type_state, ground_state, RootMeasure};

    fn model(rows: &[&[i64]], n: &[f64]) -> SystemModel {
        let rows: Vec<Vec<i64>> = rows.iter().map(|r| r.to_vec()).collect();
        SystemModel::from_01(&rows, n.to_vec()).unwrap()
    }

    fn full2() -> SystemModel {
        model(&[&[1, 1], &[1, 1]], &[2.0, 2.0])
    }

    const PHI: f64 = 1.618_033_988_749_895;

    #[test]
    fn critical_state_is_invariant() {
        let m = full2();
        let s = invariant_state_from_fixed_point(&m, 1.0, &[1.0, 1.0]).unwrap();
        assert_eq!(s.atom_masses, vec![1.0]);
        let v = is_subinvariant(&m, 1.0, &s, true).unwrap();
        assert!(v.subinvariant && v.invariant);
        assert!(v.worst_violation.is_none());
        assert_eq!(v.pairs_checked, Some(9));
        assert_eq!(fixed_point_from_state(&m, 1.0, &s).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn finite_type_gap() {
        let m = full2();
        let s = finite_type_state(&m, 2.0, &RootMeasure::new(vec![1.0]), &PartitionConfig::default()).unwrap();
        let v = is_subinvariant(&m, 2.0, &s, true).unwrap();
        assert!(v.subinvariant && !v.invariant);
        assert!((v.atom_gaps[0] - 0.5).abs() < 1e-14);
        assert!(matches!(
            fixed_point_from_state(&m, 2.0, &s),
            Err(InvarianceError::NotInvariant(_))
        ));
    }

    #[test]
    fn golden_mean_fixed_point() {
        let e = std::f64::consts::E;
        let m = model(&[&[0, 1], &[1, 1]], &[e, e]);
        let s = invariant_state_from_fixed_point(&m, PHI.ln(), &[1.0 / PHI, 1.0]).unwrap();
        assert!((s.atom_masses[0] - PHI.powi(-2)).abs() < 1e-12);
        assert!((s.atom_masses[1] - 1.0 / PHI).abs() < 1e-12);
        assert_eq!(
            invariant_state_from_fixed_point(&m, PHI.ln(), &[0.0, 0.0]),
            Err(InvarianceError::NotNormalized(0.0))
        );
    }

    #[test]
    fn violation_is_located() {
        let m = full2();
        let s = invariant_state_from_fixed_point(&m, 1.0, &[1.0, 1.0]).unwrap();
        let v = is_subinvariant(&m, 0.5, &s, true).unwrap();
        assert!(!v.subinvariant);
        let w = v.worst_violation.unwrap();
        // Single atom: gap 1 − 2·2^{-1/2}.
        assert!((w.gap - (1.0 - 2f64.sqrt())).abs() < 1e-12);
    }

    #[test]
    fn ground_states_are_subinvariant_not_invariant() {
        let m = full2();
        let g = ground_state(&m, &RootMeasure::new(vec![1.0])).unwrap();
        let v = is_subinvariant(&m, f64::INFINITY, &g, true).unwrap();
        assert!(v.subinvariant && !v.invariant);
    }

    #[test]
    fn exhaustive_cap() {
        let rows = vec![vec![1i64; 13]; 13];
        let m = SystemModel::from_01(&rows, vec![2.0; 13]).unwrap();
        let s = ground_state(&m, &RootMeasure::new(vec![1.0])).unwrap();
        assert_eq!(
            is_subinvariant(&m, 1.0, &s, true),
            Err(InvarianceError::TooLargeForExhaustive(13))
        );
    }
}
