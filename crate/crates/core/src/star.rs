//! The star matrix: generator 0 with `N(0) = 2`, starred generators
//! `k ≥ 1` with energies `N_k`, and `A(0, k) = A(k, 0) = 1`, all other
//! entries 0.
//!
//! Admissible words alternate between 0 and starred letters, so every
//! partition function is a geometric series in `2^{-β} ζ(β)`, where
//! `ζ(β) = Σ_k N_k^{-β}`. When `ζ` converges at its abscissa `β̄` and
//! `ζ(β̄) < 2^{β̄}`, the critical temperature `β_c = β̄` has a whole segment
//! of finite-type KMS states.
//!
//! Partition values use the displayed convention
//! `D(β) = (1 + 2^{-β}) / (1 − 2^{-β} ζ(β))`, which counts the empty word
//! among the words ending in 0. The sum over nonempty words ending in 0 is
//! `D − 1`.

use serde::Serialize;
use thiserror::Error;

use crate::critical::{self, CriticalConfig};
use crate::linalg::kahan_sum;
use crate::model::{ModelError, SystemModel};
use crate::partition::{self, PartitionConfig, PartitionError, Series};

/// Number of default-family terms summed explicitly.
pub const HEAD_TERMS: usize = 1 << 20;
/// Largest drop tried by the automatic search.
pub const MAX_AUTO_DROP: usize = 64;
/// Truncation levels reported by [`truncation_table`].
pub const TABLE_LEVELS: [usize; 4] = [8, 32, 128, 512];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StarError {
    #[error("retained term {0} has energy below 2")]
    EnergyBelowTwo(usize),
    #[error("condition ζ(β̄) < 2^β̄ fails (ζ ≤ {zeta_hi}, 2^β̄ = {bound}); needed drop: {needed_drop:?}")]
    ConditionDaggerFails {
        needed_drop: Option<usize>,
        zeta_hi: f64,
        bound: f64,
    },
    #[error("β = {beta} lies below the abscissa β̄ = {beta_bar}")]
    BelowAbscissa { beta: f64, beta_bar: f64 },
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("segment parameter {0} is outside [0, 1]")]
    InvalidParameter(f64),
    #[error("truncation level {level} exceeds the {available} stored terms")]
    TruncationTooLarge { level: usize, available: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
}

/// How the energies `N_k` are generated.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StarFamily {
    /// `N_k = k·ln²(k + 1)`, abscissa 1.
    Default,
    /// A finite list with a declared abscissa, taken on trust.
    List { energies: Vec<f64>, abscissa: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Drop {
    Auto,
    Fixed(usize),
}

/// Two-sided bound on a real quantity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Enclosure {
    pub lo: f64,
    pub hi: f64,
}

impl Enclosure {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Tail of the default family past the stored head.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailRule {
    pub rule: String,
    /// Original index of the first term not in the head.
    pub first_index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarSystem {
    pub family: StarFamily,
    pub drop: usize,
    /// `ln N_k` of the retained head, starred generator `j` being original
    /// term `drop + j`.
    #[serde(skip)]
    pub head_ln: Vec<f64>,
    pub head_len: usize,
    pub tail: Option<TailRule>,
    pub n0_energy: f64,
    pub beta_bar: f64,
    /// `false` for user lists, whose abscissa is echoed unverified.
    pub abscissa_verified: bool,
    /// Certified enclosure of `ζ(β̄)`.
    pub zeta_at_beta_bar: Enclosure,
    pub truncation_level: usize,
}

fn default_term(k: usize) -> f64 {
    let k = k as f64;
    k * (k + 1.0).ln().powi(2)
}

/// `I(β, X) = ∫_X^∞ (y ln² y)^{-β} dy` with a bound on its quadrature error.
///
/// With `y = e^u` and `u = ln X / t` the integral becomes
/// `U^{1−2β} ∫_0^1 t^{2β−2} e^{−(β−1)U/t} dt`, `U = ln X`.
fn tail_integral(beta: f64, x: f64) -> (f64, f64) {
    let u = x.ln();
    if beta == 1.0 {
        return (1.0 / u, 0.0);
    }
    let s = beta - 1.0;
    let out = quadrature::integrate(|t: f64| t.powf(2.0 * beta - 2.0) * (-s * u / t).exp(), 0.0, 1.0, 1e-15);
    let scale = u.powf(1.0 - 2.0 * beta);
    (scale * out.integral, scale * out.error_estimate.abs())
}

impl StarSystem {
    /// Number of stored starred generators.
    pub fn stored_terms(&self) -> usize {
        self.head_ln.len()
    }

    /// `N_j` for starred generator `j ≥ 1`.
    pub fn energy(&self, j: usize) -> f64 {
        self.head_ln[j - 1].exp()
    }

    /// `Σ_{j ≤ len} N_j^{-β}` over the first `len` starred generators.
    pub fn head_sum(&self, beta: f64, len: usize) -> f64 {
        kahan_sum(self.head_ln[..len].iter().map(|l| (-beta * l).exp()))
    }

    /// Certified enclosure of `ζ(β)`; the upper end is infinite where the
    /// tail diverges.
    pub fn zeta(&self, beta: f64) -> Enclosure {
        if beta == f64::INFINITY {
            return Enclosure { lo: 0.0, hi: 0.0 };
        }
        let head = self.head_sum(beta, self.head_ln.len());
        // Rounding slack of the Kahan-compensated head.
        let slack = 4.0 * f64::EPSILON * head;
        match &self.tail {
            None => Enclosure {
                lo: head - slack,
                hi: head + slack,
            },
            Some(tail) => {
                if beta < 1.0 {
                    return Enclosure {
                        lo: f64::INFINITY,
                        hi: f64::INFINITY,
                    };
                }
                // N_k ≤ k ln² k and N_k ≥ (k + 1) ln²(k + 1) sandwich the
                // tail between two integrals of a decreasing function.
                let last = (tail.first_index - 1) as f64;
                let (lo, elo) = tail_integral(beta, last + 2.0);
                let (hi, ehi) = tail_integral(beta, last);
                Enclosure {
                    lo: head - slack + lo - elo,
                    hi: head + slack + hi + ehi,
                }
            }
        }
    }

    /// `Σ_{j > len} N_j^{-β}`, upper bound.
    pub fn tail_after(&self, beta: f64, len: usize) -> f64 {
        self.zeta(beta).hi - self.head_sum(beta, len)
    }

    /// The truncated model on generators `0, 1, …, level`.
    pub fn truncation(&self, level: usize) -> Result<SystemModel, StarError> {
        if level > self.head_ln.len() {
            return Err(StarError::TruncationTooLarge {
                level,
                available: self.head_ln.len(),
            });
        }
        let n = level + 1;
        let mut rows = vec![vec![0i64; n]; n];
        rows[0][1..].fill(1);
        for row in rows.iter_mut().skip(1) {
            row[0] = 1;
        }
        let mut energies = vec![self.n0_energy];
        energies.extend((1..n).map(|j| self.energy(j)));
        let labels = (0..n).map(|j| j.to_string()).collect();
        Ok(SystemModel::from_01(&rows, energies)?.with_labels(labels)?)
    }
}

fn head_terms(family: &StarFamily, drop: usize) -> Vec<f64> {
    match family {
        StarFamily::Default => (drop + 1..=drop + HEAD_TERMS).map(|k| default_term(k).ln()).collect(),
        StarFamily::List { energies, .. } => energies.iter().skip(drop).map(|n| n.ln()).collect(),
    }
}

fn assemble(family: &StarFamily, drop: usize) -> Result<StarSystem, StarError> {
    let head_ln = head_terms(family, drop);
    if head_ln.is_empty() {
        return Err(StarError::InvalidFamily("no terms retained".into()));
    }
    // The default family is increasing, so its first retained term decides.
    if let Some(j) = head_ln.iter().position(|&l| !(l >= 2f64.ln())) {
        return Err(StarError::EnergyBelowTwo(drop + j + 1));
    }
    let (beta_bar, tail, verified) = match family {
        StarFamily::Default => (
            1.0,
            Some(TailRule {
                rule: "k ln^2(k+1)".into(),
                first_index: drop + HEAD_TERMS + 1,
            }),
            true,
        ),
        StarFamily::List { abscissa, .. } => (*abscissa, None, false),
    };
    let mut sys = StarSystem {
        family: family.clone(),
        drop,
        head_len: head_ln.len(),
        head_ln,
        tail,
        n0_energy: 2.0,
        beta_bar,
        abscissa_verified: verified,
        zeta_at_beta_bar: Enclosure { lo: 0.0, hi: 0.0 },
        truncation_level: 512,
    };
    sys.zeta_at_beta_bar = sys.zeta(beta_bar);
    sys.truncation_level = sys.truncation_level.min(sys.stored_terms());
    Ok(sys)
}

fn dagger_holds(sys: &StarSystem) -> bool {
    sys.zeta_at_beta_bar.hi < sys.beta_bar.exp2()
}

/// Build and certify a star system.
///
/// `Drop::Auto` picks the smallest number of leading terms to discard so
/// that every retained energy is at least 2 and `ζ(β̄) < 2^{β̄}` holds.
pub fn build_star(family: &StarFamily, drop: Drop) -> Result<StarSystem, StarError> {
    if let StarFamily::List { energies, abscissa } = family {
        if energies.is_empty() || energies.iter().any(|n| !n.is_finite()) || !abscissa.is_finite() || *abscissa < 0.0 {
            return Err(StarError::InvalidFamily(
                "need a nonempty list of finite energies and a finite abscissa ≥ 0".into(),
            ));
        }
        log::warn!("abscissa {abscissa} of a user list is taken on trust");
    }
    let search = |from: usize| -> Option<usize> {
        let limit = match family {
            StarFamily::Default => MAX_AUTO_DROP,
            StarFamily::List { energies, .. } => energies.len().saturating_sub(1).min(MAX_AUTO_DROP),
        };
        (from..=limit).find(|&d| matches!(assemble(family, d), Ok(s) if dagger_holds(&s)))
    };
    match drop {
        Drop::Auto => match search(0) {
            Some(d) => assemble(family, d),
            None => {
                let sys = assemble(family, 0)?;
                Err(StarError::ConditionDaggerFails {
                    needed_drop: None,
                    zeta_hi: sys.zeta_at_beta_bar.hi,
                    bound: sys.beta_bar.exp2(),
                })
            }
        },
        Drop::Fixed(d) => {
            let sys = assemble(family, d)?;
            if dagger_holds(&sys) {
                Ok(sys)
            } else {
                Err(StarError::ConditionDaggerFails {
                    needed_drop: search(d + 1),
                    zeta_hi: sys.zeta_at_beta_bar.hi,
                    bound: sys.beta_bar.exp2(),
                })
            }
        }
    }
}

fn check_beta(sys: &StarSystem, beta: f64) -> Result<(), StarError> {
    if beta >= sys.beta_bar {
        Ok(())
    } else {
        Err(StarError::BelowAbscissa {
            beta,
            beta_bar: sys.beta_bar,
        })
    }
}

/// `D = (1 + 2^{-β}) / (1 − 2^{-β} ζ)` given `ζ`, or divergent.
fn displayed_z0(beta: f64, zeta: f64) -> Series<f64> {
    if beta == f64::INFINITY {
        return Series::Finite(1.0);
    }
    let a = (-beta).exp2();
    let q = a * zeta;
    if q < 1.0 {
        Series::Finite((1.0 + a) / (1.0 - q))
    } else {
        Series::Divergent
    }
}

/// The displayed `Z_0(β) = (1 + 2^{-β}) Σ_n (2^{-β} ζ(β))^n`.
pub fn star_z0(sys: &StarSystem, beta: f64) -> Result<Series<f64>, StarError> {
    check_beta(sys, beta)?;
    Ok(displayed_z0(beta, sys.zeta(beta).mid()))
}

/// Enclosure of the displayed `Z_0(β)` induced by the `ζ` enclosure.
pub fn star_z0_enclosure(sys: &StarSystem, beta: f64) -> Result<Series<Enclosure>, StarError> {
    check_beta(sys, beta)?;
    let z = sys.zeta(beta);
    Ok(match (displayed_z0(beta, z.lo), displayed_z0(beta, z.hi)) {
        (Series::Finite(lo), Series::Finite(hi)) => Series::Finite(Enclosure { lo, hi }),
        _ => Series::Divergent,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarPartition {
    #[serde(with = "crate::beta_serde")]
    pub beta: f64,
    pub zeta: f64,
    /// Displayed `Z_0`, counting the empty word.
    pub z0_displayed: Series<f64>,
    /// Sum over nonempty words ending in 0, i.e. `Z_0` displayed minus 1.
    pub z0_words: Series<f64>,
    /// `Z_k = N_k^{-β}·factor` for every starred `k`; the factor equals the
    /// displayed `Z_0`.
    pub z_k_factor: Series<f64>,
    pub z_total: Series<f64>,
    pub convention: &'static str,
}

pub const Z0_CONVENTION: &str =
    "z0_displayed includes the empty word; z0_words = z0_displayed - 1 sums nonempty words ending in 0";

/// Closed-form partition functions of the star system.
pub fn star_partition(sys: &StarSystem, beta: f64) -> Result<StarPartition, StarError> {
    check_beta(sys, beta)?;
    let zeta = sys.zeta(beta).mid();
    let d = displayed_z0(beta, zeta);
    let words = match d {
        Series::Finite(d) => Series::Finite(d - 1.0),
        Series::Divergent => Series::Divergent,
    };
    let total = match d {
        Series::Finite(d) => Series::Finite(d * (1.0 + zeta)),
        Series::Divergent => Series::Divergent,
    };
    Ok(StarPartition {
        beta,
        zeta,
        z0_displayed: d.clone(),
        z0_words: words,
        z_k_factor: d,
        z_total: total,
        convention: Z0_CONVENTION,
    })
}

/// A point of the segment of critical KMS states.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StarCriticalState {
    pub t: f64,
    pub beta: f64,
    /// `γ_t({c_A})`, `c_A` the column of generator 0.
    pub gamma_a: f64,
    /// `γ_t({c_B})`, `c_B` the common column of the starred generators.
    pub gamma_b: f64,
    /// `ρ(q_0) = ρ({c_B})`.
    pub q0: f64,
    /// `ρ(q_k) = ρ({c_A})`, the same for every starred `k`.
    pub qk: f64,
    /// `Z(β̄, γ_t)`.
    pub z_gamma: f64,
    /// `ρ({c_A}) + ρ({c_B})`.
    pub total_mass: f64,
}

/// The critical state `T_{β̄}(γ_t)` for
/// `γ_t = t·δ_{c_A}/Z(β̄, δ_{c_A}) + (1 − t)·δ_{c_B}/Z(β̄, δ_{c_B})`.
pub fn star_kms_at_critical(sys: &StarSystem, t: f64) -> Result<StarCriticalState, StarError> {
    if !(0.0..=1.0).contains(&t) {
        return Err(StarError::InvalidParameter(t));
    }
    let beta = sys.beta_bar;
    let z = sys.zeta(beta).mid();
    let a = (-beta).exp2();
    let Series::Finite(d) = displayed_z0(beta, z) else {
        return Err(StarError::ConditionDaggerFails {
            needed_drop: None,
            zeta_hi: sys.zeta_at_beta_bar.hi,
            bound: beta.exp2(),
        });
    };
    let z_a = 1.0 + d * z;
    let z_b = d;
    let alpha = t / z_a;
    let b = (1.0 - t) / z_b;
    let denom = 1.0 - a * z;
    let qk = alpha + (b * a + alpha * a * z) / denom;
    let q0 = b + (alpha * z + b * z * a) / denom;
    let z_gamma = alpha * z_a + b * z_b;
    Ok(StarCriticalState {
        t,
        beta,
        gamma_a: alpha,
        gamma_b: b,
        q0,
        qk,
        z_gamma,
        total_mass: q0 + qk,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruncationRow {
    pub level: usize,
    pub beta_c: f64,
    /// `1 + Z_0` of the truncated matrix (displayed convention).
    pub z0_truncated: Series<f64>,
    pub z0_closed: Series<f64>,
    /// `Σ_{k > K} N_k^{-β}`.
    pub tail: f64,
    /// `(1 + Z_0)·tail` with the displayed `Z_0`.
    pub tail_bound: Option<f64>,
    pub within_bound: Option<bool>,
    pub distinct_columns: usize,
}

/// Compare closed forms at `β` with truncations at each level.
pub fn truncation_table(
    sys: &StarSystem,
    beta: f64,
    levels: &[usize],
    cfg: &PartitionConfig,
) -> Result<Vec<TruncationRow>, StarError> {
    let closed = star_z0(sys, beta)?;
    let ccfg: CriticalConfig = cfg.critical;
    levels
        .iter()
        .map(|&level| {
            let model = sys.truncation(level)?;
            let beta_c = critical::beta_c(&model, &ccfg).beta_c;
            let report = partition::evaluate(&model, beta, cfg)?;
            let z0_truncated = match &report.z_y {
                Series::Finite(z) => Series::Finite(1.0 + z[0]),
                Series::Divergent => Series::Divergent,
            };
            let tail = if beta == f64::INFINITY {
                0.0
            } else {
                sys.tail_after(beta, level).max(0.0)
            };
            let tail_bound = closed.clone().finite().map(|d| (1.0 + d) * tail);
            let within_bound = match (&closed, &z0_truncated, tail_bound) {
                (Series::Finite(c), Series::Finite(t), Some(b)) => Some((c - t).abs() <= b),
                _ => None,
            };
            Ok(TruncationRow {
                level,
                beta_c,
                z0_truncated,
                z0_closed: closed.clone(),
                tail,
                tail_bound,
                within_bound,
                distinct_columns: model.column_space().d(),
            })
        })
        .collect()
}
