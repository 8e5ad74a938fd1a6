//! KMS equilibrium states of Toeplitz–Cuntz–Krieger systems `(T_A, σ)` and
//! their Cuntz–Krieger quotients `O_A`, computed from finite data.
//!
//! A model is a 0-1 transition matrix `A` together with energies `N(x) > 1`.
//! From it the crate computes Dirichlet partition functions, the critical
//! inverse temperature, the simplex of KMS states in every temperature
//! regime and the invariant states that factor through `O_A`. The
//! [`words`] module enumerates admissible words directly and serves as an
//! oracle for every closed form.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod critical;
pub mod graph;
pub mod invariance;
pub mod linalg;
pub mod model;
pub mod partition;
pub mod star;
pub mod states;
pub mod words;

pub use model::{ModelError, ModelSpec, SystemModel};

/// (De)serialize an inverse temperature, writing `β = ∞` as the string `"inf"`.
pub mod beta_serde {
    use serde::de::{self, Visitor};
    use serde::{Deserializer, Serializer};
    use std::fmt;

    pub fn serialize<S: Serializer>(beta: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *beta == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*beta)
        }
    }

    struct BetaVisitor;

    impl Visitor<'_> for BetaVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("a number or \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<f64, E> {
            match v.to_ascii_lowercase().as_str() {
                "inf" | "infinity" | "+inf" => Ok(f64::INFINITY),
                _ => v
                    .parse()
                    .map_err(|_| E::custom(format!("invalid inverse temperature {v:?}"))),
            }
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        d.deserialize_any(BetaVisitor)
    }

    /// Parse a command-line style value: a float or `inf`.
    pub fn parse(s: &str) -> Result<f64, String> {
        BetaVisitor.visit_str::<de::value::Error>(s).map_err(|e| e.to_string())
    }
}
