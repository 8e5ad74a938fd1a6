//! Closed forms against brute-force word sums and textbook values.

mod common;

use std::f64::consts::E;

use kms_core::critical::{self, CriticalConfig};
use kms_core::partition::{self, PartitionConfig};
use kms_core::states::{self, RootMeasure};
use kms_core::words::{self, Endpoints, WordsConfig};
use kms_core::SystemModel;
use rand::Rng;

use common::*;

fn small_models(seed: u64, count: usize) -> Vec<SystemModel> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let m = rng.random_range(2..=5);
        let a = random_irreducible(&mut rng, m, 0.5);
        let n = (0..m).map(|_| rng.random_range(1.5..=4.0)).collect();
        let model = to_model(&a, n);
        if words_up_to(&model, 14) <= 3_000_000 {
            out.push(model);
        }
    }
    out
}

#[test]
fn z_xy_matches_endpoint_word_sums() {
    let wcfg = WordsConfig::default();
    for model in small_models(11, 8) {
        let bc = critical::beta_c(&model, &CriticalConfig::default()).beta_c;
        let beta = bc + 1.0;
        let rep = partition::evaluate(&model, beta, &PartitionConfig::default()).unwrap();
        let r = rep.spectral_radius;
        let m = model.size();
        for x in 0..m {
            for y in 0..m {
                let ends = Endpoints {
                    source: Some(x),
                    target: Some(y),
                };
                let brute = words::partial_series(&model, beta, 14, ends, &wcfg).unwrap();
                let z = rep.z_xy_at(x, y).unwrap();
                let slack = r.powi(15) * rep.z_total.clone().finite().unwrap() * m as f64;
                assert!(
                    (brute - z).abs() <= slack,
                    "Z_{x}{y}: words {brute} closed {z} slack {slack}"
                );
                assert!(brute <= z + 1e-14);
            }
        }
    }
}

#[test]
fn full_matrix_partition_is_geometric() {
    for n in 2..=4 {
        for beta in [1.5, 2.0, 3.0] {
            let model = full(n, 3.0);
            let q = n as f64 * 3f64.powf(-beta);
            let rep = partition::evaluate(&model, beta, &PartitionConfig::default()).unwrap();
            let closed = 1.0 / (1.0 - q);
            let z = rep.z_total.finite().unwrap();
            assert!((z - closed).abs() < 1e-12 * closed, "n={n} β={beta}: {z} vs {closed}");
        }
    }
}

#[test]
fn golden_mean_critical_temperature() {
    let model = model(&[&[0, 1], &[1, 1]], &[E, E]);
    let bc = critical::beta_c(&model, &CriticalConfig::default()).beta_c;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    assert!((bc - phi.ln()).abs() < 1e-9, "{bc}");
}

#[test]
fn shell_ratio_estimate_tracks_beta_c() {
    for model in small_models(12, 6) {
        let bc = critical::beta_c(&model, &CriticalConfig::default()).beta_c;
        let est = critical::abscissa_estimate(&model, 24, &CriticalConfig::default()).unwrap();
        assert!((est.beta - bc).abs() < 0.1, "estimate {} vs β_c {bc}", est.beta);
    }
}

/// Atom masses of `T_β(γ)` summed directly over stems: each word `μ`
/// (including the empty one) contributes `N(μ)^{-β} γ(Ω_e^{last μ})` to the
/// column of its first letter, the empty word contributing `γ` itself.
#[test]
fn finite_type_state_matches_stem_sums() {
    let pcfg = PartitionConfig::default();
    let wcfg = WordsConfig { cap: 5_000_000 };
    let mut rng = rng(13);
    for model in small_models(14, 6) {
        let m = model.size();
        let space = model.column_space();
        let d = space.d();
        let gamma = RootMeasure::new((0..d).map(|_| rng.random_range(0.0..=1.0)).collect());
        let bc = critical::beta_c(&model, &CriticalConfig::default()).beta_c;
        let beta = bc + 1.0;
        let state = states::finite_type_state(&model, beta, &gamma, &pcfg).unwrap();

        let g = gamma.generator_masses(&model);
        let mut atoms = gamma.weights.clone();
        for n in 1..=14 {
            for w in words::enumerate(&model, n, &wcfg).unwrap() {
                let c = space.index_of(model.column(w.letters[0])).unwrap();
                atoms[c] += w.weight(beta) * g[*w.letters.last().unwrap()];
            }
        }
        let total: f64 = atoms.iter().sum();
        let rep = partition::evaluate(&model, beta, &pcfg).unwrap();
        let slack = rep.spectral_radius.powi(15) * rep.z_total.finite().unwrap() * m as f64;
        for (c, (a, closed)) in atoms.iter().zip(&state.atom_masses).enumerate() {
            let direct = a / total;
            assert!(
                (direct - closed).abs() <= slack,
                "atom {c}: direct {direct} closed {closed}"
            );
        }
    }
}

#[test]
fn reducible_resolvent_matches_words_on_convergent_part() {
    let mut rng = rng(15);
    let wcfg = WordsConfig::default();
    for _ in 0..6 {
        let (model, beta, s) = two_block(&mut rng, &CriticalConfig::default());
        let res = partition::resolvent(&model, beta, &PartitionConfig::default()).unwrap();
        for x in 0..model.size() {
            assert_eq!(res.convergent[x], x < s);
        }
        // Words ending in the small block never leave it.
        let small = model.submodel(&(0..s).collect::<Vec<_>>()).unwrap();
        let r = critical::spectral_radius(&small, beta, &CriticalConfig::default());
        let total: f64 = 1.0 + res.z_xy.iter().flatten().sum::<f64>();
        for x in 0..s {
            for y in 0..s {
                let ends = Endpoints {
                    source: Some(x),
                    target: Some(y),
                };
                let brute = words::partial_series(&small, beta, 30, ends, &wcfg).unwrap();
                let slack = r.powi(31) * total * s as f64 + 1e-15;
                assert!(brute <= res.z_xy[x][y] + 1e-14);
                assert!((brute - res.z_xy[x][y]).abs() <= slack, "{brute} vs {}", res.z_xy[x][y]);
            }
        }
    }
}

#[test]
fn worked_value_z11_at_two() {
    let m = model(&[&[1, 1], &[1, 1]], &[2.0, 2.0]);
    let rep = partition::evaluate(&m, 2.0, &PartitionConfig::default()).unwrap();
    assert!((rep.z_xy_at(0, 0).unwrap() - 0.375).abs() < 1e-12);
    let ends = Endpoints {
        source: Some(0),
        target: Some(0),
    };
    let brute = words::partial_series(&m, 2.0, 20, ends, &WordsConfig::default()).unwrap();
    let tail = 2f64.powi(-22);
    assert!((brute - 0.375).abs() <= tail);
}
