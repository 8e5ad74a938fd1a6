use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use kms_core::classify::{self, ClassifyConfig};
use kms_core::critical::{self, CriticalConfig};
use kms_core::invariance;
use kms_core::linalg::PowerSettings;
use kms_core::model::{self, ModelSpec, SystemModel};
use kms_core::partition::{self, PartitionConfig, Series};
use kms_core::star::{self, StarFamily};
use kms_core::states::{self, QState, TypeTag};
use kms_core::words::{self, Endpoints, WordsConfig};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::args::{Command, FamilyArg, Format, ModelSource, Tolerances};
use crate::error::CliError;
use crate::output::{float, to_csv, to_json};

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::validation(format!("cannot read {}: {e}", path.display())))
}

pub fn load_model(source: &ModelSource) -> Result<SystemModel, CliError> {
    let (text, origin) = match (&source.model, &source.inline) {
        (Some(p), _) => (read(p)?, p.display().to_string()),
        (None, Some(s)) => (s.clone(), "inline model".to_string()),
        (None, None) => return Err(CliError::validation("one of --model or --inline is required")),
    };
    let spec: ModelSpec = serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{origin}: {e}")))?;
    spec.into_model().map_err(|e| CliError::from(e).context(&origin))
}

fn config(tol: &Tolerances) -> ClassifyConfig {
    let power = PowerSettings {
        tolerance: tol.power_tol,
        max_iterations: tol.power_iterations,
        ..PowerSettings::default()
    };
    ClassifyConfig {
        partition: PartitionConfig {
            margin: tol.margin,
            critical: CriticalConfig {
                power,
                bisection_tol: tol.bisection_tol,
                ..CriticalConfig::default()
            },
        },
        ..ClassifyConfig::default()
    }
}

fn check_tolerances(tol: &Tolerances) -> Result<(), CliError> {
    let positive = [
        ("--margin", tol.margin),
        ("--bisection-tol", tol.bisection_tol),
        ("--power-tol", tol.power_tol),
    ];
    for (name, v) in positive {
        if !(v > 0.0 && v.is_finite()) {
            return Err(CliError::validation(format!("{name} must be positive, got {v}")));
        }
    }
    if tol.power_iterations == 0 {
        return Err(CliError::validation("--power-iterations must be positive"));
    }
    Ok(())
}

fn model_summary(model: &SystemModel) -> Value {
    json!({
        "size": model.size(),
        "labels": (0..model.size()).map(|x| model.label(x)).collect::<Vec<_>>(),
    })
}

fn report(
    command: &str,
    settings: &impl serde::Serialize,
    model: Option<&SystemModel>,
    result: Value,
) -> Result<String, CliError> {
    let mut root = json!({
        "command": command,
        "settings": serde_json::to_value(settings)?,
        "result": result,
    });
    if let Some(m) = model {
        root["model"] = model_summary(m);
    }
    Ok(to_json(&root)?)
}

fn beta_json(beta: f64) -> Value {
    if beta.is_finite() {
        json!(beta)
    } else {
        json!("inf")
    }
}

fn column_space_json(model: &SystemModel) -> Value {
    let space = model.column_space();
    let by_point: BTreeMap<String, Vec<String>> = model::generators_by_point(model)
        .into_iter()
        .map(|(p, gens)| {
            (
                space.points[p].to_bit_string(),
                gens.into_iter().map(|z| model.label(z)).collect(),
            )
        })
        .collect();
    json!({
        "d": space.d(),
        "points": space.points.iter().map(|c| c.to_bit_string()).collect::<Vec<_>>(),
        "column_of": space.column_of,
        "contains_zero": space.contains_zero,
        "generators_by_point": by_point,
    })
}

/// Execute one subcommand and return the text written to stdout.
pub fn run(command: Command) -> Result<String, CliError> {
    match command {
        Command::Analyze { source, tol } => {
            check_tolerances(&tol)?;
            let model = load_model(&source)?;
            let cfg = config(&tol);
            let crit = critical::beta_c(&model, &cfg.partition.critical);
            let result = json!({
                "properties": model::properties(&model),
                "column_space": column_space_json(&model),
                "critical": crit,
            });
            report("analyze", &cfg, Some(&model), result)
        }
        Command::Partition {
            source,
            tol,
            beta,
            sweep,
            format,
        } => {
            check_tolerances(&tol)?;
            let model = load_model(&source)?;
            let cfg = config(&tol);
            match (beta, sweep) {
                (Some(b), _) => {
                    if format == Some(Format::Csv) {
                        return sweep_output(&model, &cfg, &[b], Format::Csv);
                    }
                    let r = partition::evaluate(&model, b, &cfg.partition)?;
                    let result = json!({
                        "report": r,
                        "geometric_bound": partition::geometric_bound(&model, b),
                    });
                    report("partition", &cfg, Some(&model), result)
                }
                (None, Some(s)) => sweep_output(&model, &cfg, &s.points(), format.unwrap_or(Format::Csv)),
                (None, None) => Err(CliError::validation("one of --beta or --sweep is required")),
            }
        }
        Command::Critical { source, tol, shells } => {
            check_tolerances(&tol)?;
            let model = load_model(&source)?;
            let cfg = config(&tol);
            let ccfg = &cfg.partition.critical;
            let crit = critical::beta_c(&model, ccfg);
            let est = critical::abscissa_estimate(&model, shells, ccfg)?;
            let result = json!({
                "critical": crit,
                "abscissa_estimate": est,
                "shell_length": shells,
            });
            report("critical", &cfg, Some(&model), result)
        }
        Command::Kms { source, tol, beta } => {
            check_tolerances(&tol)?;
            let model = load_model(&source)?;
            let cfg = config(&tol);
            let regime = classify::classify_ta(&model, beta, &cfg)?;
            let result = json!({
                "regime": regime.name(),
                "phase": regime,
                "extreme_state_count": regime.states().len(),
            });
            report("kms", &cfg, Some(&model), result)
        }
        Command::Oa {
            source,
            tol,
            beta,
            scan,
        } => {
            check_tolerances(&tol)?;
            let model = load_model(&source)?;
            let cfg = config(&tol);
            let result = if scan {
                serde_json::to_value(classify::oa_beta_scan(&model, &cfg)?)?
            } else {
                let b = beta.ok_or_else(|| CliError::validation("one of --beta or --scan is required"))?;
                serde_json::to_value(classify::kms_oa(&model, b, &cfg)?)?
            };
            report("oa", &cfg, Some(&model), result)
        }
        Command::CheckState {
            source,
            tol,
            state,
            state_inline,
            exhaustive,
            shells,
        } => {
            check_tolerances(&tol)?;
            let model = load_model(&source)?;
            let cfg = config(&tol);
            let text = match (&state, &state_inline) {
                (Some(p), _) => read(p)?,
                (None, Some(s)) => s.clone(),
                (None, None) => return Err(CliError::validation("one of --state or --state-inline is required")),
            };
            let result = check_state(&model, &text, exhaustive, shells, &cfg)?;
            report("check-state", &cfg, Some(&model), result)
        }
        Command::Star {
            tol,
            family,
            energies,
            abscissa,
            drop,
            beta,
            levels,
        } => {
            check_tolerances(&tol)?;
            let cfg = config(&tol);
            let fam = match family {
                FamilyArg::Default => {
                    if !energies.is_empty() || abscissa.is_some() {
                        return Err(CliError::validation(
                            "--energies and --abscissa apply to --family list only",
                        ));
                    }
                    StarFamily::Default
                }
                FamilyArg::List => StarFamily::List {
                    energies,
                    abscissa: abscissa.ok_or_else(|| CliError::validation("--family list needs --abscissa"))?,
                },
            };
            let sys = star::build_star(&fam, drop)?;
            let b = beta.unwrap_or(sys.beta_bar);
            let partition = star::star_partition(&sys, b)?;
            let enclosure = star::star_z0_enclosure(&sys, b)?;
            let table = star::truncation_table(&sys, b, &levels, &cfg.partition)?;
            let states: Vec<_> = [0.0, 1.0]
                .iter()
                .map(|&t| star::star_kms_at_critical(&sys, t))
                .collect::<Result<_, _>>()?;
            let settings = json!({
                "classify": cfg,
                "head_terms": sys.head_len,
                "levels": levels,
            });
            let result = json!({
                "system": sys,
                "beta": beta_json(b),
                "zeta": sys.zeta(b),
                "z0_enclosure": enclosure,
                "partition": partition,
                "truncations": table,
                "critical_states": states,
            });
            report("star", &settings, None, result)
        }
        Command::Oracle {
            source,
            beta,
            max_len,
            cap,
            format,
        } => {
            let model = load_model(&source)?;
            if beta.is_nan() || beta <= 0.0 {
                return Err(CliError::validation(format!(
                    "inverse temperature {beta} is not in (0, ∞]"
                )));
            }
            let wcfg = WordsConfig { cap };
            let rows = words::shells(&model, beta, max_len, Endpoints::free(), &wcfg)?;
            match format {
                Format::Csv => {
                    let lines: Vec<Vec<String>> = rows
                        .iter()
                        .map(|s| vec![s.n.to_string(), s.count.to_string(), float(s.sum)])
                        .collect();
                    Ok(to_csv(&["n", "count", "shell_sum"], &lines)?)
                }
                Format::Json => {
                    let partial: f64 = rows.iter().map(|s| s.sum).sum();
                    let result = json!({
                        "beta": beta_json(beta),
                        "shells": rows,
                        "partial_series": partial,
                    });
                    report("oracle", &wcfg, Some(&model), result)
                }
            }
        }
    }
}

fn sweep_output(model: &SystemModel, cfg: &ClassifyConfig, betas: &[f64], format: Format) -> Result<String, CliError> {
    let crit = critical::beta_c(model, &cfg.partition.critical);
    let window = crit.bisection_width.max(cfg.partition.critical.bisection_tol);
    let regime = |b: f64| {
        if crit.permutation_like || b > crit.beta_c + window {
            "above"
        } else if b < crit.beta_c - window {
            "below"
        } else {
            "critical"
        }
    };
    let mut rows = Vec::with_capacity(betas.len());
    for &b in betas {
        let r = partition::evaluate(model, b, &cfg.partition)?;
        rows.push((b, r));
    }
    match format {
        Format::Csv => {
            let lines: Vec<Vec<String>> = rows
                .iter()
                .map(|(b, r)| {
                    let z = match r.z_total {
                        Series::Finite(z) => float(z),
                        Series::Divergent => "divergent".into(),
                    };
                    vec![float(*b), float(r.spectral_radius), z, regime(*b).into()]
                })
                .collect();
            Ok(to_csv(&["beta", "spectral_radius", "z_total", "regime"], &lines)?)
        }
        Format::Json => {
            let points: Vec<Value> = rows
                .iter()
                .map(|(b, r)| json!({"beta": beta_json(*b), "report": r, "regime": regime(*b)}))
                .collect();
            report(
                "partition",
                cfg,
                Some(model),
                json!({"beta_c": crit.beta_c, "sweep": points}),
            )
        }
    }
}

#[derive(Deserialize)]
struct StateInput {
    #[serde(with = "kms_core::beta_serde")]
    beta: f64,
    atom_masses: BTreeMap<String, f64>,
}

fn check_state(
    model: &SystemModel,
    text: &str,
    exhaustive: bool,
    shells: usize,
    cfg: &ClassifyConfig,
) -> Result<Value, CliError> {
    let input: StateInput = serde_json::from_str(text).map_err(|e| CliError::validation(format!("state: {e}")))?;
    if input.beta.is_nan() || input.beta <= 0.0 {
        return Err(CliError::validation(format!(
            "state: inverse temperature {} is not in (0, ∞]",
            input.beta
        )));
    }
    let space = model.column_space();
    let mut atoms = vec![0.0; space.d()];
    for (key, &mass) in &input.atom_masses {
        let col = kms_core::model::Column::parse_bit_string(key)
            .filter(|c| c.len() == model.size())
            .ok_or_else(|| {
                CliError::validation(format!("state: {key:?} is not a column of length {}", model.size()))
            })?;
        let idx = space
            .index_of(&col)
            .ok_or_else(|| CliError::validation(format!("state: {key:?} is not a column of the matrix")))?;
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(CliError::validation(format!(
                "state: mass {mass} at {key:?} is not a finite nonnegative number"
            )));
        }
        atoms[idx] = mass;
    }
    let total: f64 = atoms.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(CliError::validation(format!(
            "state: atom masses sum to {total}, expected 1"
        )));
    }
    let beta = input.beta;
    let mut state = QState::from_atoms(model, beta, atoms, TypeTag::Finite);
    let verdict = invariance::is_subinvariant(model, beta, &state, exhaustive)?;
    let decomposition = if verdict.subinvariant {
        let d = states::decompose(model, beta, &state, &cfg.partition)?;
        state.type_tag = d.type_tag();
        Some(d)
    } else {
        None
    };
    let factors = classify::factors_through_oa(model, beta, &state)?;
    Ok(json!({
        "state": state,
        "p_values": state.p_values(model),
        "verdict": verdict,
        "decomposition": decomposition,
        "omega_infinity_mass": states::omega_infinity_mass(model, beta, &state, shells),
        "factors_through_oa": factors,
    }))
}
