use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "kms",
    version,
    about = "KMS phase diagrams of Toeplitz–Cuntz–Krieger systems"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// Model file: {"labels"?: [...], "matrix": [[0|1,...],...], "energies": [...]}.
    #[arg(long, value_name = "PATH")]
    pub model: Option<PathBuf>,
    /// The same JSON given inline.
    #[arg(long, value_name = "JSON")]
    pub inline: Option<String>,
}

#[derive(Args, Debug, Clone, Copy)]
pub struct Tolerances {
    /// Width of the near-critical band below r(M) = 1.
    #[arg(long, default_value_t = 1e-9)]
    pub margin: f64,
    /// Bisection width on β.
    #[arg(long, default_value_t = 1e-10)]
    pub bisection_tol: f64,
    /// Relative Rayleigh-quotient drift of the power iteration.
    #[arg(long, default_value_t = 1e-12)]
    pub power_tol: f64,
    /// Total power-iteration budget.
    #[arg(long, default_value_t = 100_000)]
    pub power_iterations: usize,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Model properties, column space and critical temperature.
    Analyze {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        tol: Tolerances,
    },
    /// Partition functions at one β or along a sweep.
    Partition {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        tol: Tolerances,
        /// Inverse temperature (a number or `inf`).
        #[arg(long, value_parser = parse_beta, conflicts_with = "sweep", required_unless_present = "sweep")]
        beta: Option<f64>,
        /// Uniform grid `b0:b1:steps` with inclusive endpoints.
        #[arg(long, value_parser = parse_sweep)]
        sweep: Option<Sweep>,
        /// Output format; sweeps default to CSV.
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Critical inverse temperature and shell-ratio estimate of the abscissa.
    Critical {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        tol: Tolerances,
        /// Word length of the shell-ratio estimate.
        #[arg(long, default_value_t = 16)]
        shells: usize,
    },
    /// KMS states of the Toeplitz algebra at β.
    Kms {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_parser = parse_beta)]
        beta: f64,
    },
    /// KMS states of the Cuntz–Krieger quotient.
    Oa {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_parser = parse_beta, conflicts_with = "scan", required_unless_present = "scan")]
        beta: Option<f64>,
        /// Search every β with states.
        #[arg(long)]
        scan: bool,
    },
    /// Subinvariance verdict and decomposition of a state.
    CheckState {
        #[command(flatten)]
        source: ModelSource,
        #[command(flatten)]
        tol: Tolerances,
        /// State file: {"beta": b, "atom_masses": {"<column bits>": mass, ...}}.
        #[arg(
            long,
            value_name = "PATH",
            conflicts_with = "state_inline",
            required_unless_present = "state_inline"
        )]
        state: Option<PathBuf>,
        #[arg(long, value_name = "JSON")]
        state_inline: Option<String>,
        /// Also check every pair (X, Y) directly.
        #[arg(long)]
        exhaustive: bool,
        /// Number of Ω_∞ shells reported.
        #[arg(long, default_value_t = 20)]
        shells: usize,
    },
    /// The star family: closed forms, truncations and critical states.
    Star {
        #[command(flatten)]
        tol: Tolerances,
        #[arg(long, value_enum, default_value_t = FamilyArg::Default)]
        family: FamilyArg,
        /// Comma-separated energies for `--family list`.
        #[arg(long, value_delimiter = ',')]
        energies: Vec<f64>,
        /// Declared abscissa for `--family list`.
        #[arg(long)]
        abscissa: Option<f64>,
        /// `auto` or a number of leading terms to discard.
        #[arg(long, default_value = "auto", value_parser = parse_drop)]
        drop: kms_core::star::Drop,
        /// Evaluation β (defaults to the abscissa).
        #[arg(long, value_parser = parse_beta)]
        beta: Option<f64>,
        /// Truncation levels for the comparison table.
        #[arg(long, value_delimiter = ',', default_values_t = kms_core::star::TABLE_LEVELS)]
        levels: Vec<usize>,
    },
    /// Brute-force shell sums: n, word count, Σ N(μ)^{-β}.
    Oracle {
        #[command(flatten)]
        source: ModelSource,
        #[arg(long, value_parser = parse_beta)]
        beta: f64,
        #[arg(long, default_value_t = 10)]
        max_len: usize,
        /// Maximum number of words visited.
        #[arg(long, default_value_t = 10_000_000)]
        cap: u64,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Default,
    List,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub end: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.start];
        }
        let h = (self.end - self.start) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i + 1 == self.steps {
                    self.end
                } else {
                    self.start + h * i as f64
                }
            })
            .collect()
    }
}

fn parse_beta(s: &str) -> Result<f64, String> {
    kms_core::beta_serde::parse(s)
}

fn parse_sweep(s: &str) -> Result<Sweep, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected b0:b1:steps, got {s:?}"));
    };
    let start: f64 = a.parse().map_err(|_| format!("bad start {a:?}"))?;
    let end: f64 = b.parse().map_err(|_| format!("bad end {b:?}"))?;
    let steps: usize = n.parse().map_err(|_| format!("bad step count {n:?}"))?;
    if steps == 0 || !start.is_finite() || !end.is_finite() || end < start {
        return Err(format!("invalid sweep {s:?}"));
    }
    Ok(Sweep { start, end, steps })
}

fn parse_drop(s: &str) -> Result<kms_core::star::Drop, String> {
    if s == "auto" {
        return Ok(kms_core::star::Drop::Auto);
    }
    s.parse()
        .map(kms_core::star::Drop::Fixed)
        .map_err(|_| format!("expected `auto` or a nonnegative integer, got {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_is_inclusive() {
        let s = parse_sweep("1:2:5").unwrap();
        assert_eq!(s.points(), vec![1.0, 1.25, 1.5, 1.75, 2.0]);
        assert!(parse_sweep("2:1:3").is_err());
        assert!(parse_sweep("1:2").is_err());
    }

    #[test]
    fn beta_accepts_inf() {
        assert_eq!(parse_beta("inf").unwrap(), f64::INFINITY);
        assert_eq!(parse_beta("0.5").unwrap(), 0.5);
        assert!(parse_beta("x").is_err());
    }
}
