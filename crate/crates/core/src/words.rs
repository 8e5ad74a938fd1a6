//! Brute-force enumeration of admissible words and direct partial sums of the
//! Dirichlet series `Σ_μ N(μ)^{-β}`.
//!
//! Nothing here touches the transfer matrix: every value is produced by
//! walking words one at a time, so these sums serve as the independent
//! reference for the closed forms elsewhere in the crate.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::KahanSum;
use crate::model::SystemModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WordsError {
    #[error("{count} words requested, exceeding the cap of {cap}")]
    LengthTooLarge { count: u128, cap: u64 },
    #[error("generator {0} out of range")]
    UnknownGenerator(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WordsConfig {
    /// Maximum number of words a single call may visit.
    pub cap: u64,
}

impl Default for WordsConfig {
    fn default() -> Self {
        WordsConfig { cap: 10_000_000 }
    }
}

/// A word `μ = μ_1 ... μ_n` with `A(μ_i, μ_{i+1}) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibleWord {
    pub letters: Vec<usize>,
    /// `log N(μ) = Σ_i log N(μ_i)`.
    pub weight_exponent: f64,
}

impl AdmissibleWord {
    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    /// `N(μ)^{-β}`; the empty word has weight 1.
    pub fn weight(&self, beta: f64) -> f64 {
        if self.letters.is_empty() {
            1.0
        } else if beta == f64::INFINITY {
            0.0
        } else {
            (-beta * self.weight_exponent).exp()
        }
    }

    pub fn last(&self) -> Option<usize> {
        self.letters.last().copied()
    }
}

/// Endpoint restrictions for shell sums.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Endpoints {
    pub source: Option<usize>,
    pub target: Option<usize>,
}

impl Endpoints {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn constrained(&self) -> bool {
        self.source.is_some() || self.target.is_some()
    }

    fn check(&self, m: usize) -> Result<(), WordsError> {
        for g in [self.source, self.target].into_iter().flatten() {
            if g >= m {
                return Err(WordsError::UnknownGenerator(g));
            }
        }
        Ok(())
    }
}

/// Number of admissible words of length `n` obeying `ends`, by counting paths.
pub fn count_words(model: &SystemModel, n: usize, ends: Endpoints) -> u128 {
    let m = model.size();
    if n == 0 {
        return u128::from(!ends.constrained());
    }
    // paths[x] = number of admissible words of the current length starting at x.
    let mut paths: Vec<u128> = (0..m).map(|x| u128::from(ends.target.is_none_or(|t| t == x))).collect();
    for _ in 1..n {
        paths = (0..m)
            .map(|x| {
                model
                    .successors(x)
                    .iter()
                    .fold(0u128, |a, &y| a.saturating_add(paths[y]))
            })
            .collect();
    }
    match ends.source {
        Some(s) => paths[s],
        None => paths.iter().fold(0u128, |a, &b| a.saturating_add(b)),
    }
}

fn check_cap(total: u128, cfg: &WordsConfig) -> Result<(), WordsError> {
    if total > u128::from(cfg.cap) {
        Err(WordsError::LengthTooLarge {
            count: total,
            cap: cfg.cap,
        })
    } else {
        Ok(())
    }
}

/// All admissible words of length `n`, in lexicographic order.
pub fn enumerate(model: &SystemModel, n: usize, cfg: &WordsConfig) -> Result<Vec<AdmissibleWord>, WordsError> {
    check_cap(count_words(model, n, Endpoints::free()), cfg)?;
    let mut out = Vec::new();
    if n == 0 {
        out.push(AdmissibleWord {
            letters: Vec::new(),
            weight_exponent: 0.0,
        });
        return Ok(out);
    }
    let mut letters = Vec::with_capacity(n);
    for x in 0..model.size() {
        letters.push(x);
        extend(model, n, &mut letters, model.ln_energy(x), &mut out);
        letters.pop();
    }
    Ok(out)
}

fn extend(model: &SystemModel, n: usize, letters: &mut Vec<usize>, log_w: f64, out: &mut Vec<AdmissibleWord>) {
    if letters.len() == n {
        out.push(AdmissibleWord {
            letters: letters.clone(),
            weight_exponent: log_w,
        });
        return;
    }
    let last = *letters.last().expect("nonempty prefix");
    for &y in model.successors(last) {
        letters.push(y);
        extend(model, n, letters, log_w + model.ln_energy(y), out);
        letters.pop();
    }
}

/// One row of per-length output: `n`, number of words, `Σ N(μ)^{-β}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shell {
    pub n: usize,
    pub count: u64,
    pub sum: f64,
}

struct ShellWalk<'a> {
    model: &'a SystemModel,
    weights: Vec<f64>,
    target: Option<usize>,
    max_len: usize,
    sums: Vec<KahanSum>,
    counts: Vec<u64>,
}

impl ShellWalk<'_> {
    fn visit(&mut self, last: usize, depth: usize, w: f64) {
        if self.target.is_none_or(|t| t == last) {
            self.sums[depth].add(w);
            self.counts[depth] += 1;
        }
        if depth == self.max_len {
            return;
        }
        for i in 0..self.model.successors(last).len() {
            let y = self.model.successors(last)[i];
            let wy = w * self.weights[y];
            self.visit(y, depth + 1, wy);
        }
    }
}

/// Shells `n = 0..=max_len` by depth-first enumeration.
///
/// With an endpoint constraint the `n = 0` shell is empty (the empty word has
/// no first or last letter).
pub fn shells(
    model: &SystemModel,
    beta: f64,
    max_len: usize,
    ends: Endpoints,
    cfg: &WordsConfig,
) -> Result<Vec<Shell>, WordsError> {
    ends.check(model.size())?;
    // The walk visits every prefix, so cap on prefix counts (target ignored).
    let visited = (0..=max_len).fold(0u128, |acc, n| {
        acc.saturating_add(count_words(
            model,
            n,
            Endpoints {
                source: ends.source,
                target: None,
            },
        ))
    });
    check_cap(visited, cfg)?;

    let mut walk = ShellWalk {
        model,
        weights: model.weights(beta),
        target: ends.target,
        max_len,
        sums: vec![KahanSum::new(); max_len + 1],
        counts: vec![0; max_len + 1],
    };
    if !ends.constrained() {
        walk.sums[0].add(1.0);
        walk.counts[0] = 1;
    }
    if max_len > 0 {
        let starts: Vec<usize> = match ends.source {
            Some(s) => vec![s],
            None => (0..model.size()).collect(),
        };
        for x in starts {
            let w = walk.weights[x];
            walk.visit(x, 1, w);
        }
    }
    Ok((0..=max_len)
        .map(|n| Shell {
            n,
            count: walk.counts[n],
            sum: walk.sums[n].value(),
        })
        .collect())
}

/// `Σ_{μ ∈ P_A^n} N(μ)^{-β}`, optionally restricted by first/last letter.
pub fn shell_sum(
    model: &SystemModel,
    beta: f64,
    n: usize,
    ends: Endpoints,
    cfg: &WordsConfig,
) -> Result<f64, WordsError> {
    ends.check(model.size())?;
    if n == 0 {
        return Ok(if ends.constrained() { 0.0 } else { 1.0 });
    }
    check_cap(count_words(model, n, ends), cfg)?;
    let weights = model.weights(beta);
    let mut acc = KahanSum::new();
    let starts: Vec<usize> = match ends.source {
        Some(s) => vec![s],
        None => (0..model.size()).collect(),
    };
    fn walk(
        model: &SystemModel,
        weights: &[f64],
        last: usize,
        remaining: usize,
        w: f64,
        target: Option<usize>,
        acc: &mut KahanSum,
    ) {
        if remaining == 0 {
            if target.is_none_or(|t| t == last) {
                acc.add(w);
            }
            return;
        }
        for &y in model.successors(last) {
            walk(model, weights, y, remaining - 1, w * weights[y], target, acc);
        }
    }
    for x in starts {
        walk(model, &weights, x, n - 1, weights[x], ends.target, &mut acc);
    }
    Ok(acc.value())
}

/// Truncated Dirichlet series `Σ_{n ≤ L}` of the shell sums.
pub fn partial_series(
    model: &SystemModel,
    beta: f64,
    max_len: usize,
    ends: Endpoints,
    cfg: &WordsConfig,
) -> Result<f64, WordsError> {
    let rows = shells(model, beta, max_len, ends, cfg)?;
    Ok(rows.iter().map(|s| s.sum).collect::<KahanSum>().value())
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
    fn full_matrix_admits_everything() {
        let words = enumerate(&full2(), 3, &WordsConfig::default()).unwrap();
        assert_eq!(words.len(), 8);
        assert_eq!(words[0].letters, vec![0, 0, 0]);
        assert_eq!(words[7].letters, vec![1, 1, 1]);
    }

    #[test]
    fn two_cycle_alternates() {
        let m = model(&[&[0, 1], &[1, 0]], &[2.0, 2.0]);
        let words: Vec<Vec<usize>> = enumerate(&m, 3, &WordsConfig::default())
            .unwrap()
            .into_iter()
            .map(|w| w.letters)
            .collect();
        assert_eq!(words, vec![vec![0, 1, 0], vec![1, 0, 1]]);
    }

    #[test]
    fn golden_mean_excludes_repeat_of_first() {
        let m = model(&[&[0, 1], &[1, 1]], &[2.0, 2.0]);
        let words: Vec<Vec<usize>> = enumerate(&m, 2, &WordsConfig::default())
            .unwrap()
            .into_iter()
            .map(|w| w.letters)
            .collect();
        assert_eq!(words, vec![vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn empty_word() {
        let w = enumerate(&full2(), 0, &WordsConfig::default()).unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].is_empty());
        assert_eq!(w[0].weight(7.0), 1.0);
    }

    #[test]
    fn shell_examples() {
        let cfg = WordsConfig::default();
        let m = full2();
        assert_eq!(shell_sum(&m, 2.0, 2, Endpoints::free(), &cfg).unwrap(), 0.25);
        assert_eq!(shell_sum(&m, 0.3, 0, Endpoints::free(), &cfg).unwrap(), 1.0);
        let ends = Endpoints {
            source: Some(0),
            target: Some(0),
        };
        assert_eq!(shell_sum(&m, 2.0, 2, ends, &cfg).unwrap(), 0.0625);
        assert_eq!(shell_sum(&m, 2.0, 0, ends, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn partial_series_examples() {
        let cfg = WordsConfig::default();
        let s = partial_series(&full2(), 2.0, 3, Endpoints::free(), &cfg).unwrap();
        assert!((s - 1.875).abs() < 1e-15);
        assert_eq!(partial_series(&full2(), 2.0, 0, Endpoints::free(), &cfg).unwrap(), 1.0);
        let cyc = model(&[&[0, 1], &[1, 0]], &[2.0, 2.0]);
        let s = partial_series(&cyc, 1.0, 4, Endpoints::free(), &cfg).unwrap();
        assert!((s - 2.875).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let cfg = WordsConfig { cap: 7 };
        assert!(matches!(
            enumerate(&full2(), 3, &cfg),
            Err(WordsError::LengthTooLarge { count: 8, cap: 7 })
        ));
        assert!(enumerate(&full2(), 2, &cfg).is_ok());
    }

    #[test]
    fn shells_match_single_shell_sums() {
        let m = model(&[&[0, 1, 1], &[1, 0, 1], &[1, 1, 1]], &[1.5, 2.5, 3.0]);
        let cfg = WordsConfig::default();
        for ends in [
            Endpoints::free(),
            Endpoints {
                source: Some(1),
                target: None,
            },
            Endpoints {
                source: Some(2),
                target: Some(0),
            },
        ] {
            let rows = shells(&m, 0.7, 6, ends, &cfg).unwrap();
            for row in rows {
                let single = shell_sum(&m, 0.7, row.n, ends, &cfg).unwrap();
                assert!((row.sum - single).abs() <= 1e-12 * single.max(1e-300));
                assert_eq!(u128::from(row.count), count_words(&m, row.n, ends));
            }
        }
    }

    #[test]
    fn unknown_generator() {
        let ends = Endpoints {
            source: Some(5),
            target: None,
        };
        assert_eq!(
            shell_sum(&full2(), 1.0, 2, ends, &WordsConfig::default()),
            Err(WordsError::UnknownGenerator(5))
        );
    }
}
