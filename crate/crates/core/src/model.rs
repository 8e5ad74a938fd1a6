//! The dynamical-system input: a 0-1 transition matrix over a finite
//! generator set together with the energies `N(x) > 1`.
//!
//! Generators are the contiguous indices `0..m`. A row `x` of the matrix lists
//! the generators that may follow `x` in an admissible word. The column space
//! (the set of distinct columns) is derived once at construction and cached.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("the generator set is empty")]
    Empty,
    #[error("dimension mismatch: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        found: usize,
    },
    #[error("row {0} of the transition matrix is identically zero")]
    ZeroRow(usize),
    #[error("energy N({0}) must be a real number strictly greater than 1")]
    EnergyNotAboveOne(usize),
    #[error("matrix entry ({row}, {col}) is {value}, expected 0 or 1")]
    InvalidEntry { row: usize, col: usize, value: i64 },
}

/// A column of the transition matrix viewed as a subset of the generators.
///
/// Bits are packed most-significant first, so the derived ordering is the
/// lexicographic order of the bit sequence `(A(0,z), A(1,z), ...)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Column {
    len: usize,
    words: Vec<u64>,
}

impl Column {
    pub fn zeros(len: usize) -> Self {
        Column {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut c = Column::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                c.set(i);
            }
        }
        c
    }

    pub fn set(&mut self, i: usize) {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] |= 1u64 << (63 - i % 64);
    }

    pub fn contains(&self, i: usize) -> bool {
        i < self.len && self.words[i / 64] & (1u64 << (63 - i % 64)) != 0
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Indices of the set bits, ascending.
    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }

    /// Membership in `V(X, Y) = { c : X ⊆ c, Y ∩ c = ∅ }`.
    pub fn in_v(&self, x: &[usize], y: &[usize]) -> bool {
        x.iter().all(|&i| self.contains(i)) && y.iter().all(|&i| !self.contains(i))
    }

    /// Low 64 bits as a mask with bit `i` standing for generator `i`.
    /// Only meaningful for `len <= 64`.
    pub fn as_mask(&self) -> u64 {
        debug_assert!(self.len <= 64);
        self.ones().fold(0u64, |m, i| m | (1u64 << i))
    }

    pub fn to_bit_string(&self) -> String {
        (0..self.len)
            .map(|i| if self.contains(i) { '1' } else { '0' })
            .collect()
    }

    pub fn parse_bit_string(s: &str) -> Option<Self> {
        let bits: Option<Vec<bool>> = s
            .chars()
            .map(|ch| match ch {
                '0' => Some(false),
                '1' => Some(true),
                _ => None,
            })
            .collect();
        bits.map(|b| Column::from_bits(&b))
    }
}

impl fmt::Display for Column {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bit_string())
    }
}

/// The distinct columns of `A`, i.e. the finite space `Σ_A`.
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnSpace {
    /// Distinct columns in lexicographic order.
    pub points: Vec<Column>,
    /// `column_of[z]` is the index in `points` of the column `c_z`.
    pub column_of: Vec<usize>,
    /// Whether the all-zero column occurs.
    pub contains_zero: bool,
}

impl ColumnSpace {
    /// `d(A)`, the number of distinct columns.
    pub fn d(&self) -> usize {
        self.points.len()
    }

    /// Generators whose column is point `c`.
    pub fn generators_at(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.column_of
            .iter()
            .enumerate()
            .filter(move |&(_, &p)| p == c)
            .map(|(z, _)| z)
    }

    /// Index of the point equal to `col`, if any.
    pub fn index_of(&self, col: &Column) -> Option<usize> {
        self.points.binary_search(col).ok()
    }
}

/// Validated `(A, N)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    labels: Option<Vec<String>>,
    matrix: Vec<Vec<bool>>,
    energies: Vec<f64>,
    ln_energies: Vec<f64>,
    successors: Vec<Vec<usize>>,
    columns: ColumnSpace,
}

/// Validate a transition matrix and energies.
pub fn build_model(matrix: Vec<Vec<bool>>, energies: Vec<f64>) -> Result<SystemModel, ModelError> {
    let m = matrix.len();
    if m == 0 {
        return Err(ModelError::Empty);
    }
    for (i, row) in matrix.iter().enumerate() {
        if row.len() != m {
            return Err(ModelError::DimensionMismatch {
                what: format!("matrix row {i}"),
                expected: m,
                found: row.len(),
            });
        }
    }
    if energies.len() != m {
        return Err(ModelError::DimensionMismatch {
            what: "energies".into(),
            expected: m,
            found: energies.len(),
        });
    }
    if let Some(x) = matrix.iter().position(|row| !row.iter().any(|&b| b)) {
        return Err(ModelError::ZeroRow(x));
    }
    // NaN fails the comparison as well.
    if let Some(x) = energies.iter().position(|&n| !(n > 1.0 && n.is_finite())) {
        return Err(ModelError::EnergyNotAboveOne(x));
    }

    let successors: Vec<Vec<usize>> = matrix
        .iter()
        .map(|row| row.iter().enumerate().filter(|&(_, &b)| b).map(|(y, _)| y).collect())
        .collect();
    let columns = derive_columns(&matrix);
    let ln_energies = energies.iter().map(|n| n.ln()).collect();
    Ok(SystemModel {
        labels: None,
        matrix,
        energies,
        ln_energies,
        successors,
        columns,
    })
}

fn derive_columns(matrix: &[Vec<bool>]) -> ColumnSpace {
    let m = matrix.len();
    let raw: Vec<Column> = (0..m)
        .map(|z| {
            let bits: Vec<bool> = (0..m).map(|x| matrix[x][z]).collect();
            Column::from_bits(&bits)
        })
        .collect();
    let mut points: Vec<Column> = raw.clone();
    points.sort();
    points.dedup();
    let column_of = raw
        .iter()
        .map(|c| points.binary_search(c).expect("column present"))
        .collect();
    let contains_zero = points.iter().any(Column::is_zero);
    ColumnSpace {
        points,
        column_of,
        contains_zero,
    }
}

impl SystemModel {
    /// Build from integer entries, rejecting anything other than 0 or 1.
    pub fn from_01(rows: &[Vec<i64>], energies: Vec<f64>) -> Result<Self, ModelError> {
        let mut matrix = Vec::with_capacity(rows.len());
        for (r, row) in rows.iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => out.push(false),
                    1 => out.push(true),
                    _ => {
                        return Err(ModelError::InvalidEntry {
                            row: r,
                            col: c,
                            value: v,
                        })
                    }
                }
            }
            matrix.push(out);
        }
        build_model(matrix, energies)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self, ModelError> {
        if labels.len() != self.size() {
            return Err(ModelError::DimensionMismatch {
                what: "labels".into(),
                expected: self.size(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Number of generators `m`.
    pub fn size(&self) -> usize {
        self.matrix.len()
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn label(&self, x: usize) -> String {
        match &self.labels {
            Some(l) => l[x].clone(),
            None => x.to_string(),
        }
    }

    pub fn entry(&self, x: usize, y: usize) -> bool {
        self.matrix[x][y]
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.matrix
    }

    pub fn energy(&self, x: usize) -> f64 {
        self.energies[x]
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn ln_energy(&self, x: usize) -> f64 {
        self.ln_energies[x]
    }

    /// `N(x)^{-β}`, with `N(x)^{-∞} = 0`.
    pub fn weight(&self, x: usize, beta: f64) -> f64 {
        if beta == f64::INFINITY {
            0.0
        } else {
            (-beta * self.ln_energies[x]).exp()
        }
    }

    /// The vector `(N(x)^{-β})_x`.
    pub fn weights(&self, beta: f64) -> Vec<f64> {
        (0..self.size()).map(|x| self.weight(x, beta)).collect()
    }

    pub fn successors(&self, x: usize) -> &[usize] {
        &self.successors[x]
    }

    pub fn successor_lists(&self) -> &[Vec<usize>] {
        &self.successors
    }

    pub fn column_space(&self) -> &ColumnSpace {
        &self.columns
    }

    /// Column `c_z` as a bit vector.
    pub fn column(&self, z: usize) -> &Column {
        &self.columns.points[self.columns.column_of[z]]
    }

    /// Principal submatrix on `keep` (in the given order).
    pub fn submodel(&self, keep: &[usize]) -> Result<SystemModel, ModelError> {
        let matrix = keep
            .iter()
            .map(|&x| keep.iter().map(|&y| self.matrix[x][y]).collect())
            .collect();
        let energies = keep.iter().map(|&x| self.energies[x]).collect();
        build_model(matrix, energies)
    }
}

/// Column space of a model (cached at construction).
pub fn column_space(model: &SystemModel) -> ColumnSpace {
    model.columns.clone()
}

/// `A(X, Y, z) = ∏_{x∈X} A(x, z) ∏_{y∈Y} (1 − A(y, z))`.
pub fn a_xyz(model: &SystemModel, x_set: &[usize], y_set: &[usize], z: usize) -> u8 {
    let mut prod = 1u8;
    for &x in x_set {
        prod *= model.entry(x, z) as u8;
    }
    for &y in y_set {
        prod *= 1 - model.entry(y, z) as u8;
    }
    prod
}

/// Hypothesis flags of the model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyReport {
    pub irreducible: bool,
    pub no_zero_column: bool,
    /// Greedy witness for the finite-target-set hypothesis.
    pub finite_target_set: Option<Vec<usize>>,
    /// `inf_x N(x)`.
    pub energy_gap: f64,
    pub ta_equals_oa: bool,
}

pub fn properties(model: &SystemModel) -> PropertyReport {
    let irreducible = graph::is_strongly_connected(model.successor_lists());
    let no_zero_column = !model.columns.contains_zero;
    let energy_gap = model.energies.iter().copied().fold(f64::INFINITY, f64::min);
    PropertyReport {
        irreducible,
        no_zero_column,
        finite_target_set: Some(greedy_target_set(model)),
        energy_gap,
        // Equality of the Toeplitz algebra and its quotient needs infinitely
        // many generators; never the case here.
        ta_equals_oa: false,
    }
}

/// Greedy set cover of the rows by columns: repeatedly take the generator `y`
/// hit by the most still-uncovered rows (smallest index on ties).
fn greedy_target_set(model: &SystemModel) -> Vec<usize> {
    let m = model.size();
    let mut covered = vec![false; m];
    let mut remaining = m;
    let mut chosen = Vec::new();
    while remaining > 0 {
        let (best, gain) = (0..m)
            .map(|y| {
                let gain = (0..m).filter(|&x| !covered[x] && model.entry(x, y)).count();
                (y, gain)
            })
            .fold((0, 0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        // Every row is nonzero, so some column always makes progress.
        debug_assert!(gain > 0);
        for (x, cov) in covered.iter_mut().enumerate() {
            if !*cov && model.entry(x, best) {
                *cov = true;
                remaining -= 1;
            }
        }
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

/// JSON ingestion format: `{ "labels": [...]?, "matrix": [[0|1,...],...], "energies": [...] }`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    pub matrix: Vec<Vec<i64>>,
    pub energies: Vec<f64>,
}

impl ModelSpec {
    pub fn into_model(self) -> Result<SystemModel, ModelError> {
        let model = SystemModel::from_01(&self.matrix, self.energies)?;
        match self.labels {
            Some(labels) => model.with_labels(labels),
            None => Ok(model),
        }
    }

    pub fn from_model(model: &SystemModel) -> Self {
        ModelSpec {
            labels: model.labels.clone(),
            matrix: model
                .matrix
                .iter()
                .map(|row| row.iter().map(|&b| b as i64).collect())
                .collect(),
            energies: model.energies.clone(),
        }
    }
}

/// Group generators by the point of their column: `point index -> generators`.
pub fn generators_by_point(model: &SystemModel) -> BTreeMap<usize, Vec<usize>> {
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (z, &p) in model.columns.column_of.iter().enumerate() {
        out.entry(p).or_default().push(z);
    }
    out
}
