//! Attribute data pipeline: cleaning, per-user matrix assembly, min-max
//! normalization with zero-mean adjustment, covariance and PCA.
//!
//! Rows of a [`DataMatrix`] are (domain, attribute) slots and columns are
//! users, so the covariance is taken across attributes.

mod dataset;
mod schema;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{jacobi_eigen, Matrix};

pub use dataset::{read_dataset, DatasetRow, RowError};
pub use schema::{AttributeKind, AttributeSpec, Domain, DomainSchema, Schema};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("domain {0} is not declared in the schema")]
    UndeclaredDomain(Domain),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("attribute {attribute:?} is not declared for domain {domain}")]
    UnknownAttribute { domain: Domain, attribute: String },
    #[error("token {token:?} is not declared for attribute {attribute:?}")]
    UnknownToken { attribute: String, token: String },
    #[error("value for attribute {attribute:?} has the wrong type")]
    TypeMismatch { attribute: String },
    #[error("user {user:?} has no value for {domain}/{attribute}; run preprocess first")]
    MissingValue {
        user: String,
        domain: Domain,
        attribute: String,
    },
    #[error("user {user:?} supplies a different attribute layout than the first user")]
    RaggedInput { user: String },
    #[error("at least 2 users are required, got {0}")]
    TooFewUsers(usize),
    #[error("row {row} is not zero-mean (sum {sum})")]
    NotZeroMean { row: usize, sum: f64 },
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("eigenvalue {0} is negative beyond tolerance")]
    NegativeEigenvalue(f64),
    #[error("variance threshold {0} is outside [0, 100]")]
    InvalidThreshold(f64),
    #[error("no records")]
    Empty,
    #[error("csv: {0}")]
    Csv(String),
}

/// One attribute value as submitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AttrValue {
    Numeric(f64),
    Token(String),
    Missing,
}

impl AttrValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, AttrValue::Missing)
    }
}

/// One user's submission for one domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgriRecord {
    pub user_id: String,
    pub domain: Domain,
    pub attributes: Vec<(String, AttrValue)>,
}

impl AgriRecord {
    pub fn new(user_id: &str, domain: Domain, attributes: Vec<(&str, AttrValue)>) -> Self {
        Self {
            user_id: user_id.to_string(),
            domain,
            attributes: attributes
                .into_iter()
                .map(|(n, v)| (n.to_string(), v))
                .collect(),
        }
    }

    pub fn value(&self, name: &str) -> Option<&AttrValue> {
        self.attributes.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

/// A numeric value that was pulled back into its declared range.
#[derive(Debug, Clone, PartialEq)]
pub struct ClampFlag {
    /// Index into [`Preprocessed::records`].
    pub record: usize,
    pub attribute: String,
    pub original: f64,
    pub clamped: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedRecord {
    /// Index into the input slice.
    pub index: usize,
    pub error: PipelineError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Preprocessed {
    pub records: Vec<AgriRecord>,
    pub clamped: Vec<ClampFlag>,
    pub rejected: Vec<RejectedRecord>,
    pub duplicates_removed: usize,
    pub filled: usize,
}

fn check_record(record: &AgriRecord, schema: &Schema) -> Result<(), PipelineError> {
    let ds = schema
        .domain(record.domain)
        .ok_or(PipelineError::UndeclaredDomain(record.domain))?;
    for (name, value) in &record.attributes {
        let spec = ds.attributes.iter().find(|a| &a.name == name).ok_or_else(|| {
            PipelineError::UnknownAttribute {
                domain: record.domain,
                attribute: name.clone(),
            }
        })?;
        match (&spec.kind, value) {
            (_, AttrValue::Missing) => {}
            (AttributeKind::Numeric { .. }, AttrValue::Numeric(v)) if v.is_finite() => {}
            (AttributeKind::Categorical { tokens }, AttrValue::Token(t)) => {
                if !tokens.contains(t) {
                    return Err(PipelineError::UnknownToken {
                        attribute: name.clone(),
                        token: t.clone(),
                    });
                }
            }
            _ => {
                return Err(PipelineError::TypeMismatch {
                    attribute: name.clone(),
                })
            }
        }
    }
    Ok(())
}

/// Cleans raw records.
///
/// Records are validated against `schema` (bad ones are rejected
/// individually), duplicate (user, domain, attribute set) submissions are
/// dropped keeping the first, numeric values are clamped into range, and
/// missing values are filled from the nearest present values of the same
/// attribute in submission order: the mean of both neighbours, or the one
/// neighbour at a boundary. An attribute with no present value at all falls
/// back to its range midpoint (numeric) or first declared token.
pub fn preprocess(records: &[AgriRecord], schema: &Schema) -> Preprocessed {
    let mut out = Preprocessed::default();
    let mut seen: BTreeSet<(String, Domain, Vec<String>)> = BTreeSet::new();

    for (index, record) in records.iter().enumerate() {
        if let Err(error) = check_record(record, schema) {
            out.rejected.push(RejectedRecord { index, error });
            continue;
        }
        let mut names: Vec<String> = record.attributes.iter().map(|(n, _)| n.clone()).collect();
        names.sort();
        if !seen.insert((record.user_id.clone(), record.domain, names)) {
            out.duplicates_removed += 1;
            continue;
        }
        out.records.push(record.clone());
    }

    for (ri, record) in out.records.iter_mut().enumerate() {
        for (name, value) in record.attributes.iter_mut() {
            let spec = schema.attribute(record.domain, name).expect("checked");
            if let (AttributeKind::Numeric { min, max, .. }, AttrValue::Numeric(v)) =
                (&spec.kind, &*value)
            {
                let clamped = v.clamp(*min, *max);
                if clamped != *v {
                    out.clamped.push(ClampFlag {
                        record: ri,
                        attribute: name.clone(),
                        original: *v,
                        clamped,
                    });
                    *value = AttrValue::Numeric(clamped);
                }
            }
        }
    }

    // (domain, attribute) -> positions (record index, attribute index) in submission order
    let mut sequences: HashMap<(Domain, String), Vec<(usize, usize)>> = HashMap::new();
    let mut keys: Vec<(Domain, String)> = Vec::new();
    for (ri, record) in out.records.iter().enumerate() {
        for (ai, (name, _)) in record.attributes.iter().enumerate() {
            let key = (record.domain, name.clone());
            sequences
                .entry(key.clone())
                .or_insert_with(|| {
                    keys.push(key);
                    Vec::new()
                })
                .push((ri, ai));
        }
    }

    for key in keys {
        let positions = &sequences[&key];
        let values: Vec<AttrValue> = positions
            .iter()
            .map(|&(ri, ai)| out.records[ri].attributes[ai].1.clone())
            .collect();
        if !values.iter().any(AttrValue::is_missing) {
            continue;
        }
        let spec = schema.attribute(key.0, &key.1).expect("checked");
        let filled = fill_sequence(&values, &spec.kind);
        for (&(ri, ai), (old, new)) in positions.iter().zip(values.iter().zip(filled)) {
            if old.is_missing() {
                out.records[ri].attributes[ai].1 = new;
                out.filled += 1;
            }
        }
    }

    out
}

fn fill_sequence(values: &[AttrValue], kind: &AttributeKind) -> Vec<AttrValue> {
    let present = |v: &AttrValue| !v.is_missing();
    let fallback = match kind {
        AttributeKind::Numeric { min, max, .. } => AttrValue::Numeric((min + max) / 2.0),
        AttributeKind::Categorical { tokens } => AttrValue::Token(tokens[0].clone()),
    };
    (0..values.len())
        .map(|i| {
            if present(&values[i]) {
                return values[i].clone();
            }
            let before = values[..i].iter().rev().find(|v| present(v));
            let after = values[i + 1..].iter().find(|v| present(v));
            match (before, after) {
                (Some(AttrValue::Numeric(a)), Some(AttrValue::Numeric(b))) => {
                    AttrValue::Numeric((a + b) / 2.0)
                }
                (Some(v), _) | (None, Some(v)) => v.clone(),
                (None, None) => fallback.clone(),
            }
        })
        .collect()
}

/// Attribute-by-user matrix: one row per (domain, attribute) slot, one
/// column per user. Column `a` is user `a`'s domain-by-attribute grid
/// flattened row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    pub users: Vec<String>,
    pub slots: Vec<(Domain, String)>,
    /// Attribute count of each domain, in row order.
    pub attributes_per_domain: Vec<(Domain, usize)>,
    pub values: Matrix,
}

impl DataMatrix {
    pub fn new(users: Vec<String>, slots: Vec<(Domain, String)>, values: Matrix) -> Self {
        assert_eq!(values.rows(), slots.len());
        assert_eq!(values.cols(), users.len());
        let mut attributes_per_domain: Vec<(Domain, usize)> = Vec::new();
        for (d, _) in &slots {
            match attributes_per_domain.last_mut() {
                Some((last, n)) if last == d => *n += 1,
                _ => attributes_per_domain.push((*d, 1)),
            }
        }
        Self {
            users,
            slots,
            attributes_per_domain,
            values,
        }
    }

    /// Wraps a bare matrix with synthetic labels; handy for numeric work.
    pub fn from_matrix(values: Matrix) -> Self {
        let users = (0..values.cols()).map(|a| format!("u{a}")).collect();
        let slots = (0..values.rows())
            .map(|r| (Domain::Crop, format!("a{r}")))
            .collect();
        Self::new(users, slots, values)
    }

    pub fn user_count(&self) -> usize {
        self.values.cols()
    }

    pub fn domain_count(&self) -> usize {
        self.attributes_per_domain.len()
    }

    pub fn slot_count(&self) -> usize {
        self.values.rows()
    }

    /// Largest absolute row sum relative to the row's scale.
    pub fn is_zero_mean(&self, tol: f64) -> bool {
        zero_mean_violation(&self.values, tol).is_none()
    }
}

fn zero_mean_violation(m: &Matrix, tol: f64) -> Option<(usize, f64)> {
    (0..m.rows()).find_map(|i| {
        let row = m.row(i);
        let sum: f64 = row.iter().sum();
        let scale: f64 = 1.0 + row.iter().map(|v| v.abs()).sum::<f64>();
        (sum.abs() > tol * scale).then_some((i, sum))
    })
}

/// Assembles the attribute-by-user matrix from cleaned records.
///
/// Users appear in first-submission order. Each user's slots are ordered by
/// schema domain order, then schema attribute order; every user must
/// produce the same slot list. Categorical tokens become their index in the
/// declared token list.
pub fn build_matrix(records: &[AgriRecord], schema: &Schema) -> Result<DataMatrix, PipelineError> {
    if records.is_empty() {
        return Err(PipelineError::Empty);
    }
    let mut users: Vec<String> = Vec::new();
    for r in records {
        if !users.contains(&r.user_id) {
            users.push(r.user_id.clone());
        }
    }

    let mut layout: Option<Vec<(Domain, String)>> = None;
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(users.len());
    for user in &users {
        let mut own: Vec<&AgriRecord> = records.iter().filter(|r| &r.user_id == user).collect();
        for r in &own {
            check_record(r, schema)?;
        }
        own.sort_by_key(|r| schema.domain_rank(r.domain));
        let mut slots = Vec::new();
        let mut column = Vec::new();
        for r in own {
            let ds = schema.domain(r.domain).expect("checked");
            for spec in &ds.attributes {
                let Some(value) = r.value(&spec.name) else {
                    continue;
                };
                let encoded = match value {
                    AttrValue::Numeric(v) => *v,
                    AttrValue::Token(t) => spec.token_index(t).expect("checked") as f64,
                    AttrValue::Missing => {
                        return Err(PipelineError::MissingValue {
                            user: user.clone(),
                            domain: r.domain,
                            attribute: spec.name.clone(),
                        })
                    }
                };
                slots.push((r.domain, spec.name.clone()));
                column.push(encoded);
            }
        }
        match &layout {
            None => layout = Some(slots),
            Some(first) if *first != slots => {
                return Err(PipelineError::RaggedInput { user: user.clone() })
            }
            Some(_) => {}
        }
        columns.push(column);
    }

    let slots = layout.expect("at least one user");
    let mut values = Matrix::zeros(slots.len(), users.len());
    for (a, column) in columns.iter().enumerate() {
        for (i, v) in column.iter().enumerate() {
            values[(i, a)] = *v;
        }
    }
    Ok(DataMatrix::new(users, slots, values))
}

/// Min-max scales every attribute row to [0, 1] and then shifts it to zero
/// mean. A constant row becomes all zeros.
pub fn normalize_zero_mean(m: &DataMatrix) -> Result<DataMatrix, PipelineError> {
    let z = m.user_count();
    if z < 2 {
        return Err(PipelineError::TooFewUsers(z));
    }
    let mut out = m.clone();
    for i in 0..out.values.rows() {
        let row = out.values.row_mut(i);
        let (lo, hi) = row
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        if hi > lo {
            row.iter_mut().for_each(|v| *v = (*v - lo) / (hi - lo));
        } else {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        center_row(row);
    }
    Ok(out)
}

fn center_row(row: &mut [f64]) {
    let mean = row.iter().sum::<f64>() / row.len() as f64;
    row.iter_mut().for_each(|v| *v -= mean);
}

/// Subtracts each row's mean without rescaling.
pub fn center(m: &DataMatrix) -> DataMatrix {
    let mut out = m.clone();
    for i in 0..out.values.rows() {
        center_row(out.values.row_mut(i));
    }
    out
}

pub const ZERO_MEAN_TOLERANCE: f64 = 1e-9;

/// Sample covariance across attributes, `P·Pᵀ / (z − 1)`, for zero-mean
/// input. Entries are computed once for `i <= j` and mirrored, so the
/// result is exactly symmetric.
pub fn covariance(m: &DataMatrix) -> Result<Matrix, PipelineError> {
    let z = m.user_count();
    if z < 2 {
        return Err(PipelineError::TooFewUsers(z));
    }
    if let Some((row, sum)) = zero_mean_violation(&m.values, ZERO_MEAN_TOLERANCE) {
        return Err(PipelineError::NotZeroMean { row, sum });
    }
    let n = m.slot_count();
    let denom = (z - 1) as f64;
    let mut cov = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = m
                .values
                .row(i)
                .iter()
                .zip(m.values.row(j))
                .map(|(a, b)| a * b)
                .sum();
            cov[(i, j)] = s / denom;
            cov[(j, i)] = cov[(i, j)];
        }
    }
    Ok(cov)
}

/// Eigen-decomposition of a covariance matrix plus the component selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub selected_count: usize,
    /// Percentage of total variance held by the selected components.
    pub explained_fraction: f64,
    /// `selected_count × z` projected data, once [`project`] has run.
    pub scores: Option<Matrix>,
}

pub const EIGEN_CLAMP: f64 = 1e-10;

/// Eigenpairs of `cov`, sorted descending, with every component selected.
pub fn decompose(cov: &Matrix) -> Result<PcaResult, PipelineError> {
    if !cov.is_square() {
        return Err(PipelineError::DimensionMismatch {
            expected: cov.rows(),
            actual: cov.cols(),
        });
    }
    let eig = jacobi_eigen(cov);
    let n = eig.values.len();
    let mut result = PcaResult {
        eigenvalues: eig.values,
        eigenvectors: eig.vectors,
        selected_count: n,
        explained_fraction: 100.0,
        scores: None,
    };
    clamp_eigenvalues(&mut result.eigenvalues)?;
    Ok(result)
}

fn clamp_eigenvalues(values: &mut [f64]) -> Result<(), PipelineError> {
    for v in values.iter_mut() {
        if *v < -EIGEN_CLAMP {
            return Err(PipelineError::NegativeEigenvalue(*v));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Share of variance, in percent, carried by the first `r` eigenvalues.
/// An all-zero spectrum counts as fully explained.
pub fn explained_percentage(eigenvalues: &[f64], r: usize) -> f64 {
    let total: f64 = eigenvalues.iter().sum();
    if total <= 0.0 || r >= eigenvalues.len() {
        return 100.0;
    }
    let partial: f64 = eigenvalues[..r].iter().sum();
    100.0 * partial / total
}

/// Chooses the smallest `r >= 1` whose explained percentage reaches
/// `v_threshold`.
pub fn select_components(p: &PcaResult, v_threshold: f64) -> Result<PcaResult, PipelineError> {
    if !(0.0..=100.0).contains(&v_threshold) {
        return Err(PipelineError::InvalidThreshold(v_threshold));
    }
    let mut values = p.eigenvalues.clone();
    clamp_eigenvalues(&mut values)?;
    if values.is_empty() {
        return Err(PipelineError::Empty);
    }
    let total: f64 = values.iter().sum();
    let r = if total <= 0.0 {
        1
    } else {
        (1..=values.len())
            .find(|&r| explained_percentage(&values, r) >= v_threshold)
            .unwrap_or(values.len())
    };
    Ok(PcaResult {
        explained_fraction: explained_percentage(&values, r),
        eigenvalues: values,
        eigenvectors: p.eigenvectors.clone(),
        selected_count: r,
        scores: None,
    })
}

/// Projects every user column onto the selected eigenvectors, giving an
/// `r × z` score matrix.
pub fn project(m: &DataMatrix, p: &PcaResult) -> Result<Matrix, PipelineError> {
    let r = p.selected_count;
    if r == 0 || r > p.eigenvectors.len() {
        return Err(PipelineError::DimensionMismatch {
            expected: p.eigenvectors.len(),
            actual: r,
        });
    }
    let n = m.slot_count();
    if let Some(v) = p.eigenvectors.iter().find(|v| v.len() != n) {
        return Err(PipelineError::DimensionMismatch {
            expected: n,
            actual: v.len(),
        });
    }
    let z = m.user_count();
    let mut scores = Matrix::zeros(r, z);
    for (c, ev) in p.eigenvectors[..r].iter().enumerate() {
        for a in 0..z {
            scores[(c, a)] = (0..n).map(|i| ev[i] * m.values[(i, a)]).sum();
        }
    }
    Ok(scores)
}

/// Maps scores back to attribute space: `[EV_1 … EV_r] · scores`.
pub fn reconstruct(p: &PcaResult, scores: &Matrix) -> Matrix {
    let r = scores.rows();
    let n = p.eigenvectors.first().map_or(0, Vec::len);
    let mut out = Matrix::zeros(n, scores.cols());
    for c in 0..r {
        let ev = &p.eigenvectors[c];
        for a in 0..scores.cols() {
            let s = scores[(c, a)];
            for i in 0..n {
                out[(i, a)] += ev[i] * s;
            }
        }
    }
    out
}

/// Output of the full reduction chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub normalized: DataMatrix,
    pub covariance: Matrix,
    pub pca: PcaResult,
}

/// normalize → covariance → eigendecomposition → selection → projection.
pub fn reduce(m: &DataMatrix, v_threshold: f64) -> Result<Reduction, PipelineError> {
    let normalized = normalize_zero_mean(m)?;
    let covariance = covariance(&normalized)?;
    let mut pca = select_components(&decompose(&covariance)?, v_threshold)?;
    pca.scores = Some(project(&normalized, &pca)?);
    Ok(Reduction {
        normalized,
        covariance,
        pca,
    })
}
