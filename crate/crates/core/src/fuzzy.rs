//! Fuzzy rule induction from labeled examples.
//!
//! Output scores are sorted and grouped into clusters by adjacent
//! similarity, inputs get one triangular term per observed value, and a
//! sparse decision table maps term positions to output clusters. The table
//! is simplified by merging adjacent compatible lines and read off as one
//! rule per slot. Queries fire rules with min-AND and take the strongest.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{Feature, FeatureKind, ProductivityLevel, TrainingInstanceDataset};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("need at least 2 outputs, got {0}")]
    TooFewOutputs(usize),
    #[error("shape parameter s must be positive, got {0}")]
    BadShape(f64),
    #[error("threshold mu must lie in [0, 1], got {0}")]
    BadMu(f64),
    #[error("all values are identical; no unit can be derived")]
    NoUnit,
    #[error("no values given")]
    Empty,
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("query has {actual} features, model expects {expected}")]
    Arity { expected: usize, actual: usize },
    #[error("feature {0} has the wrong kind")]
    KindMismatch(usize),
    #[error("no rule fires for this query")]
    NoMatchingRule,
    #[error("rule set is empty")]
    NoRules,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyParams {
    /// Shape of the similarity function.
    pub s: f64,
    /// Split threshold on adjacent similarity.
    pub mu: f64,
}

impl Default for FuzzyParams {
    fn default() -> Self {
        Self { s: 1.0, mu: 0.5 }
    }
}

impl FuzzyParams {
    pub fn validate(&self) -> Result<(), FuzzyError> {
        if !(self.s > 0.0 && self.s.is_finite()) {
            return Err(FuzzyError::BadShape(self.s));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(FuzzyError::BadMu(self.mu));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilaritySeries {
    pub sorted_outputs: Vec<f64>,
    /// `order[m]` is the input index of `sorted_outputs[m]`.
    pub order: Vec<usize>,
    pub diffs: Vec<f64>,
    pub sims: Vec<f64>,
    pub s: f64,
    pub sd_r: f64,
}

/// Sorts outputs ascending (stable) and scores each adjacent pair:
/// `r = 1 - d / (s * sd)` while `d <= s * sd`, otherwise 0, with `sd` the
/// population standard deviation of the gaps. When every gap is equal the
/// pairs are all 1 for a zero gap and all 0 otherwise.
pub fn similarity_series(outputs: &[f64], s: f64) -> Result<SimilaritySeries, FuzzyError> {
    if outputs.len() < 2 {
        return Err(FuzzyError::TooFewOutputs(outputs.len()));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(FuzzyError::BadShape(s));
    }
    if let Some(v) = outputs.iter().find(|v| !v.is_finite()) {
        return Err(FuzzyError::NonFinite(*v));
    }
    let mut order: Vec<usize> = (0..outputs.len()).collect();
    order.sort_by(|&a, &b| outputs[a].total_cmp(&outputs[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| outputs[i]).collect();
    let diffs: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let sd = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sims = diffs
        .iter()
        .map(|&d| {
            if sd == 0.0 {
                if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else if d <= s * sd {
                1.0 - d / (s * sd)
            } else {
                0.0
            }
        })
        .collect();
    Ok(SimilaritySeries {
        sorted_outputs: sorted,
        order,
        diffs,
        sims,
        s,
        sd_r: sd,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMember {
    /// Index into the original output list.
    pub index: usize,
    pub value: f64,
    pub membership: f64,
}

/// A contiguous run `[start, end]` of the sorted outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputCluster {
    /// 1-based, ascending with output value.
    pub id: usize,
    pub start: usize,
    pub end: usize,
    pub members: Vec<ClusterMember>,
}

impl OutputCluster {
    /// Mean of the member values that reach the highest membership,
    /// snapped to the nearest productivity level.
    pub fn class(&self) -> ProductivityLevel {
        let top = self
            .members
            .iter()
            .map(|m| m.membership)
            .fold(f64::NEG_INFINITY, f64::max);
        let maxima: Vec<f64> = self
            .members
            .iter()
            .filter(|m| m.membership == top)
            .map(|m| m.value)
            .collect();
        ProductivityLevel::from_score(maxima.iter().sum::<f64>() / maxima.len() as f64)
    }
}

/// Splits the sorted outputs wherever adjacent similarity is `<= mu`.
pub fn cluster_outputs(series: &SimilaritySeries, mu: f64) -> Result<Vec<OutputCluster>, FuzzyError> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(FuzzyError::BadMu(mu));
    }
    let n = series.sorted_outputs.len();
    let mut clusters = Vec::new();
    let mut start = 0;
    for m in 0..n {
        if m + 1 == n || series.sims[m] <= mu {
            let cluster = OutputCluster {
                id: clusters.len() + 1,
                start,
                end: m,
                members: (start..=m)
                    .map(|p| ClusterMember {
                        index: series.order[p],
                        value: series.sorted_outputs[p],
                        membership: 1.0,
                    })
                    .collect(),
            };
            clusters.push(output_memberships(cluster, series));
            start = m + 1;
        }
    }
    Ok(clusters)
}

/// Both end members take the minimum similarity inside the run; interior
/// members and singletons keep 1.
pub fn output_memberships(mut cluster: OutputCluster, series: &SimilaritySeries) -> OutputCluster {
    if cluster.end > cluster.start {
        let rho = series.sims[cluster.start..cluster.end]
            .iter()
            .copied()
            .fold(1.0, f64::min);
        let last = cluster.members.len() - 1;
        for (i, m) in cluster.members.iter_mut().enumerate() {
            m.membership = if i == 0 || i == last { rho } else { 1.0 };
        }
    }
    cluster
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriangularMf {
    pub j: f64,
    pub k: f64,
    pub l: f64,
}

/// One triangle per distinct value, all with half-width equal to the
/// smallest gap between neighbouring distinct values.
pub fn init_input_mfs(values: &[f64]) -> Result<Vec<TriangularMf>, FuzzyError> {
    if values.is_empty() {
        return Err(FuzzyError::Empty);
    }
    let distinct = distinct_sorted(values)?;
    if distinct.len() < 2 {
        return Err(FuzzyError::NoUnit);
    }
    let unit = distinct
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min);
    Ok(triangles(&distinct, unit))
}

fn distinct_sorted(values: &[f64]) -> Result<Vec<f64>, FuzzyError> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(FuzzyError::NonFinite(*v));
    }
    let mut d = values.to_vec();
    d.sort_by(f64::total_cmp);
    d.dedup();
    Ok(d)
}

fn triangles(centers: &[f64], unit: f64) -> Vec<TriangularMf> {
    centers
        .iter()
        .map(|&k| TriangularMf {
            j: k - unit,
            k,
            l: k + unit,
        })
        .collect()
}

/// Linguistic term; a trapezoid `(a, b, c, d)` that is 1 on `[b, c]`.
/// A triangle is the case `b == c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub label: String,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Term {
    pub fn from_triangle(label: String, t: TriangularMf) -> Self {
        Self {
            label,
            a: t.j,
            b: t.k,
            c: t.k,
            d: t.l,
        }
    }

    pub fn membership(&self, x: f64) -> f64 {
        if x.is_nan() {
            0.0
        } else if x >= self.b && x <= self.c {
            1.0
        } else if x <= self.a || x >= self.d {
            0.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }

    /// Widened term covering `self` followed by its right neighbour.
    fn merged_with(&self, right: &Term) -> Term {
        Term {
            label: format!("{}|{}", self.label, right.label),
            a: self.a,
            b: self.b,
            c: right.c,
            d: right.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotEntry {
    /// Output cluster id.
    pub cluster: usize,
    pub membership: f64,
}

/// Sparse multi-dimensional table: one dimension per input attribute, one
/// position per linguistic term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTable {
    pub dims: Vec<Vec<Term>>,
    #[serde(with = "slot_list")]
    pub slots: BTreeMap<Vec<usize>, SlotEntry>,
}

mod slot_list {
    use super::SlotEntry;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};
    use std::collections::BTreeMap;

    #[derive(Serialize, Deserialize)]
    struct Slot {
        position: Vec<usize>,
        cluster: usize,
        membership: f64,
    }

    pub fn serialize<S: Serializer>(
        slots: &BTreeMap<Vec<usize>, SlotEntry>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let list: Vec<Slot> = slots
            .iter()
            .map(|(p, e)| Slot {
                position: p.clone(),
                cluster: e.cluster,
                membership: e.membership,
            })
            .collect();
        list.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<Vec<usize>, SlotEntry>, D::Error> {
        let list = Vec::<Slot>::deserialize(de)?;
        Ok(list
            .into_iter()
            .map(|s| {
                (
                    s.position,
                    SlotEntry {
                        cluster: s.cluster,
                        membership: s.membership,
                    },
                )
            })
            .collect())
    }
}

/// Index of the strongest term for `x`; ties go to the lower index.
fn best_term(terms: &[Term], x: f64) -> (usize, f64) {
    terms
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, t)| {
            let m = t.membership(x);
            if m > best.1 {
                (i, m)
            } else {
                best
            }
        })
}

/// Places each instance at its strongest-term position and keeps, per slot,
/// the entry with the largest output membership (lower cluster id on ties).
pub fn build_decision_table(
    inputs: &[Vec<f64>],
    dims: Vec<Vec<Term>>,
    entries: &[SlotEntry],
) -> DecisionTable {
    assert_eq!(inputs.len(), entries.len());
    let mut slots: BTreeMap<Vec<usize>, SlotEntry> = BTreeMap::new();
    for (x, entry) in inputs.iter().zip(entries) {
        let pos: Vec<usize> = x
            .iter()
            .zip(&dims)
            .map(|(&v, terms)| best_term(terms, v).0)
            .collect();
        slots
            .entry(pos)
            .and_modify(|e| {
                if entry.membership > e.membership
                    || (entry.membership == e.membership && entry.cluster < e.cluster)
                {
                    *e = *entry;
                }
            })
            .or_insert(*entry);
    }
    DecisionTable { dims, slots }
}

/// Slots whose coordinate `dim` equals `idx`, keyed by the other coordinates.
fn line(table: &DecisionTable, dim: usize, idx: usize) -> BTreeMap<Vec<usize>, SlotEntry> {
    table
        .slots
        .iter()
        .filter(|(p, _)| p[dim] == idx)
        .map(|(p, e)| {
            let mut rest = p.clone();
            rest.remove(dim);
            (rest, *e)
        })
        .collect()
}

fn mergeable(left: &BTreeMap<Vec<usize>, SlotEntry>, right: &BTreeMap<Vec<usize>, SlotEntry>) -> bool {
    if left.is_empty() || right.is_empty() {
        return false;
    }
    left.iter()
        .all(|(k, e)| right.get(k).is_none_or(|r| r.cluster == e.cluster))
}

fn merge_lines(table: &mut DecisionTable, dim: usize, idx: usize) {
    let merged = table.dims[dim][idx].merged_with(&table.dims[dim][idx + 1]);
    table.dims[dim].splice(idx..=idx + 1, [merged]);
    let old = std::mem::take(&mut table.slots);
    for (mut pos, entry) in old {
        if pos[dim] > idx {
            pos[dim] -= 1;
        }
        table
            .slots
            .entry(pos)
            .and_modify(|e| {
                if entry.membership > e.membership {
                    e.membership = entry.membership;
                }
            })
            .or_insert(entry);
    }
}

/// Merges adjacent lines that agree wherever both are filled (identical
/// lines are the special case with no empty-vs-filled slots), scanning
/// dimensions and positions in order and restarting after every merge.
pub fn simplify_table(mut table: DecisionTable) -> DecisionTable {
    'outer: loop {
        for dim in 0..table.dims.len() {
            for idx in 0..table.dims[dim].len().saturating_sub(1) {
                if mergeable(&line(&table, dim, idx), &line(&table, dim, idx + 1)) {
                    merge_lines(&mut table, dim, idx);
                    continue 'outer;
                }
            }
        }
        return table;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyRule {
    /// Term index per attribute.
    pub antecedents: Vec<usize>,
    pub consequent: usize,
}

/// One rule per filled slot, in position order.
pub fn derive_rules(table: &DecisionTable) -> Vec<FuzzyRule> {
    table
        .slots
        .iter()
        .map(|(p, e)| FuzzyRule {
            antecedents: p.clone(),
            consequent: e.cluster,
        })
        .collect()
}

/// Min-AND firing strength of every rule for an encoded query.
pub fn firing_strengths(rules: &[FuzzyRule], dims: &[Vec<Term>], query: &[f64]) -> Vec<f64> {
    rules
        .iter()
        .map(|r| {
            r.antecedents
                .iter()
                .zip(dims)
                .zip(query)
                .map(|((&t, terms), &x)| terms[t].membership(x))
                .fold(1.0, f64::min)
        })
        .collect()
}

/// Cluster of the strongest-firing rule; ties go to the lowest cluster id.
pub fn infer(rules: &[FuzzyRule], dims: &[Vec<Term>], query: &[f64]) -> Result<usize, FuzzyError> {
    if rules.is_empty() {
        return Err(FuzzyError::NoRules);
    }
    if query.len() != dims.len() {
        return Err(FuzzyError::Arity {
            expected: dims.len(),
            actual: query.len(),
        });
    }
    let strengths = firing_strengths(rules, dims, query);
    let (best, strength) = rules
        .iter()
        .zip(&strengths)
        .fold((usize::MAX, 0.0), |(c, s), (r, &f)| {
            if f > s || (f == s && f > 0.0 && r.consequent < c) {
                (r.consequent, f)
            } else {
                (c, s)
            }
        });
    if strength <= 0.0 {
        return Err(FuzzyError::NoMatchingRule);
    }
    Ok(best)
}

/// How one input attribute is encoded as a real number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    Numeric,
    /// Token position in this list.
    Categorical { tokens: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub id: usize,
    pub min: f64,
    pub max: f64,
    pub class: ProductivityLevel,
}

/// A trained model: attribute encodings, the simplified table with its
/// terms, and the derived rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyModel {
    pub params: FuzzyParams,
    pub attributes: Vec<String>,
    pub encodings: Vec<Encoding>,
    pub clusters: Vec<ClusterSummary>,
    pub table: DecisionTable,
    pub rules: Vec<FuzzyRule>,
}

/// Intermediate products of training, kept for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct Induction {
    pub series: SimilaritySeries,
    pub clusters: Vec<OutputCluster>,
    pub initial_table: DecisionTable,
    pub model: FuzzyModel,
}

impl FuzzyModel {
    pub fn train(tid: &TrainingInstanceDataset, params: FuzzyParams) -> Result<Self, FuzzyError> {
        Ok(induce(tid, params)?.model)
    }

    /// Encodes a query; unseen tokens map to NaN, which no term covers.
    pub fn encode(&self, features: &[Feature]) -> Result<Vec<f64>, FuzzyError> {
        if features.len() != self.encodings.len() {
            return Err(FuzzyError::Arity {
                expected: self.encodings.len(),
                actual: features.len(),
            });
        }
        features
            .iter()
            .zip(&self.encodings)
            .enumerate()
            .map(|(i, (f, enc))| match (f, enc) {
                (Feature::Numeric(v), Encoding::Numeric) => Ok(*v),
                (Feature::Categorical(t), Encoding::Categorical { tokens }) => Ok(tokens
                    .iter()
                    .position(|x| x == t)
                    .map_or(f64::NAN, |p| p as f64)),
                _ => Err(FuzzyError::KindMismatch(i)),
            })
            .collect()
    }

    pub fn infer_cluster(&self, features: &[Feature]) -> Result<usize, FuzzyError> {
        infer(&self.rules, &self.table.dims, &self.encode(features)?)
    }

    pub fn classify(&self, features: &[Feature]) -> Result<ProductivityLevel, FuzzyError> {
        let id = self.infer_cluster(features)?;
        Ok(self.clusters[id - 1].class)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Runs the full induction on a training set whose labels are scored
/// E = 1 through A = 5.
pub fn induce(tid: &TrainingInstanceDataset, params: FuzzyParams) -> Result<Induction, FuzzyError> {
    params.validate()?;
    let outputs: Vec<f64> = tid.instances.iter().map(|i| i.label.score() as f64).collect();
    let series = similarity_series(&outputs, params.s)?;
    let clusters = cluster_outputs(&series, params.mu)?;

    let mut entries = vec![
        SlotEntry {
            cluster: 0,
            membership: 0.0
        };
        outputs.len()
    ];
    for c in &clusters {
        for m in &c.members {
            entries[m.index] = SlotEntry {
                cluster: c.id,
                membership: m.membership,
            };
        }
    }

    let mut encodings = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (f, kind) in tid.kinds.iter().enumerate() {
        match kind {
            FeatureKind::Numeric { .. } => {
                encodings.push(Encoding::Numeric);
                columns.push(
                    tid.instances
                        .iter()
                        .map(|i| match &i.features[f] {
                            Feature::Numeric(v) => Ok(*v),
                            Feature::Categorical(_) => Err(FuzzyError::KindMismatch(f)),
                        })
                        .collect::<Result<_, _>>()?,
                );
            }
            FeatureKind::Categorical => {
                let mut tokens: Vec<String> = Vec::new();
                let mut col = Vec::new();
                for i in &tid.instances {
                    let Feature::Categorical(t) = &i.features[f] else {
                        return Err(FuzzyError::KindMismatch(f));
                    };
                    let p = tokens.iter().position(|x| x == t).unwrap_or_else(|| {
                        tokens.push(t.clone());
                        tokens.len() - 1
                    });
                    col.push(p as f64);
                }
                encodings.push(Encoding::Categorical { tokens });
                columns.push(col);
            }
        }
    }

    let mut dims = Vec::new();
    for (col, enc) in columns.iter().zip(&encodings) {
        let mfs = match init_input_mfs(col) {
            Ok(mfs) => mfs,
            Err(FuzzyError::NoUnit) => triangles(&distinct_sorted(col)?, 1.0),
            Err(e) => return Err(e),
        };
        let terms = mfs
            .into_iter()
            .map(|t| {
                let label = match enc {
                    Encoding::Numeric => format!("{}", t.k),
                    Encoding::Categorical { tokens } => tokens[t.k as usize].clone(),
                };
                Term::from_triangle(label, t)
            })
            .collect();
        dims.push(terms);
    }

    let inputs: Vec<Vec<f64>> = (0..outputs.len())
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    let initial_table = build_decision_table(&inputs, dims, &entries);
    let table = simplify_table(initial_table.clone());
    let rules = derive_rules(&table);
    let model = FuzzyModel {
        params,
        attributes: tid.feature_names.clone(),
        encodings,
        clusters: clusters
            .iter()
            .map(|c| ClusterSummary {
                id: c.id,
                min: series.sorted_outputs[c.start],
                max: series.sorted_outputs[c.end],
                class: c.class(),
            })
            .collect(),
        table,
        rules,
    };
    Ok(Induction {
        series,
        clusters,
        initial_table,
        model,
    })
}
