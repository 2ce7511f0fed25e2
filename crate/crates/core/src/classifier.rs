//! K-nearest-neighbour classification of crop records into productivity
//! levels.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifierError {
    #[error("training set is empty")]
    EmptyTid,
    #[error("k must be at least 1")]
    ZeroK,
    #[error("k = {k} exceeds the {n} training instances")]
    KTooLarge { k: usize, n: usize },
    #[error("feature arity mismatch: expected {expected}, got {actual}")]
    Arity { expected: usize, actual: usize },
    #[error("feature {0} mixes numeric and categorical values")]
    KindMismatch(usize),
    #[error("unknown productivity level {0:?}")]
    UnknownLevel(String),
    #[error("bad numeric value {0:?}")]
    BadNumber(String),
    #[error("csv: {0}")]
    Csv(String),
    #[error("line {line}, field {field:?}: {message}")]
    Field { line: u64, field: String, message: String },
}

/// Five-step ordinal productivity scale; `A` is the highest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProductivityLevel {
    A,
    B,
    C,
    D,
    E,
}

impl ProductivityLevel {
    pub const ALL: [ProductivityLevel; 5] = [Self::A, Self::B, Self::C, Self::D, Self::E];

    pub fn letter(self) -> char {
        match self {
            Self::A => 'A',
            Self::B => 'B',
            Self::C => 'C',
            Self::D => 'D',
            Self::E => 'E',
        }
    }

    /// Ordinal score, 5 for `A` down to 1 for `E`.
    pub fn score(self) -> u8 {
        5 - self as u8
    }

    /// Nearest level to a real-valued score; halves resolve to the lower level.
    pub fn from_score(score: f64) -> Self {
        let s = (score - 0.5).ceil().clamp(1.0, 5.0) as u8;
        Self::ALL[(5 - s) as usize]
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::A => "Very High Productivity",
            Self::B => "High Productivity",
            Self::C => "Medium Productivity",
            Self::D => "Low Productivity",
            Self::E => "Very Low Productivity",
        }
    }
}

impl Ord for ProductivityLevel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.score().cmp(&other.score())
    }
}

impl PartialOrd for ProductivityLevel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ProductivityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for ProductivityLevel {
    type Err = ClassifierError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            "D" => Ok(Self::D),
            "E" => Ok(Self::E),
            _ => Err(ClassifierError::UnknownLevel(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Feature {
    Numeric(f64),
    Categorical(String),
}

/// Parses a number or a range such as `21-27 °C`; ranges become their
/// midpoint. Returns `None` for anything else.
pub fn parse_numeric(cell: &str) -> Option<f64> {
    let body = cell
        .trim()
        .trim_end_matches("°C")
        .trim_end_matches('C')
        .trim_end_matches('°')
        .trim();
    if let Ok(v) = body.parse::<f64>() {
        return v.is_finite().then_some(v);
    }
    // Skip a leading sign so "-5-3" splits after the first number.
    let split = body
        .char_indices()
        .skip(1)
        .find(|&(_, c)| c == '-' || c == '–')
        .map(|(i, c)| (i, c.len_utf8()))?;
    let lo: f64 = body[..split.0].trim().parse().ok()?;
    let hi: f64 = body[split.0 + split.1..].trim().parse().ok()?;
    let mid = (lo + hi) / 2.0;
    mid.is_finite().then_some(mid)
}

/// Value kind of one feature column, with the range used for scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FeatureKind {
    Numeric { min: f64, max: f64 },
    Categorical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub features: Vec<Feature>,
    pub label: ProductivityLevel,
}

/// Labeled training instances sharing one feature layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingInstanceDataset {
    pub feature_names: Vec<String>,
    pub kinds: Vec<FeatureKind>,
    pub instances: Vec<Instance>,
}

pub const TID_FEATURES: [&str; 6] = [
    "Crop Name",
    "Temperature",
    "Soil Texture",
    "Season",
    "Pesticide",
    "Fertilizer",
];

impl TrainingInstanceDataset {
    /// Builds a dataset, deriving each column's kind and numeric range from
    /// the instances.
    pub fn new(feature_names: Vec<String>, instances: Vec<Instance>) -> Result<Self, ClassifierError> {
        if instances.is_empty() {
            return Err(ClassifierError::EmptyTid);
        }
        let t = feature_names.len();
        for inst in &instances {
            if inst.features.len() != t {
                return Err(ClassifierError::Arity {
                    expected: t,
                    actual: inst.features.len(),
                });
            }
        }
        let mut kinds = Vec::with_capacity(t);
        for f in 0..t {
            let numeric: Vec<f64> = instances
                .iter()
                .filter_map(|i| match i.features[f] {
                    Feature::Numeric(v) => Some(v),
                    Feature::Categorical(_) => None,
                })
                .collect();
            kinds.push(if numeric.is_empty() {
                FeatureKind::Categorical
            } else if numeric.len() == instances.len() {
                FeatureKind::Numeric {
                    min: numeric.iter().copied().fold(f64::INFINITY, f64::min),
                    max: numeric.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                }
            } else {
                return Err(ClassifierError::KindMismatch(f));
            });
        }
        Ok(Self {
            feature_names,
            kinds,
            instances,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    /// Interprets raw cells according to this dataset's column kinds.
    pub fn parse_query(&self, cells: &[&str]) -> Result<Vec<Feature>, ClassifierError> {
        if cells.len() != self.kinds.len() {
            return Err(ClassifierError::Arity {
                expected: self.kinds.len(),
                actual: cells.len(),
            });
        }
        cells
            .iter()
            .zip(&self.kinds)
            .map(|(cell, kind)| match kind {
                FeatureKind::Numeric { .. } => parse_numeric(cell)
                    .map(Feature::Numeric)
                    .ok_or_else(|| ClassifierError::BadNumber(cell.to_string())),
                FeatureKind::Categorical => Ok(Feature::Categorical(cell.trim().to_string())),
            })
            .collect()
    }

    /// Reads a CSV whose last column is the productivity label. A column is
    /// numeric when every cell parses as a number or a numeric range.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, ClassifierError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let csv_err = |e: csv::Error| ClassifierError::Csv(e.to_string());
        let header: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        if header.len() < 2 {
            return Err(ClassifierError::Csv("need at least one feature and a label".into()));
        }
        let t = header.len() - 1;
        let mut rows: Vec<Vec<String>> = Vec::new();
        let mut lines: Vec<u64> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            lines.push(rec.position().map_or(0, |p| p.line()));
            rows.push(rec.iter().map(str::to_string).collect());
        }
        let numeric: Vec<bool> = (0..t)
            .map(|f| !rows.is_empty() && rows.iter().all(|r| parse_numeric(&r[f]).is_some()))
            .collect();
        let mut instances = Vec::with_capacity(rows.len());
        for (r, &line) in rows.iter().zip(&lines) {
            let features = (0..t)
                .map(|f| {
                    if numeric[f] {
                        Feature::Numeric(parse_numeric(&r[f]).expect("checked"))
                    } else {
                        Feature::Categorical(r[f].clone())
                    }
                })
                .collect();
            instances.push(Instance {
                features,
                label: r[t].parse().map_err(|e: ClassifierError| ClassifierError::Field {
                    line,
                    field: header[t].clone(),
                    message: e.to_string(),
                })?,
            });
        }
        Self::new(header[..t].to_vec(), instances)
    }
}

/// Range-normalized L1 over numeric features plus 0/1 mismatch over
/// categorical ones. A zero-width range scales by 1.
pub fn distance(a: &[Feature], b: &[Feature], kinds: &[FeatureKind]) -> Result<f64, ClassifierError> {
    if a.len() != b.len() || a.len() != kinds.len() {
        return Err(ClassifierError::Arity {
            expected: kinds.len(),
            actual: if a.len() != kinds.len() { a.len() } else { b.len() },
        });
    }
    let mut d = 0.0;
    for (f, ((x, y), kind)) in a.iter().zip(b).zip(kinds).enumerate() {
        d += match (x, y, kind) {
            (Feature::Numeric(x), Feature::Numeric(y), FeatureKind::Numeric { min, max }) => {
                let width = if max > min { max - min } else { 1.0 };
                (x - y).abs() / width
            }
            (Feature::Categorical(x), Feature::Categorical(y), FeatureKind::Categorical) => {
                if x == y {
                    0.0
                } else {
                    1.0
                }
            }
            _ => return Err(ClassifierError::KindMismatch(f)),
        };
    }
    Ok(d)
}

/// Majority label among the `k` nearest instances.
///
/// Every instance tied with the k-th smallest distance joins the
/// neighbourhood. A tied vote goes to the label whose closest member is
/// nearest, then to the earliest letter.
pub fn knn_classify(
    query: &[Feature],
    tid: &TrainingInstanceDataset,
    k: usize,
) -> Result<ProductivityLevel, ClassifierError> {
    if tid.is_empty() {
        return Err(ClassifierError::EmptyTid);
    }
    if k == 0 {
        return Err(ClassifierError::ZeroK);
    }
    if k > tid.len() {
        return Err(ClassifierError::KTooLarge { k, n: tid.len() });
    }
    let mut scored: Vec<(f64, ProductivityLevel)> = tid
        .instances
        .iter()
        .map(|i| Ok((distance(query, &i.features, &tid.kinds)?, i.label)))
        .collect::<Result<_, ClassifierError>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));
    let cutoff = scored[k - 1].0;

    // label -> (votes, nearest distance)
    let mut votes: BTreeMap<char, (usize, f64, ProductivityLevel)> = BTreeMap::new();
    for &(d, label) in scored.iter().take_while(|(d, _)| *d <= cutoff) {
        let e = votes.entry(label.letter()).or_insert((0, d, label));
        e.0 += 1;
        e.1 = e.1.min(d);
    }
    let best = votes
        .values()
        .min_by(|a, b| {
            b.0.cmp(&a.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.letter().cmp(&b.2.letter()))
        })
        .expect("at least one neighbour");
    Ok(best.2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cat(s: &str) -> Feature {
        Feature::Categorical(s.into())
    }

    fn tid(rows: Vec<(Vec<Feature>, ProductivityLevel)>) -> TrainingInstanceDataset {
        let t = rows[0].0.len();
        TrainingInstanceDataset::new(
            (0..t).map(|i| format!("f{i}")).collect(),
            rows.into_iter()
                .map(|(features, label)| Instance { features, label })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn level_order_and_scores() {
        use ProductivityLevel::*;
        assert!(A > B && B > C && C > D && D > E);
        assert_eq!(A.score(), 5);
        assert_eq!(E.score(), 1);
        assert_eq!(ProductivityLevel::from_score(3.5), C);
        assert_eq!(ProductivityLevel::from_score(3.51), B);
        assert_eq!(ProductivityLevel::from_score(0.2), E);
        assert_eq!("c".parse::<ProductivityLevel>().unwrap(), C);
    }

    #[test]
    fn temperature_ranges_become_midpoints() {
        assert_eq!(parse_numeric("21-27 °C"), Some(24.0));
        assert_eq!(parse_numeric("21–27 °C"), Some(24.0));
        assert_eq!(parse_numeric("18 °C"), Some(18.0));
        assert_eq!(parse_numeric("-4-2"), Some(-1.0));
        assert_eq!(parse_numeric("Urea"), None);
    }

    #[test]
    fn distance_cases() {
        let kinds = vec![FeatureKind::Numeric { min: 0.0, max: 10.0 }, FeatureKind::Categorical];
        let a = vec![Feature::Numeric(2.0), cat("x")];
        assert_eq!(distance(&a, &a, &kinds).unwrap(), 0.0);
        let b = vec![Feature::Numeric(2.0), cat("y")];
        assert_eq!(distance(&a, &b, &kinds).unwrap(), 1.0);
        let c = vec![Feature::Numeric(7.0), cat("y")];
        assert_eq!(distance(&a, &c, &kinds).unwrap(), 1.5);
        assert!(distance(&a, &a[..1], &kinds).is_err());
    }

    #[test]
    fn k1_exact_match() {
        use ProductivityLevel::*;
        let t = tid(vec![(vec![cat("a")], A), (vec![cat("b")], D)]);
        assert_eq!(knn_classify(&[cat("b")], &t, 1).unwrap(), D);
    }

    #[test]
    fn tied_kth_distance_expands_neighbourhood() {
        use ProductivityLevel::*;
        // query "q" is distance 1 from everything, so k=1 sees all three.
        let t = tid(vec![(vec![cat("a")], E), (vec![cat("b")], B), (vec![cat("c")], B)]);
        assert_eq!(knn_classify(&[cat("q")], &t, 1).unwrap(), B);
    }

    #[test]
    fn vote_tie_goes_to_letter() {
        use ProductivityLevel::*;
        let t = tid(vec![(vec![cat("a")], D), (vec![cat("b")], B)]);
        assert_eq!(knn_classify(&[cat("q")], &t, 2).unwrap(), B);
    }

    #[test]
    fn errors() {
        use ProductivityLevel::*;
        let t = tid(vec![(vec![cat("a")], D)]);
        assert_eq!(knn_classify(&[cat("a")], &t, 0), Err(ClassifierError::ZeroK));
        assert!(knn_classify(&[cat("a")], &t, 2).is_err());
    }

    #[test]
    fn reads_tid_csv() {
        let text = "Crop Name,Temperature,Soil Texture,Season,Pesticide,Fertilizer,Productivity\n\
                    Soybean,21-27 °C,Silty Loam Clay,Winter,Organochlorine,Urea,C\n\
                    Rice,30 °C,Clay,Kharif,Carbamate,DAP,A\n";
        let t = TrainingInstanceDataset::from_csv(text.as_bytes()).unwrap();
        assert_eq!(t.kinds[1], FeatureKind::Numeric { min: 24.0, max: 30.0 });
        assert_eq!(t.kinds[0], FeatureKind::Categorical);
        let q = t
            .parse_query(&["Soybean", "21–27 °C", "Silty Loam Clay", "Winter", "Organochlorine", "Urea"])
            .unwrap();
        assert_eq!(knn_classify(&q, &t, 1).unwrap(), ProductivityLevel::C);
    }
}
