use agrisim_core::classifier::{
    knn_classify, parse_numeric, Feature, Instance, ProductivityLevel, TrainingInstanceDataset,
};
use agrisim_core::fuzzy::{
    cluster_outputs, derive_rules, firing_strengths, infer, init_input_mfs, similarity_series, simplify_table,
    FuzzyError, FuzzyModel, FuzzyParams, Term, TriangularMf,
};
use proptest::prelude::*;

const TID: &str = include_str!("../data/tid.csv");
const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/tid_model.json");

fn tid() -> TrainingInstanceDataset {
    TrainingInstanceDataset::from_csv(TID.as_bytes()).unwrap()
}

#[test]
fn temperature_ranges_parse_to_midpoints() {
    assert_eq!(parse_numeric("21-27 °C"), Some(24.0));
    assert_eq!(parse_numeric("21–27 °C"), Some(24.0));
    assert_eq!(parse_numeric("-5-3"), Some(-1.0));
    assert_eq!(parse_numeric("Loam"), None);
}

#[test]
fn knn_answers_training_rows() {
    let t = tid();
    for inst in &t.instances {
        assert_eq!(knn_classify(&inst.features, &t, 1).unwrap(), inst.label);
    }
    let q = t
        .parse_query(&["Soybean", "21-27 °C", "Silty Loam Clay", "Winter", "Organochlorine", "Urea"])
        .unwrap();
    assert_eq!(knn_classify(&q, &t, 1).unwrap(), ProductivityLevel::C);
    assert!(knn_classify(&q, &t, 0).is_err());
    assert!(knn_classify(&q, &t, t.len() + 1).is_err());
}

#[test]
fn fuzzy_model_answers_training_rows() {
    let t = tid();
    let model = FuzzyModel::train(&t, FuzzyParams::default()).unwrap();
    for inst in &t.instances {
        let id = model.infer_cluster(&inst.features).unwrap();
        let c = &model.clusters[id - 1];
        let score = inst.label.score() as f64;
        assert!(c.min <= score && score <= c.max, "{inst:?} landed in {c:?}");
    }
}

#[test]
fn unknown_token_matches_no_rule() {
    let t = tid();
    let model = FuzzyModel::train(&t, FuzzyParams::default()).unwrap();
    let q = t
        .parse_query(&["Quinoa", "21-27 °C", "Silty Loam Clay", "Winter", "Organochlorine", "Urea"])
        .unwrap();
    assert!(matches!(model.classify(&q), Err(FuzzyError::NoMatchingRule)));
}

#[test]
fn model_json_matches_golden_file() {
    let json = FuzzyModel::train(&tid(), FuzzyParams::default()).unwrap().to_json();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(std::path::Path::new(GOLDEN).parent().unwrap()).unwrap();
        std::fs::write(GOLDEN, &json).unwrap();
    }
    let golden = std::fs::read_to_string(GOLDEN).expect("golden model file; regenerate with UPDATE_GOLDEN=1");
    assert_eq!(json, golden);
    let back: FuzzyModel = serde_json::from_str(&golden).unwrap();
    assert_eq!(back, FuzzyModel::train(&tid(), FuzzyParams::default()).unwrap());
}

#[test]
fn worked_unit_example() {
    let mfs = init_input_mfs(&[10.0, 20.0, 30.0]).unwrap();
    let want = [(0.0, 10.0, 20.0), (10.0, 20.0, 30.0), (20.0, 30.0, 40.0)];
    for (m, w) in mfs.iter().zip(want) {
        assert_eq!((m.j, m.k, m.l), w);
    }
    assert_eq!(init_input_mfs(&[2.0, 5.0, 6.0]).unwrap()[0].l, 3.0);
    assert!(matches!(init_input_mfs(&[4.0, 4.0]), Err(FuzzyError::NoUnit)));
}

#[test]
fn doubling_series_by_hand() {
    // Gaps 1, 2, 4: mean 7/3, population sd sqrt(14/9 - ... ) computed below.
    let s = similarity_series(&[1.0, 2.0, 4.0, 8.0], 1.0).unwrap();
    let mean = 7.0 / 3.0;
    let sd = (((1.0 - mean) * (1.0 - mean) + (2.0 - mean) * (2.0 - mean) + (4.0 - mean) * (4.0 - mean)) / 3.0f64).sqrt();
    let want: Vec<f64> = [1.0, 2.0, 4.0]
        .iter()
        .map(|d| if *d <= sd { 1.0 - d / sd } else { 0.0 })
        .collect();
    for (a, b) in s.sims.iter().zip(&want) {
        assert!((a - b).abs() < 1e-12);
    }
}

fn level() -> impl Strategy<Value = ProductivityLevel> {
    (0usize..5).prop_map(|i| ProductivityLevel::ALL[i])
}

fn dataset() -> impl Strategy<Value = TrainingInstanceDataset> {
    proptest::collection::vec(((0u8..4), (0u8..3), level()), 2..12).prop_map(|rows| {
        let instances = rows
            .into_iter()
            .map(|(a, b, l)| Instance {
                features: vec![
                    Feature::Numeric(a as f64 * 5.0),
                    Feature::Categorical(["x", "y", "z"][b as usize].to_string()),
                ],
                label: l,
            })
            .collect();
        TrainingInstanceDataset::new(vec!["n".into(), "c".into()], instances).unwrap()
    })
}

proptest! {
    #[test]
    fn similarities_in_unit_interval(outputs in proptest::collection::vec(0.0f64..100.0, 2..20), s in 0.1f64..4.0) {
        let series = similarity_series(&outputs, s).unwrap();
        for (d, r) in series.diffs.iter().zip(&series.sims) {
            prop_assert!((0.0..=1.0).contains(r));
            if *d == 0.0 {
                prop_assert_eq!(*r, 1.0);
            }
        }
    }

    #[test]
    fn cluster_count_grows_with_mu(outputs in proptest::collection::vec(1u8..=5, 2..20), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let vals: Vec<f64> = outputs.iter().map(|&v| v as f64).collect();
        let series = similarity_series(&vals, 1.0).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(cluster_outputs(&series, lo).unwrap().len() <= cluster_outputs(&series, hi).unwrap().len());
    }

    #[test]
    fn clustering_ignores_input_order(outputs in proptest::collection::vec(1u8..=5, 2..20), mu in 0.0f64..=1.0) {
        let vals: Vec<f64> = outputs.iter().map(|&v| v as f64).collect();
        let rev: Vec<f64> = vals.iter().rev().copied().collect();
        let a = cluster_outputs(&similarity_series(&vals, 1.0).unwrap(), mu).unwrap();
        let b = cluster_outputs(&similarity_series(&rev, 1.0).unwrap(), mu).unwrap();
        let shape = |cs: &Vec<agrisim_core::fuzzy::OutputCluster>| -> Vec<(usize, usize)> {
            cs.iter().map(|c| (c.start, c.end)).collect()
        };
        prop_assert_eq!(shape(&a), shape(&b));
    }

    #[test]
    fn triangle_shape(j in -50.0f64..50.0, w1 in 0.1f64..20.0, w2 in 0.1f64..20.0) {
        let t = Term::from_triangle("t".into(), TriangularMf { j, k: j + w1, l: j + w1 + w2 });
        prop_assert_eq!(t.membership(j + w1), 1.0);
        prop_assert_eq!(t.membership(j), 0.0);
        prop_assert_eq!(t.membership(j + w1 + w2), 0.0);
        prop_assert!((t.membership(j + w1 / 2.0) - 0.5).abs() < 1e-9);
        prop_assert!((t.membership(j + w1 + w2 / 2.0) - 0.5).abs() < 1e-9);
    }

    #[test]
    fn simplification_keeps_training_answers(t in dataset()) {
        let Ok(ind) = agrisim_core::fuzzy::induce(&t, FuzzyParams::default()) else {
            return Ok(());
        };
        let before_rules = derive_rules(&ind.initial_table);
        let simplified = simplify_table(ind.initial_table.clone());
        let after_rules = derive_rules(&simplified);
        prop_assert_eq!(after_rules.len(), simplified.slots.len());
        for inst in &t.instances {
            let x = ind.model.encode(&inst.features).unwrap();
            let before = infer(&before_rules, &ind.initial_table.dims, &x);
            let after = infer(&after_rules, &simplified.dims, &x);
            prop_assert_eq!(before.ok(), after.ok());
        }
    }

    #[test]
    fn infer_is_argmax_of_firing(t in dataset(), qa in 0.0f64..15.0, qb in 0usize..3) {
        let Ok(model) = FuzzyModel::train(&t, FuzzyParams::default()) else {
            return Ok(());
        };
        let q = vec![Feature::Numeric(qa), Feature::Categorical(["x", "y", "z"][qb].to_string())];
        let x = model.encode(&q).unwrap();
        let strengths = firing_strengths(&model.rules, &model.table.dims, &x);
        let best = strengths.iter().cloned().fold(0.0, f64::max);
        match model.infer_cluster(&q) {
            Ok(c) => {
                let want = model
                    .rules
                    .iter()
                    .zip(&strengths)
                    .filter(|(_, s)| **s == best)
                    .map(|(r, _)| r.consequent)
                    .min()
                    .unwrap();
                prop_assert!(best > 0.0);
                prop_assert_eq!(c, want);
            }
            Err(e) => {
                prop_assert!(matches!(e, FuzzyError::NoMatchingRule));
                prop_assert_eq!(best, 0.0);
            }
        }
    }

    #[test]
    fn knn_with_k_equal_n_is_plurality(t in dataset(), qa in 0.0f64..15.0) {
        let q = vec![Feature::Numeric(qa), Feature::Categorical("x".into())];
        let got = knn_classify(&q, &t, t.len()).unwrap();
        let count = |l: ProductivityLevel| t.instances.iter().filter(|i| i.label == l).count();
        let top = ProductivityLevel::ALL.iter().map(|&l| count(l)).max().unwrap();
        prop_assert_eq!(count(got), top);
    }
}
