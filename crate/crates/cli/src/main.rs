use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use agrisim_core::classifier::{knn_classify, TrainingInstanceDataset};
use agrisim_core::fuzzy::{FuzzyModel, FuzzyParams};
use agrisim_core::pipeline::{build_matrix, preprocess, read_dataset, reduce, Schema};
use agrisim_core::sim::{compare, export, simulate, threads_from_env, SimConfig, Sweep, Technique};
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(name = "agrisim", version, about = "Crop productivity models and cloud resource simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train fuzzy and K-NN models from a labelled CSV.
    Train {
        /// CSV whose last column is the productivity level (A-E).
        dataset: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        s: f64,
        #[arg(long, default_value_t = 0.5)]
        mu: f64,
        /// Neighbours used by K-NN queries.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Answer a productivity query with a trained model.
    Query {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Fuzzy)]
        method: Method,
        /// One value per attribute, in training column order.
        #[arg(required = true)]
        fields: Vec<String>,
    },
    /// Reduce an agriculture dataset with PCA.
    Reduce {
        dataset: PathBuf,
        /// Attribute schema; the bundled standard schema when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Percentage of variance to keep.
        #[arg(long, default_value_t = 90.0)]
        threshold: f64,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run one scenario.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, value_enum, default_value_t = TechniqueArg::Both)]
        technique: TechniqueArg,
    },
    /// Run both techniques over a range of workload counts.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Workload counts as start:end:step.
        #[arg(long, default_value = "500:3000:500")]
        sweep: String,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Fuzzy,
    Knn,
}

#[derive(Clone, Copy, ValueEnum)]
enum TechniqueArg {
    Autonomic,
    Baseline,
    Both,
}

impl TechniqueArg {
    fn techniques(self) -> Vec<Technique> {
        match self {
            TechniqueArg::Autonomic => vec![Technique::Autonomic],
            TechniqueArg::Baseline => vec![Technique::Baseline],
            TechniqueArg::Both => vec![Technique::Autonomic, Technique::Baseline],
        }
    }
}

/// Everything `query` needs: the fuzzy model plus the training set for K-NN.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    k: usize,
    fuzzy: FuzzyModel,
    tid: TrainingInstanceDataset,
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    scenario: Option<PathBuf>,
    seed: u64,
    out_dir: PathBuf,
    techniques: Vec<Technique>,
    workload_counts: Vec<usize>,
    timestamp_unix: u64,
    tool_version: String,
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { dataset, s, mu, k, out } => train(&dataset, FuzzyParams { s, mu }, k, &out),
        Command::Query { model, method, fields } => {
            println!("{}", query(&model, method, &fields)?);
            Ok(())
        }
        Command::Reduce {
            dataset,
            schema,
            threshold,
            out,
        } => reduce_cmd(&dataset, schema.as_deref(), threshold, &out),
        Command::Simulate { run, technique } => simulate_cmd(&run, technique),
        Command::Compare { run, sweep } => compare_cmd(&run, &sweep),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn train(dataset: &Path, params: FuzzyParams, k: usize, out: &Path) -> Result<()> {
    let file = File::open(dataset).with_context(|| format!("cannot read {}", dataset.display()))?;
    let tid = TrainingInstanceDataset::from_csv(file).with_context(|| format!("{}", dataset.display()))?;
    if k == 0 || k > tid.len() {
        bail!("k = {k} must lie in 1..={}", tid.len());
    }
    let fuzzy = FuzzyModel::train(&tid, params).context("training the fuzzy model")?;
    let text = serde_json::to_string_pretty(&ModelFile { k, fuzzy, tid })?;
    fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(())
}

fn query(model: &Path, method: Method, fields: &[String]) -> Result<String> {
    let m: ModelFile =
        serde_json::from_str(&read_text(model)?).with_context(|| format!("{}: malformed model", model.display()))?;
    let cells: Vec<&str> = fields.iter().map(String::as_str).collect();
    let q = m.tid.parse_query(&cells).context("query")?;
    let level = match method {
        Method::Fuzzy => m.fuzzy.classify(&q)?,
        Method::Knn => knn_classify(&q, &m.tid, m.k)?,
    };
    Ok(level.to_string())
}

fn reduce_cmd(dataset: &Path, schema: Option<&Path>, threshold: f64, out: &Path) -> Result<()> {
    let schema = match schema {
        Some(p) => Schema::from_json(&read_text(p)?).with_context(|| format!("{}", p.display()))?,
        None => Schema::standard(),
    };
    let file = File::open(dataset).with_context(|| format!("cannot read {}", dataset.display()))?;
    let (records, row_errors) = read_dataset(file, &schema).with_context(|| format!("{}", dataset.display()))?;
    if let Some(e) = row_errors.first() {
        // Data row n sits on line n + 1 after the header.
        bail!("{}: line {}: {}", dataset.display(), e.row + 1, e.error);
    }
    let pre = preprocess(&records, &schema);
    for r in &pre.rejected {
        eprintln!("warning: dropped record for user {:?}: {}", records[r.index].user_id, r.error);
    }
    let matrix = build_matrix(&pre.records, &schema)?;
    let red = reduce(&matrix, threshold)?;
    fs::create_dir_all(out)?;
    fs::write(out.join("reduction.json"), serde_json::to_string_pretty(&red)?)?;
    let mut w = csv::Writer::from_path(out.join("scores.csv"))?;
    let scores = red.pca.scores.as_ref().expect("reduce projects");
    let mut header = vec!["component".to_string()];
    header.extend(matrix.users.iter().cloned());
    w.write_record(&header)?;
    for c in 0..scores.rows() {
        let mut row = vec![(c + 1).to_string()];
        row.extend(scores.row(c).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    println!(
        "kept {} of {} components ({:.2}% of variance)",
        red.pca.selected_count,
        red.pca.eigenvalues.len(),
        red.pca.explained_fraction
    );
    Ok(())
}

fn load_config(run: &RunArgs) -> Result<SimConfig> {
    let mut cfg = match &run.config {
        Some(p) => SimConfig::from_json(&read_text(p)?).with_context(|| format!("{}", p.display()))?,
        None => SimConfig::default(),
    };
    if let Some(seed) = run.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn write_manifest(run: &RunArgs, command: &str, cfg: &SimConfig, techniques: Vec<Technique>, counts: Vec<usize>) -> Result<()> {
    fs::create_dir_all(&run.out).with_context(|| format!("cannot create {}", run.out.display()))?;
    let manifest = RunManifest {
        command: command.to_string(),
        scenario: run.config.clone(),
        seed: cfg.seed,
        out_dir: run.out.clone(),
        techniques,
        workload_counts: counts,
        timestamp_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    let w = BufWriter::new(File::create(run.out.join("manifest.json"))?);
    serde_json::to_writer_pretty(w, &manifest)?;
    Ok(())
}

fn simulate_cmd(run: &RunArgs, technique: TechniqueArg) -> Result<()> {
    let cfg = load_config(run)?;
    let techniques = technique.techniques();
    write_manifest(run, "simulate", &cfg, techniques.clone(), vec![cfg.workload_count])?;
    for t in techniques {
        let out = simulate(&SimConfig { technique: t, ..cfg.clone() })?;
        export::write_run(&run.out.join(t.as_str()), &out, &cfg.penalty, "simulate")?;
    }
    Ok(())
}

fn compare_cmd(run: &RunArgs, sweep: &str) -> Result<()> {
    let cfg = load_config(run)?;
    let counts = sweep.parse::<Sweep>()?.counts();
    write_manifest(
        run,
        "compare",
        &cfg,
        vec![Technique::Autonomic, Technique::Baseline],
        counts.clone(),
    )?;
    let rep = compare(&cfg, &counts, threads_from_env(), "compare")?;
    export::write_compare(&run.out, &rep, &cfg.penalty, "compare")?;
    let wins = rep.deltas.iter().filter(|d| d.autonomic_better).count();
    println!("autonomic better on {wins} of {} metric comparisons", rep.deltas.len());
    Ok(())
}
