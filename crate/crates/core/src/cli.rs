//! Experiment front-end: TOML specs, (strategy x seed) sweeps and result files.
//!
//! A spec file looks like this (every section and key except `strategies`
//! and `seeds` is optional and falls back to the library defaults):
//!
//! ```toml
//! strategies = ["smem_full", "entropy", "random"]
//! seeds = [0, 1, 2]
//! output_dir = "results"
//! # dataset_file = "data.txt"   # reuse an exported dataset instead of generating
//!
//! [dataset]
//! pool_size = 5000
//! test_size = 2000
//! num_classes = 10
//! dim_v = 16
//! dim_q = 16
//! mode_fractions = [0.25, 0.25, 0.40, 0.10]
//! label_noise = 0.1
//! signal = 4.0
//!
//! [model]
//! hidden = 32
//! lambda = 1.0
//!
//! [al]
//! initial_labeled = 250
//! budget_per_stage = 250
//! num_stages = 5
//! initial_epochs = 60
//! reinit_per_stage = false
//! checkpoint = "final"        # or "best_epoch"
//!
//! [train]
//! learning_rate = 0.002
//! max_epoch = 30
//! batch_size = 32
//! optimizer = "adamax"        # or "sgd"
//! adamax_betas = [0.9, 0.999]
//! adamax_eps = 1e-8
//!
//! [acquisition]
//! alpha = 0.5
//! beta = 1.0
//! gamma = 1.0
//! kl_mode = "infinite"        # or "smoothed"
//! ```
//!
//! Each seed is the master seed of one run: it seeds the dataset, the
//! initial labeled draw, the model initialization and every shuffle.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{AcquisitionConfig, Strategy};
use crate::alloop::{ALConfig, Checkpoint, Experiment, StageRecord};
use crate::dataset::{generate, read_dataset, Dataset, DatasetConfig};
use crate::model::{ModelConfig, OptimizerKind, TrainConfig};
use crate::probmath::KlMode;
use crate::{rng, Error, Result};

pub const CSV_HEADER: &str = "strategy,seed,stage,labeled_count,vqa_accuracy,top1_accuracy";
pub const CSV_FILE: &str = "results.csv";

/// Environment variable holding a comma-separated seed list that replaces
/// the spec's `seeds`.
pub const SEEDS_ENV: &str = "SMEM_SEEDS";

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    strategies: Vec<String>,
    seeds: Vec<u64>,
    #[serde(default = "default_output_dir")]
    output_dir: PathBuf,
    #[serde(default)]
    dataset_file: Option<PathBuf>,
    #[serde(default)]
    dataset: RawDataset,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    al: RawAl,
    #[serde(default)]
    train: RawTrain,
    #[serde(default)]
    acquisition: RawAcquisition,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawDataset {
    pool_size: usize,
    test_size: usize,
    num_classes: usize,
    dim_v: usize,
    dim_q: usize,
    mode_fractions: [f64; 4],
    label_noise: f64,
    signal: f64,
}

impl Default for RawDataset {
    fn default() -> Self {
        let d = DatasetConfig::default();
        Self {
            pool_size: d.pool_size,
            test_size: d.test_size,
            num_classes: d.num_classes,
            dim_v: d.dim_v,
            dim_q: d.dim_q,
            mode_fractions: d.mode_fractions,
            label_noise: d.label_noise,
            signal: d.signal,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawModel {
    hidden: usize,
    lambda: f64,
}

impl Default for RawModel {
    fn default() -> Self {
        Self {
            hidden: 32,
            lambda: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAl {
    initial_labeled: usize,
    budget_per_stage: usize,
    num_stages: usize,
    initial_epochs: usize,
    reinit_per_stage: bool,
    checkpoint: Checkpoint,
}

impl Default for RawAl {
    fn default() -> Self {
        let a = ALConfig::default();
        Self {
            initial_labeled: a.initial_labeled,
            budget_per_stage: a.budget_per_stage,
            num_stages: a.num_stages,
            initial_epochs: a.initial_epochs,
            reinit_per_stage: a.reinit_per_stage,
            checkpoint: a.checkpoint,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawTrain {
    learning_rate: f64,
    max_epoch: usize,
    batch_size: usize,
    optimizer: OptimizerKind,
    adamax_betas: (f64, f64),
    adamax_eps: f64,
}

impl Default for RawTrain {
    fn default() -> Self {
        let t = ALConfig::default().train;
        Self {
            learning_rate: t.learning_rate,
            max_epoch: t.max_epoch,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            adamax_betas: t.adamax_betas,
            adamax_eps: t.adamax_eps,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawAcquisition {
    alpha: f64,
    beta: f64,
    gamma: f64,
    kl_mode: KlMode,
}

impl Default for RawAcquisition {
    fn default() -> Self {
        let a = AcquisitionConfig::default();
        Self {
            alpha: a.alpha,
            beta: a.beta,
            gamma: a.gamma,
            kl_mode: a.kl_mode,
        }
    }
}

/// A validated experiment grid. The per-run seeds inside `dataset`,
/// `model` and `al` are placeholders; [`ExperimentSpec::run_configs`]
/// fills them from each master seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub al: ALConfig,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    pub dataset_file: Option<PathBuf>,
}

/// Parses and validates a TOML spec.
pub fn parse_spec(text: &str) -> Result<ExperimentSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
    let strategies = raw
        .strategies
        .iter()
        .map(|s| s.parse::<Strategy>().map_err(|e| Error::Validation(e.to_string())))
        .collect::<Result<Vec<_>>>()?;
    let d = raw.dataset;
    let dataset = DatasetConfig {
        pool_size: d.pool_size,
        test_size: d.test_size,
        num_classes: d.num_classes,
        dim_v: d.dim_v,
        dim_q: d.dim_q,
        mode_fractions: d.mode_fractions,
        label_noise: d.label_noise,
        signal: d.signal,
        seed: 0,
    };
    let model = ModelConfig {
        dim_v: d.dim_v,
        dim_q: d.dim_q,
        hidden: raw.model.hidden,
        num_classes: d.num_classes,
        lambda: raw.model.lambda,
        seed: 0,
    };
    let t = raw.train;
    let al = ALConfig {
        initial_labeled: raw.al.initial_labeled,
        budget_per_stage: raw.al.budget_per_stage,
        num_stages: raw.al.num_stages,
        reinit_per_stage: raw.al.reinit_per_stage,
        initial_epochs: raw.al.initial_epochs,
        checkpoint: raw.al.checkpoint,
        train: TrainConfig {
            learning_rate: t.learning_rate,
            max_epoch: t.max_epoch,
            batch_size: t.batch_size,
            optimizer: t.optimizer,
            adamax_betas: t.adamax_betas,
            adamax_eps: t.adamax_eps,
            ..Default::default()
        },
        acquisition: AcquisitionConfig {
            alpha: raw.acquisition.alpha,
            beta: raw.acquisition.beta,
            gamma: raw.acquisition.gamma,
            strategy: Strategy::SmemFull,
            kl_mode: raw.acquisition.kl_mode,
        },
        seed: 0,
    };
    let spec = ExperimentSpec {
        dataset,
        model,
        al,
        strategies,
        seeds: raw.seeds,
        output_dir: raw.output_dir,
        dataset_file: raw.dataset_file,
    };
    spec.validate()?;
    Ok(spec)
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.strategies.is_empty() {
            return Err(Error::Validation("strategies must be non-empty".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Validation("seeds must be non-empty".into()));
        }
        let distinct: BTreeSet<u64> = self.seeds.iter().copied().collect();
        if distinct.len() != self.seeds.len() {
            return Err(Error::Validation("seeds must be distinct".into()));
        }
        let distinct: BTreeSet<Strategy> = self.strategies.iter().copied().collect();
        if distinct.len() != self.strategies.len() {
            return Err(Error::Validation("strategies must be distinct".into()));
        }
        if !(self.al.train.learning_rate > 0.0) {
            return Err(Error::Validation(format!(
                "learning_rate > 0 (got {})",
                self.al.train.learning_rate
            )));
        }
        if self.dataset_file.is_none() {
            self.dataset.validate()?;
        }
        self.model.validate()?;
        self.al.validate(self.dataset.pool_size)
    }

    /// Replaces the seed list from a comma-separated string.
    pub fn override_seeds(&mut self, list: &str) -> Result<()> {
        self.seeds = list
            .split(',')
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Validation(format!("{SEEDS_ENV}: bad seed `{s}`")))
            })
            .collect::<Result<_>>()?;
        self.validate()
    }

    /// Fully seeded configs for one `(strategy, master seed)` run.
    pub fn run_configs(&self, strategy: Strategy, seed: u64) -> (DatasetConfig, ModelConfig, ALConfig) {
        let dataset = DatasetConfig {
            seed,
            ..self.dataset.clone()
        };
        let model = ModelConfig {
            seed: rng::derive_seed(seed, &[rng::tag::MODEL_INIT]),
            ..self.model.clone()
        };
        let mut al = self.al.clone();
        al.seed = seed;
        al.acquisition.strategy = strategy;
        (dataset, model, al)
    }

    pub fn expected_rows(&self) -> usize {
        self.strategies.len() * self.seeds.len() * (self.al.num_stages + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub strategy: String,
    pub seed: u64,
    pub stage: usize,
    pub labeled_count: usize,
    pub vqa_accuracy: f64,
    pub top1_accuracy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

/// Decimal notation with 7 significant digits.
pub fn format_sig7(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{:.6}", x);
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (6 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

impl ResultTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.strategy,
                r.seed,
                r.stage,
                r.labeled_count,
                format_sig7(r.vqa_accuracy),
                format_sig7(r.top1_accuracy)
            ));
        }
        out
    }
}

/// One completed run as written to its JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    pub strategy: Strategy,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub al: ALConfig,
    pub records: Vec<StageRecord>,
}

pub fn run_file_name(strategy: Strategy, seed: u64) -> String {
    format!("run_{strategy}_seed{seed}.json")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let res = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(res?)
}

fn check_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".smem-write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn load_shared_dataset(spec: &ExperimentSpec) -> Result<Option<Dataset>> {
    let Some(path) = &spec.dataset_file else {
        return Ok(None);
    };
    let ds = read_dataset(BufReader::new(fs::File::open(path)?))?;
    let first = ds.pool.first().ok_or(Error::EmptySplit)?;
    if ds.test.is_empty() {
        return Err(Error::EmptySplit);
    }
    if first.x_v.len() != spec.model.dim_v
        || first.x_q.len() != spec.model.dim_q
        || first.target.len() != spec.model.num_classes
    {
        return Err(Error::Validation(format!(
            "{} does not match [dataset] num_classes/dim_v/dim_q",
            path.display()
        )));
    }
    spec.al.validate(ds.pool.len())?;
    Ok(Some(ds))
}

/// Runs one `(strategy, seed)` experiment, passing each stage record to `sink`.
pub fn run_one<F>(spec: &ExperimentSpec, shared: Option<&Dataset>, strategy: Strategy, seed: u64, mut sink: F) -> Result<RunOutput>
where
    F: FnMut(&StageRecord),
{
    let (dataset_cfg, model, al) = spec.run_configs(strategy, seed);
    let generated;
    let dataset = match shared {
        Some(d) => d,
        None => {
            generated = generate(&dataset_cfg)?;
            &generated
        }
    };
    let mut exp = Experiment::new(dataset, al.clone(), model.clone())?;
    let mut records = Vec::with_capacity(al.num_stages + 1);
    for _ in 0..=al.num_stages {
        let rec = exp.run_stage()?;
        sink(&rec);
        records.push(rec);
    }
    Ok(RunOutput {
        strategy,
        seed,
        dataset: dataset_cfg,
        model,
        al,
        records,
    })
}

/// Executes the whole grid on `workers` threads and writes per-run JSON plus
/// the aggregate CSV. The CSV is written only when every run succeeds.
pub fn run(spec: &ExperimentSpec, workers: usize) -> Result<ResultTable> {
    check_writable(&spec.output_dir)?;
    let shared = load_shared_dataset(spec)?;
    let grid: Vec<(Strategy, u64)> = spec
        .strategies
        .iter()
        .flat_map(|&st| spec.seeds.iter().map(move |&seed| (st, seed)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("worker pool: {e}")))?;
    let log = Mutex::new(std::io::stderr());
    let outputs: Vec<RunOutput> = pool.install(|| {
        grid.par_iter()
            .map(|&(st, seed)| {
                let out = run_one(spec, shared.as_ref(), st, seed, |rec| {
                    let mut w = log.lock().unwrap_or_else(|e| e.into_inner());
                    let _ = writeln!(
                        w,
                        "{st} seed={seed} stage={} labeled={} vqa={:.4} top1={:.4} loss={:.4} ({:.2}s)",
                        rec.stage, rec.labeled_count, rec.vqa_accuracy, rec.top1_accuracy, rec.train_loss_final, rec.wall_time
                    );
                })?;
                let json = serde_json::to_vec_pretty(&out).map_err(|e| Error::Parse(e.to_string()))?;
                write_atomic(&spec.output_dir.join(run_file_name(st, seed)), &json)?;
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let rows = outputs
        .iter()
        .flat_map(|o| {
            o.records.iter().map(move |r| ResultRow {
                strategy: o.strategy.to_string(),
                seed: o.seed,
                stage: r.stage,
                labeled_count: r.labeled_count,
                vqa_accuracy: r.vqa_accuracy,
                top1_accuracy: r.top1_accuracy,
            })
        })
        .collect();
    let table = ResultTable { rows };
    debug_assert_eq!(table.rows.len(), spec.expected_rows());
    write_atomic(&spec.output_dir.join(CSV_FILE), table.to_csv().as_bytes())?;
    Ok(table)
}

/// Mean and sample standard deviation of one column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub strategy: String,
    pub stage: usize,
    pub labeled_count: usize,
    pub runs: usize,
    pub vqa_accuracy: MeanStd,
    pub top1_accuracy: MeanStd,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
}

impl Summary {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<16} {:>5} {:>8} {:>4} {:>22} {:>22}\n",
            "strategy", "stage", "labeled", "runs", "vqa_accuracy", "top1_accuracy"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<16} {:>5} {:>8} {:>4} {:>11} ± {:<8} {:>11} ± {:<8}\n",
                r.strategy,
                r.stage,
                r.labeled_count,
                r.runs,
                format_sig7(r.vqa_accuracy.mean),
                format!("{:.6}", r.vqa_accuracy.std),
                format_sig7(r.top1_accuracy.mean),
                format!("{:.6}", r.top1_accuracy.std),
            ));
        }
        out
    }
}

pub fn summarize_csv<R: std::io::Read>(input: R) -> Result<Summary> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers().map_err(|e| Error::Schema(e.to_string()))?.clone();
    let header: Vec<&str> = header.iter().collect();
    if header.join(",") != CSV_HEADER {
        return Err(Error::Schema(format!("expected header `{CSV_HEADER}`")));
    }
    let mut groups: BTreeMap<(String, usize), (usize, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (i, rec) in reader.deserialize::<ResultRow>().enumerate() {
        let row = rec.map_err(|e| Error::Schema(format!("row {}: {e}", i + 1)))?;
        let g = groups
            .entry((row.strategy.clone(), row.stage))
            .or_insert_with(|| (row.labeled_count, Vec::new(), Vec::new()));
        if g.0 != row.labeled_count {
            return Err(Error::Schema(format!(
                "row {}: labeled_count differs within strategy {} stage {}",
                i + 1,
                row.strategy,
                row.stage
            )));
        }
        g.1.push(row.vqa_accuracy);
        g.2.push(row.top1_accuracy);
    }
    if groups.is_empty() {
        return Err(Error::Schema("no data rows".into()));
    }
    let rows = groups
        .into_iter()
        .map(|((strategy, stage), (labeled_count, vqa, top1))| SummaryRow {
            strategy,
            stage,
            labeled_count,
            runs: vqa.len(),
            vqa_accuracy: MeanStd::of(&vqa),
            top1_accuracy: MeanStd::of(&top1),
        })
        .collect();
    Ok(Summary { rows })
}

/// Aggregates an emitted CSV by `(strategy, stage)` over seeds.
pub fn summarize(path: &Path) -> Result<Summary> {
    summarize_csv(fs::File::open(path)?)
}

/// Process exit code for an error: 2 for spec/input problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Validation(_) | Error::UnknownStrategy(_) | Error::Schema(_) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "strategies = [\"smem\"]\nseeds = [3]\n";

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_spec(MINIMAL).unwrap();
        assert_eq!(s.strategies, vec![Strategy::Smem]);
        assert_eq!(s.seeds, vec![3]);
        assert_eq!(s.al.acquisition.alpha, 0.5);
        assert_eq!(s.al.acquisition.beta, 1.0);
        assert_eq!(s.al.acquisition.gamma, 1.0);
        assert_eq!(s.model.lambda, 1.0);
        assert_eq!(s.al.train.optimizer, OptimizerKind::Adamax);
        assert_eq!(s.al.train.adamax_betas, (0.9, 0.999));
        assert_eq!(s.output_dir, PathBuf::from("results"));
        assert_eq!(s.model.num_classes, s.dataset.num_classes);
    }

    #[test]
    fn unknown_strategy_names_registry() {
        let e = parse_spec("strategies = [\"foo\"]\nseeds = [1]\n").unwrap_err();
        assert!(matches!(e, Error::Validation(_)));
        let msg = e.to_string();
        assert!(msg.contains("foo") && msg.contains("least_confident"), "{msg}");
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn alpha_out_of_range() {
        let e = parse_spec(&format!("{MINIMAL}[acquisition]\nalpha = 1.5\n")).unwrap_err();
        assert!(e.to_string().contains("alpha in [0,1]"), "{e}");
    }

    #[test]
    fn unknown_keys_rejected_with_context() {
        let e = parse_spec(&format!("{MINIMAL}[model]\nhiden = 3\n")).unwrap_err();
        assert!(matches!(e, Error::Parse(_)));
        let msg = e.to_string();
        assert!(msg.contains("hiden") && msg.contains("line 4"), "{msg}");
        assert!(parse_spec("strategies = [\"smem\"]\nseeds = [1]\nbogus = 1\n").is_err());
        assert!(parse_spec("seeds = [1]\n").is_err());
    }

    #[test]
    fn seed_and_strategy_lists_validated() {
        assert!(parse_spec("strategies = []\nseeds = [1]\n").is_err());
        assert!(parse_spec("strategies = [\"smem\"]\nseeds = []\n").is_err());
        assert!(parse_spec("strategies = [\"smem\"]\nseeds = [1, 1]\n").is_err());
        let e = parse_spec(&format!("{MINIMAL}[train]\nlearning_rate = 0.0\n")).unwrap_err();
        assert!(e.to_string().contains("learning_rate"));
        let e = parse_spec(&format!("{MINIMAL}[al]\nnum_stages = 100\n")).unwrap_err();
        assert!(e.to_string().contains("pool size"), "{e}");
    }

    #[test]
    fn seed_override() {
        let mut s = parse_spec(MINIMAL).unwrap();
        s.override_seeds("4, 5,6").unwrap();
        assert_eq!(s.seeds, vec![4, 5, 6]);
        assert!(s.override_seeds("4,x").is_err());
        assert!(s.override_seeds("").is_err());
    }

    #[test]
    fn sig7_formatting() {
        assert_eq!(format_sig7(0.5), "0.5000000");
        assert_eq!(format_sig7(1.0), "1.000000");
        assert_eq!(format_sig7(0.0), "0.000000");
        assert_eq!(format_sig7(2.0 / 3.0), "0.6666667");
        assert_eq!(format_sig7(0.012345678), "0.01234568");
    }

    #[test]
    fn summarize_examples() {
        let csv = format!("{CSV_HEADER}\nsmem,1,0,10,0.4,0.3\nsmem,2,0,10,0.6,0.5\n");
        let s = summarize_csv(csv.as_bytes()).unwrap();
        assert_eq!(s.rows.len(), 1);
        let r = &s.rows[0];
        assert!((r.vqa_accuracy.mean - 0.5).abs() < 1e-15);
        assert!((r.vqa_accuracy.std - 0.1414214).abs() < 1e-7);
        assert_eq!(r.runs, 2);

        let csv = format!("{CSV_HEADER}\nsmem,1,0,10,0.4,0.3\nsmem,1,1,20,0.6,0.5\n");
        let s = summarize_csv(csv.as_bytes()).unwrap();
        assert!(s.rows.iter().all(|r| r.vqa_accuracy.std == 0.0 && r.top1_accuracy.std == 0.0));
        assert!(s.render().contains("smem"));
    }

    #[test]
    fn summarize_orders_by_strategy_then_stage() {
        let csv = format!(
            "{CSV_HEADER}\nrandom,1,1,20,0.5,0.5\nentropy,1,1,20,0.5,0.5\nrandom,1,0,10,0.5,0.5\nentropy,1,0,10,0.4,0.4\n"
        );
        let s = summarize_csv(csv.as_bytes()).unwrap();
        let keys: Vec<(String, usize)> = s.rows.iter().map(|r| (r.strategy.clone(), r.stage)).collect();
        assert_eq!(
            keys,
            vec![
                ("entropy".into(), 0),
                ("entropy".into(), 1),
                ("random".into(), 0),
                ("random".into(), 1)
            ]
        );
    }

    #[test]
    fn summarize_schema_errors() {
        for bad in [
            format!("{CSV_HEADER}\n"),
            "a,b,c\n1,2,3\n".to_string(),
            format!("{CSV_HEADER}\nsmem,1,0,ten,0.4,0.3\n"),
            String::new(),
        ] {
            let e = summarize_csv(bad.as_bytes()).unwrap_err();
            assert!(matches!(e, Error::Schema(_)), "{bad:?} -> {e}");
        }
    }
}
