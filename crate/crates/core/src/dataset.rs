//! Synthetic multi-modal data with VQA-style soft targets.
//!
//! Each sample's answer is recoverable from the visual features, the
//! question features, only from both together, or not at all, depending on
//! its [`Mode`]. Ten simulated annotators vote per sample, and the soft
//! target is `min(votes / 3, 1)` per class.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::OutputTriple;
use crate::model::{predict, Parameters};
use crate::{rng, Error, Result};

pub const ANNOTATORS: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    VisualOnly,
    QuestionOnly,
    Joint,
    Noise,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::VisualOnly, Mode::QuestionOnly, Mode::Joint, Mode::Noise];

    pub fn name(self) -> &'static str {
        match self {
            Mode::VisualOnly => "visual_only",
            Mode::QuestionOnly => "question_only",
            Mode::Joint => "joint",
            Mode::Noise => "noise",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: u64,
    pub x_v: Vec<f64>,
    pub x_q: Vec<f64>,
    pub target: Vec<f64>,
    pub annotator_counts: Vec<u32>,
    pub mode: Mode,
    /// The class the annotators were drawn around.
    pub class: usize,
}

/// `min(count / 3, 1)` per class.
pub fn soft_target(counts: &[u32]) -> Vec<f64> {
    counts.iter().map(|&c| (f64::from(c) / 3.0).min(1.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    pub pool_size: usize,
    pub test_size: usize,
    pub num_classes: usize,
    pub dim_v: usize,
    pub dim_q: usize,
    /// Fractions of visual-only, question-only, joint and noise samples.
    pub mode_fractions: [f64; 4],
    /// Probability that a sample's votes scatter over 2-3 classes.
    pub label_noise: f64,
    /// Distance of each class mean from the origin, in noise standard deviations.
    pub signal: f64,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            pool_size: 5000,
            test_size: 2000,
            num_classes: 10,
            dim_v: 16,
            dim_q: 16,
            mode_fractions: [0.25, 0.25, 0.40, 0.10],
            label_noise: 0.1,
            signal: 4.0,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pool_size == 0 || self.test_size == 0 {
            return Err(Error::Validation("pool_size and test_size >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Validation("num_classes >= 2".into()));
        }
        if self.dim_v == 0 || self.dim_q == 0 {
            return Err(Error::Validation("dim_v and dim_q >= 1".into()));
        }
        if self.mode_fractions.iter().any(|f| !(*f >= 0.0)) {
            return Err(Error::Validation("mode_fractions >= 0".into()));
        }
        let sum: f64 = self.mode_fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("mode_fractions sum to 1 (got {sum})")));
        }
        if !(0.0..=1.0).contains(&self.label_noise) {
            return Err(Error::Validation("label_noise in [0,1]".into()));
        }
        if !(self.signal >= 0.0 && self.signal.is_finite()) {
            return Err(Error::Validation("signal >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pool: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Class means: scaled simplex vertices when `dim >= k`, otherwise random
/// directions of the same length.
fn prototypes<R: Rng>(k: usize, dim: usize, signal: f64, r: &mut R) -> Vec<Vec<f64>> {
    (0..k)
        .map(|c| {
            if dim >= k {
                let mut v = vec![0.0; dim];
                v[c] = signal;
                v
            } else {
                let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(r)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                v.into_iter().map(|x| x * signal / norm).collect()
            }
        })
        .collect()
}

fn noise<R: Rng>(dim: usize, r: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(r)).collect()
}

fn around<R: Rng>(mean: &[f64], r: &mut R) -> Vec<f64> {
    mean
        .iter()
        .map(|m| {
            let e: f64 = StandardNormal.sample(r);
            m + e
        })
        .collect()
}

fn votes<R: Rng>(class: usize, k: usize, label_noise: f64, r: &mut R) -> Vec<u32> {
    let mut counts = vec![0u32; k];
    if label_noise > 0.0 && r.random_bool(label_noise) {
        let spread = r.random_range(2..=3usize).min(k);
        let mut chosen = vec![class];
        while chosen.len() < spread {
            let c = r.random_range(0..k);
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        for _ in 0..ANNOTATORS {
            counts[chosen[r.random_range(0..chosen.len())]] += 1;
        }
    } else {
        counts[class] = ANNOTATORS;
    }
    counts
}

/// Generates the pool (ids `0..pool_size`) and test split (following ids).
pub fn generate(cfg: &DatasetConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, &[rng::tag::DATASET]);
    let k = cfg.num_classes;
    let proto_v = prototypes(k, cfg.dim_v, cfg.signal, &mut r);
    let proto_q = prototypes(k, cfg.dim_q, cfg.signal, &mut r);
    let modes = WeightedIndex::new(cfg.mode_fractions)
        .map_err(|e| Error::Validation(format!("mode_fractions: {e}")))?;

    let total = cfg.pool_size + cfg.test_size;
    let mut samples = Vec::with_capacity(total);
    for id in 0..total as u64 {
        let mode = Mode::ALL[modes.sample(&mut r)];
        let class = r.random_range(0..k);
        let (x_v, x_q) = match mode {
            Mode::VisualOnly => (around(&proto_v[class], &mut r), noise(cfg.dim_q, &mut r)),
            Mode::QuestionOnly => (noise(cfg.dim_v, &mut r), around(&proto_q[class], &mut r)),
            Mode::Joint => {
                let half_v = r.random_range(0..k);
                let half_q = (class + k - half_v) % k;
                (around(&proto_v[half_v], &mut r), around(&proto_q[half_q], &mut r))
            }
            Mode::Noise => (noise(cfg.dim_v, &mut r), noise(cfg.dim_q, &mut r)),
        };
        let annotator_counts = votes(class, k, cfg.label_noise, &mut r);
        samples.push(Sample {
            id,
            x_v,
            x_q,
            target: soft_target(&annotator_counts),
            annotator_counts,
            mode,
            class,
        });
    }
    let test = samples.split_off(cfg.pool_size);
    Ok(Dataset { pool: samples, test })
}

/// `min(counts[predicted] / 3, 1)`.
pub fn vqa_accuracy(predicted_class: usize, annotator_counts: &[u32]) -> Result<f64> {
    let c = annotator_counts
        .get(predicted_class)
        .ok_or(Error::IndexOutOfRange {
            index: predicted_class,
            len: annotator_counts.len(),
        })?;
    Ok((f64::from(*c) / 3.0).min(1.0))
}

/// Index of the largest element, lowest index on ties.
pub fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| if x > bv { (i, x) } else { (bi, bv) })
        .0
}

/// Anything that maps a sample's features to an output triple.
pub trait Predictor: Sync {
    fn outputs(&self, x_v: &[f64], x_q: &[f64]) -> Result<OutputTriple>;
}

impl Predictor for Parameters {
    fn outputs(&self, x_v: &[f64], x_q: &[f64]) -> Result<OutputTriple> {
        predict(self, x_v, x_q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub vqa_accuracy_mean: f64,
    pub top1_accuracy: f64,
}

/// Metrics for predicted class indices aligned with `test`.
pub fn metrics_from_predictions(predicted: &[usize], test: &[Sample]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptySplit);
    }
    if predicted.len() != test.len() {
        return Err(Error::LengthMismatch {
            left: predicted.len(),
            right: test.len(),
        });
    }
    let mut vqa = 0.0;
    let mut hits = 0usize;
    for (&p, s) in predicted.iter().zip(test) {
        vqa += vqa_accuracy(p, &s.annotator_counts)?;
        hits += usize::from(p == s.class);
    }
    let n = test.len() as f64;
    Ok(Metrics {
        vqa_accuracy_mean: vqa / n,
        top1_accuracy: hits as f64 / n,
    })
}

/// Predicts `argmax y_hat` for every test sample.
pub fn evaluate<P: Predictor + ?Sized>(model: &P, test: &[Sample]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptySplit);
    }
    let predicted = test
        .par_iter()
        .map(|s| model.outputs(&s.x_v, &s.x_q).map(|t| argmax(t.main.as_slice())))
        .collect::<Result<Vec<_>>>()?;
    metrics_from_predictions(&predicted, test)
}

const FORMAT_HEADER: &str = "smem-dataset v1";

fn join<T: fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Writes the line-delimited text format.
///
/// ```text
/// smem-dataset v1 num_classes=<K> dim_v=<D> dim_q=<E>
/// <split>\t<id>\t<mode>\t<class>\t<counts>\t<x_v>\t<x_q>
/// ```
///
/// `split` is `pool` or `test`; lists are comma separated; floats use the
/// shortest representation that parses back to the identical value. Soft
/// targets are not stored and are rebuilt from the counts on import.
pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    let first = ds
        .pool
        .first()
        .or(ds.test.first())
        .ok_or(Error::EmptySplit)?;
    writeln!(
        w,
        "{FORMAT_HEADER} num_classes={} dim_v={} dim_q={}",
        first.annotator_counts.len(),
        first.x_v.len(),
        first.x_q.len()
    )?;
    for (split, samples) in [("pool", &ds.pool), ("test", &ds.test)] {
        for s in samples.iter() {
            writeln!(
                w,
                "{split}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.id,
                s.mode,
                s.class,
                join(&s.annotator_counts),
                join(&s.x_v),
                join(&s.x_q)
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn parse_list<T: FromStr>(field: &str, line: usize, what: &str) -> Result<Vec<T>> {
    field
        .split(',')
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Parse(format!("line {line}: bad {what} value `{x}`")))
        })
        .collect()
}

fn header_value(tok: Option<&str>, key: &str) -> Result<usize> {
    tok.and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("line 1: expected {key}=<n>")))
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty input".into()))??;
    let rest = header
        .strip_prefix(FORMAT_HEADER)
        .ok_or_else(|| Error::Parse(format!("line 1: expected `{FORMAT_HEADER}` header")))?;
    let mut toks = rest.split_whitespace();
    let k = header_value(toks.next(), "num_classes")?;
    let dim_v = header_value(toks.next(), "dim_v")?;
    let dim_q = header_value(toks.next(), "dim_q")?;

    let mut ds = Dataset {
        pool: Vec::new(),
        test: Vec::new(),
    };
    for (i, line) in lines.enumerate() {
        let line = line?;
        let n = i + 2;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 7 {
            return Err(Error::Parse(format!("line {n}: expected 7 fields, got {}", f.len())));
        }
        let bad = |what: &str| Error::Parse(format!("line {n}: bad {what}"));
        let id: u64 = f[1].parse().map_err(|_| bad("id"))?;
        let mode: Mode = f[2].parse().map_err(|_| bad("mode"))?;
        let class: usize = f[3].parse().map_err(|_| bad("class"))?;
        let counts: Vec<u32> = parse_list(f[4], n, "count")?;
        let x_v: Vec<f64> = parse_list(f[5], n, "x_v")?;
        let x_q: Vec<f64> = parse_list(f[6], n, "x_q")?;
        if counts.len() != k || x_v.len() != dim_v || x_q.len() != dim_q || class >= k {
            return Err(Error::Parse(format!("line {n}: widths disagree with header")));
        }
        if counts.iter().sum::<u32>() != ANNOTATORS {
            return Err(Error::Parse(format!("line {n}: votes must sum to {ANNOTATORS}")));
        }
        let s = Sample {
            id,
            target: soft_target(&counts),
            x_v,
            x_q,
            annotator_counts: counts,
            mode,
            class,
        };
        match f[0] {
            "pool" => ds.pool.push(s),
            "test" => ds.test.push(s),
            other => return Err(Error::Parse(format!("line {n}: unknown split `{other}`"))),
        }
    }
    Ok(ds)
}
