//! Acquisition strategies and budgeted selection.
//!
//! Every scorer maps one sample's [`OutputTriple`] to a real number where
//! larger means more worth labeling. Raw sigmoid outputs are sum-normalized
//! before any entropy or divergence is taken.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::probmath::{entropy, jsd, kl_div_with, normalize, Distribution, KlMode, RawOutput};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Random,
    Entropy,
    Margin,
    LeastConfident,
    Smem,
    SmemJsd,
    SmemFull,
    Kld,
    AdKld,
    Mi,
}

impl Strategy {
    pub const ALL: [Strategy; 10] = [
        Strategy::Random,
        Strategy::Entropy,
        Strategy::Margin,
        Strategy::LeastConfident,
        Strategy::Smem,
        Strategy::SmemJsd,
        Strategy::SmemFull,
        Strategy::Kld,
        Strategy::AdKld,
        Strategy::Mi,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Random => "random",
            Strategy::Entropy => "entropy",
            Strategy::Margin => "margin",
            Strategy::LeastConfident => "least_confident",
            Strategy::Smem => "smem",
            Strategy::SmemJsd => "smem_jsd",
            Strategy::SmemFull => "smem_full",
            Strategy::Kld => "kld",
            Strategy::AdKld => "ad_kld",
            Strategy::Mi => "mi",
        }
    }

    /// Whether the score depends on model outputs at all.
    pub fn uses_outputs(self) -> bool {
        self != Strategy::Random
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::UnknownStrategy(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    /// Weight of the question-only entropy; `1 - alpha` weights the visual one.
    pub alpha: f64,
    /// Weight of the Jensen-Shannon term between the single-modal outputs.
    pub beta: f64,
    /// Weight of the main-output entropy.
    pub gamma: f64,
    pub strategy: Strategy,
    pub kl_mode: KlMode,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 1.0,
            gamma: 1.0,
            strategy: Strategy::SmemFull,
            kl_mode: KlMode::Infinite,
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Validation(format!("alpha in [0,1] (got {})", self.alpha)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::Validation(format!("beta >= 0 (got {})", self.beta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Validation(format!("gamma >= 0 (got {})", self.gamma)));
        }
        Ok(())
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Self {
        self.strategy = strategy;
        self
    }
}

/// Main, visual-only and question-only raw outputs for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputTriple {
    pub main: RawOutput,
    pub visual: RawOutput,
    pub question: RawOutput,
}

impl OutputTriple {
    pub fn new(main: RawOutput, visual: RawOutput, question: RawOutput) -> Result<Self> {
        for other in [&visual, &question] {
            if other.len() != main.len() {
                return Err(Error::LengthMismatch {
                    left: main.len(),
                    right: other.len(),
                });
            }
        }
        Ok(Self {
            main,
            visual,
            question,
        })
    }

    pub fn from_vecs(main: Vec<f64>, visual: Vec<f64>, question: Vec<f64>) -> Result<Self> {
        Self::new(RawOutput::new(main)?, RawOutput::new(visual)?, RawOutput::new(question)?)
    }

    pub fn num_classes(&self) -> usize {
        self.main.len()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            main: self.main.scaled(c),
            visual: self.visual.scaled(c),
            question: self.question.scaled(c),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredSample {
    pub sample_id: u64,
    pub score: f64,
}

struct Normalized {
    main: Distribution,
    visual: Distribution,
    question: Distribution,
}

fn normalized(t: &OutputTriple) -> Result<Normalized> {
    Ok(Normalized {
        main: normalize(&t.main)?,
        visual: normalize(&t.visual)?,
        question: normalize(&t.question)?,
    })
}

/// Entropy of the normalized main output.
pub fn score_entropy(t: &OutputTriple) -> Result<f64> {
    Ok(entropy(&normalize(&t.main)?))
}

fn top_two(d: &Distribution) -> (f64, f64) {
    d.as_slice()
        .iter()
        .fold((f64::NEG_INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            if x > a {
                (x, a)
            } else if x > b {
                (a, x)
            } else {
                (a, b)
            }
        })
}

/// `1 - (p1 - p2)` over the two largest normalized main probabilities.
pub fn score_margin(t: &OutputTriple) -> Result<f64> {
    let (first, second) = top_two(&normalize(&t.main)?);
    Ok(1.0 - (first - second))
}

/// `1 - max p` over the normalized main output.
pub fn score_least_confident(t: &OutputTriple) -> Result<f64> {
    let (first, _) = top_two(&normalize(&t.main)?);
    Ok(1.0 - first)
}

fn smem_of(n: &Normalized, alpha: f64) -> f64 {
    alpha * entropy(&n.question) + (1.0 - alpha) * entropy(&n.visual)
}

/// Weighted single-modal entropy `alpha H(Y_q) + (1 - alpha) H(Y_v)`.
pub fn score_smem(t: &OutputTriple, cfg: &AcquisitionConfig) -> Result<f64> {
    Ok(smem_of(&normalized(t)?, cfg.alpha))
}

/// SMEM plus `beta JSD(y_v || y_q) + gamma H(Y)`.
pub fn score_smem_full(t: &OutputTriple, cfg: &AcquisitionConfig) -> Result<f64> {
    let n = normalized(t)?;
    let mut s = smem_of(&n, cfg.alpha);
    if cfg.beta != 0.0 {
        s += cfg.beta * jsd(&n.visual, &n.question)?;
    }
    if cfg.gamma != 0.0 {
        s += cfg.gamma * entropy(&n.main);
    }
    Ok(s)
}

/// Same as [`score_smem_full`] with `gamma` forced to zero.
pub fn score_smem_jsd(t: &OutputTriple, cfg: &AcquisitionConfig) -> Result<f64> {
    score_smem_full(t, &AcquisitionConfig { gamma: 0.0, ..*cfg })
}

fn kl_pair(n: &Normalized, mode: KlMode) -> Result<(f64, f64)> {
    Ok((
        kl_div_with(&n.main, &n.question, mode)?,
        kl_div_with(&n.main, &n.visual, mode)?,
    ))
}

/// `alpha KL(y || y_q) + (1 - alpha) KL(y || y_v)` with the main output as `y`.
pub fn score_kld(t: &OutputTriple, cfg: &AcquisitionConfig) -> Result<f64> {
    let (kq, kv) = kl_pair(&normalized(t)?, cfg.kl_mode)?;
    // Keep 0 * inf from turning into NaN at the alpha endpoints.
    let term = |w: f64, k: f64| if w == 0.0 { 0.0 } else { w * k };
    Ok(term(cfg.alpha, kq) + term(1.0 - cfg.alpha, kv))
}

/// `|KL(y || y_q) - KL(y || y_v)|`.
///
/// When both divergences are infinite the difference is undefined; it is
/// reported as `+inf` so the sample still ranks as maximally divergent.
pub fn score_ad_kld(t: &OutputTriple, cfg: &AcquisitionConfig) -> Result<f64> {
    let (kq, kv) = kl_pair(&normalized(t)?, cfg.kl_mode)?;
    if kq.is_infinite() || kv.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok((kq - kv).abs())
}

/// Plug-in conditional mutual information
/// `alpha (H(Y_q) - H(Y)) + (1 - alpha) (H(Y_v) - H(Y))`. May be negative.
pub fn score_mi(t: &OutputTriple, cfg: &AcquisitionConfig) -> Result<f64> {
    let n = normalized(t)?;
    let h_main = entropy(&n.main);
    Ok(cfg.alpha * (entropy(&n.question) - h_main)
        + (1.0 - cfg.alpha) * (entropy(&n.visual) - h_main))
}

/// Uniform `[0, 1)` score that depends only on `(seed, sample_id)`.
pub fn score_random(sample_id: u64, seed: u64) -> f64 {
    rng::stream(seed, &[rng::tag::ACQUIRE, sample_id]).random::<f64>()
}

/// Scores one sample under `cfg.strategy`. `seed` feeds only the random strategy.
pub fn score(t: &OutputTriple, sample_id: u64, cfg: &AcquisitionConfig, seed: u64) -> Result<f64> {
    match cfg.strategy {
        Strategy::Random => Ok(score_random(sample_id, seed)),
        Strategy::Entropy => score_entropy(t),
        Strategy::Margin => score_margin(t),
        Strategy::LeastConfident => score_least_confident(t),
        Strategy::Smem => score_smem(t, cfg),
        Strategy::SmemJsd => score_smem_jsd(t, cfg),
        Strategy::SmemFull => score_smem_full(t, cfg),
        Strategy::Kld => score_kld(t, cfg),
        Strategy::AdKld => score_ad_kld(t, cfg),
        Strategy::Mi => score_mi(t, cfg),
    }
}

fn rank(a: &ScoredSample, b: &ScoredSample) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.sample_id.cmp(&b.sample_id))
}

/// Ids of the `b` highest scores, ordered by descending score then ascending id.
pub fn select_top_b(scored: &[ScoredSample], b: usize) -> Result<Vec<u64>> {
    if b > scored.len() {
        return Err(Error::BudgetExceedsPool {
            budget: b,
            available: scored.len(),
        });
    }
    if let Some(s) = scored.iter().find(|s| s.score.is_nan()) {
        return Err(Error::NanScore(s.sample_id));
    }
    if b == 0 {
        return Ok(Vec::new());
    }
    let mut work = scored.to_vec();
    if b < work.len() {
        work.select_nth_unstable_by(b - 1, rank);
        work.truncate(b);
    }
    work.sort_unstable_by(rank);
    Ok(work.into_iter().map(|s| s.sample_id).collect())
}

/// Entropy bound `ln K` for `K` classes.
pub fn max_entropy(num_classes: usize) -> f64 {
    (num_classes as f64).ln()
}
