//! Staged active learning.
//!
//! Stage 0 trains on the random initial labeled set and evaluates. Every
//! later stage scores the unlabeled pool with the previous stage's model,
//! sends the top `b` samples to the oracle, retrains on the grown labeled
//! set and evaluates again, so stage `s` reports a model trained on
//! `initial_labeled + s * b` samples.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{score, score_random, select_top_b, AcquisitionConfig, ScoredSample};
use crate::dataset::{evaluate, generate, Dataset, DatasetConfig, Metrics, Predictor, Sample};
use crate::model::{init_model, train_with, Example, ModelConfig, Parameters, TrainConfig};
use crate::{rng, Error, Result};

/// Labeled and unlabeled id sets. Together they always cover the original
/// pool exactly once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pool {
    labeled: BTreeSet<u64>,
    unlabeled: BTreeSet<u64>,
}

impl Pool {
    pub fn labeled(&self) -> &BTreeSet<u64> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<u64> {
        &self.unlabeled
    }

    pub fn len(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Moves `ids` from unlabeled to labeled. All-or-nothing.
    pub fn mark_labeled(&mut self, ids: &[u64]) -> Result<()> {
        self.check_unlabeled(ids)?;
        for id in ids {
            self.unlabeled.remove(id);
            self.labeled.insert(*id);
        }
        Ok(())
    }

    fn check_unlabeled(&self, ids: &[u64]) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &id in ids {
            if self.labeled.contains(&id) || !seen.insert(id) {
                return Err(Error::AlreadyLabeled(id));
            }
            if !self.unlabeled.contains(&id) {
                return Err(Error::UnknownId(id));
            }
        }
        Ok(())
    }
}

/// Seeded uniform draw of `initial_labeled` ids without replacement.
pub fn init_pool(pool_ids: &[u64], initial_labeled: usize, seed: u64) -> Result<Pool> {
    if initial_labeled == 0 {
        return Err(Error::Validation("initial_labeled >= 1".into()));
    }
    if initial_labeled > pool_ids.len() {
        return Err(Error::BudgetExceedsPool {
            budget: initial_labeled,
            available: pool_ids.len(),
        });
    }
    let all: BTreeSet<u64> = pool_ids.iter().copied().collect();
    if all.len() != pool_ids.len() {
        return Err(Error::Validation("pool ids must be distinct".into()));
    }
    // Draw over sorted ids so the partition ignores input order.
    let sorted: Vec<u64> = all.iter().copied().collect();
    let mut r = rng::stream(seed, &[rng::tag::POOL_INIT]);
    let labeled: BTreeSet<u64> = sample(&mut r, sorted.len(), initial_labeled)
        .into_iter()
        .map(|i| sorted[i])
        .collect();
    let unlabeled = all.difference(&labeled).copied().collect();
    Ok(Pool { labeled, unlabeled })
}

/// Id lookup over the pool samples.
#[derive(Debug, Clone)]
pub struct SampleIndex<'a> {
    samples: &'a [Sample],
    by_id: HashMap<u64, usize>,
}

impl<'a> SampleIndex<'a> {
    pub fn new(samples: &'a [Sample]) -> Self {
        let by_id = samples.iter().enumerate().map(|(i, s)| (s.id, i)).collect();
        Self { samples, by_id }
    }

    pub fn get(&self, id: u64) -> Result<&'a Sample> {
        self.by_id
            .get(&id)
            .map(|&i| &self.samples[i])
            .ok_or(Error::UnknownId(id))
    }

    pub fn ids(&self) -> Vec<u64> {
        self.samples.iter().map(|s| s.id).collect()
    }
}

/// Reveals the stored annotations for `ids`. Does not modify the pool.
pub fn oracle<'a>(ids: &[u64], pool: &Pool, index: &SampleIndex<'a>) -> Result<Vec<&'a Sample>> {
    pool.check_unlabeled(ids)?;
    ids.iter().map(|&id| index.get(id)).collect()
}

/// Scores every unlabeled sample, in ascending id order.
pub fn score_unlabeled<P: Predictor + ?Sized>(
    model: &P,
    pool: &Pool,
    index: &SampleIndex<'_>,
    cfg: &AcquisitionConfig,
    seed: u64,
) -> Result<Vec<ScoredSample>> {
    let ids: Vec<u64> = pool.unlabeled.iter().copied().collect();
    ids.par_iter()
        .map(|&id| {
            let s = index.get(id)?;
            let value = if cfg.strategy.uses_outputs() {
                score(&model.outputs(&s.x_v, &s.x_q)?, id, cfg, seed)?
            } else {
                score_random(id, seed)
            };
            Ok(ScoredSample {
                sample_id: id,
                score: value,
            })
        })
        .collect()
}

/// Scores the unlabeled pool and returns the `budget` ids to label.
pub fn acquire<P: Predictor + ?Sized>(
    model: &P,
    pool: &Pool,
    index: &SampleIndex<'_>,
    cfg: &AcquisitionConfig,
    budget: usize,
    seed: u64,
) -> Result<Vec<u64>> {
    if budget > pool.unlabeled.len() {
        return Err(Error::BudgetExceedsPool {
            budget,
            available: pool.unlabeled.len(),
        });
    }
    let scored = score_unlabeled(model, pool, index, cfg, seed)?;
    select_top_b(&scored, budget)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoint {
    /// Report the parameters after the last epoch.
    #[default]
    Final,
    /// Report the epoch with the best test VQA accuracy.
    BestEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ALConfig {
    pub initial_labeled: usize,
    pub budget_per_stage: usize,
    pub num_stages: usize,
    /// Reinitialize the model before each stage instead of warm-starting.
    pub reinit_per_stage: bool,
    /// Epochs for stage 0; later stages use `train.max_epoch`.
    pub initial_epochs: usize,
    pub checkpoint: Checkpoint,
    pub train: TrainConfig,
    pub acquisition: AcquisitionConfig,
    pub seed: u64,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            initial_labeled: 250,
            budget_per_stage: 250,
            num_stages: 5,
            reinit_per_stage: false,
            initial_epochs: 60,
            checkpoint: Checkpoint::Final,
            train: TrainConfig {
                max_epoch: 30,
                batch_size: 32,
                ..Default::default()
            },
            acquisition: AcquisitionConfig::default(),
            seed: 0,
        }
    }
}

impl ALConfig {
    pub fn validate(&self, pool_size: usize) -> Result<()> {
        if self.initial_labeled == 0 {
            return Err(Error::Validation("initial_labeled >= 1".into()));
        }
        if self.num_stages > 0 && self.budget_per_stage == 0 {
            return Err(Error::Validation("budget_per_stage >= 1".into()));
        }
        if self.initial_epochs == 0 {
            return Err(Error::Validation("initial_epochs >= 1".into()));
        }
        let needed = self.initial_labeled + self.num_stages * self.budget_per_stage;
        if needed > pool_size {
            return Err(Error::Validation(format!(
                "initial_labeled + num_stages * budget_per_stage <= pool size ({needed} > {pool_size})"
            )));
        }
        self.train.validate()?;
        self.acquisition.validate()
    }

    pub fn labeled_count(&self, stage: usize) -> usize {
        self.initial_labeled + stage * self.budget_per_stage
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub labeled_count: usize,
    pub vqa_accuracy: f64,
    pub top1_accuracy: f64,
    pub train_loss_final: f64,
    /// Seconds. Not deterministic.
    pub wall_time: f64,
    /// Ids acquired at the start of this stage, in selection order.
    pub acquired: Vec<u64>,
}

/// One experiment in progress.
#[derive(Debug, Clone)]
pub struct Experiment<'a> {
    index: SampleIndex<'a>,
    test: &'a [Sample],
    pub pool: Pool,
    pub params: Parameters,
    pub cfg: ALConfig,
    pub model_cfg: ModelConfig,
    next_stage: usize,
}

impl<'a> Experiment<'a> {
    pub fn new(dataset: &'a Dataset, cfg: ALConfig, model_cfg: ModelConfig) -> Result<Self> {
        cfg.validate(dataset.pool.len())?;
        model_cfg.validate()?;
        if let Some(s) = dataset.pool.first() {
            if s.x_v.len() != model_cfg.dim_v
                || s.x_q.len() != model_cfg.dim_q
                || s.target.len() != model_cfg.num_classes
            {
                return Err(Error::Validation("model dims must match the dataset".into()));
            }
        }
        let index = SampleIndex::new(&dataset.pool);
        let pool = init_pool(&index.ids(), cfg.initial_labeled, cfg.seed)?;
        let params = init_model(&model_cfg)?;
        Ok(Self {
            index,
            test: &dataset.test,
            pool,
            params,
            cfg,
            model_cfg,
            next_stage: 0,
        })
    }

    pub fn index(&self) -> &SampleIndex<'a> {
        &self.index
    }

    pub fn next_stage(&self) -> usize {
        self.next_stage
    }

    fn fit(&mut self, stage: usize) -> Result<(f64, Metrics)> {
        if stage > 0 && self.cfg.reinit_per_stage {
            let reinit = ModelConfig {
                seed: rng::derive_seed(self.model_cfg.seed, &[stage as u64]),
                ..self.model_cfg.clone()
            };
            self.params = init_model(&reinit)?;
        }
        let labeled: Vec<&Sample> = self
            .pool
            .labeled
            .iter()
            .map(|&id| self.index.get(id))
            .collect::<Result<_>>()?;
        let data: Vec<Example<'_>> = labeled
            .iter()
            .map(|s| Example {
                x_v: &s.x_v,
                x_q: &s.x_q,
                target: &s.target,
            })
            .collect();
        let mut tc = self.cfg.train.clone();
        if stage == 0 {
            tc.max_epoch = self.cfg.initial_epochs;
        }
        let shuffle_seed = rng::derive_seed(self.cfg.seed, &[rng::tag::SHUFFLE, stage as u64]);
        let test = self.test;

        match self.cfg.checkpoint {
            Checkpoint::Final => {
                let report = train_with(&mut self.params, &data, &tc, self.model_cfg.lambda, shuffle_seed, |_, _, _| {})?;
                let metrics = evaluate(&self.params, test)?;
                Ok((report.final_loss(), metrics))
            }
            Checkpoint::BestEpoch => {
                let mut best: Option<(Metrics, f64, Parameters)> = None;
                let mut eval_err = None;
                train_with(&mut self.params, &data, &tc, self.model_cfg.lambda, shuffle_seed, |_, p, loss| {
                    match evaluate(p, test) {
                        Ok(m) => {
                            if best.as_ref().is_none_or(|(b, _, _)| m.vqa_accuracy_mean > b.vqa_accuracy_mean) {
                                best = Some((m, loss, p.clone()));
                            }
                        }
                        Err(e) => eval_err = Some(e),
                    }
                })?;
                if let Some(e) = eval_err {
                    return Err(e);
                }
                let (metrics, loss, params) = best.ok_or(Error::EmptyLabeledSet)?;
                // Warm start continues from the reported model.
                self.params = params;
                Ok((loss, metrics))
            }
        }
    }

    /// Stage 0 when nothing has run yet, otherwise one acquisition stage.
    pub fn run_stage(&mut self) -> Result<StageRecord> {
        let stage = self.next_stage;
        let start = Instant::now();
        let mut acquired = Vec::new();
        if stage > 0 {
            let b = self.cfg.budget_per_stage;
            let seed = rng::derive_seed(self.cfg.seed, &[rng::tag::ACQUIRE, stage as u64]);
            acquired = acquire(&self.params, &self.pool, &self.index, &self.cfg.acquisition, b, seed)?;
            oracle(&acquired, &self.pool, &self.index)?;
            self.pool.mark_labeled(&acquired)?;
        }
        let (train_loss_final, metrics) = self.fit(stage)?;
        self.next_stage += 1;
        Ok(StageRecord {
            stage,
            labeled_count: self.pool.labeled.len(),
            vqa_accuracy: metrics.vqa_accuracy_mean,
            top1_accuracy: metrics.top1_accuracy,
            train_loss_final,
            wall_time: start.elapsed().as_secs_f64(),
            acquired,
        })
    }
}

/// Generates the data, then runs stage 0 and `num_stages` acquisition stages.
pub fn run_experiment(al: &ALConfig, data: &DatasetConfig, model: &ModelConfig) -> Result<Vec<StageRecord>> {
    run_experiment_with(al, data, model, |_| {})
}

/// Like [`run_experiment`], streaming each record to `sink` as it completes.
pub fn run_experiment_with<F>(
    al: &ALConfig,
    data: &DatasetConfig,
    model: &ModelConfig,
    mut sink: F,
) -> Result<Vec<StageRecord>>
where
    F: FnMut(&StageRecord),
{
    let dataset = generate(data)?;
    let mut exp = Experiment::new(&dataset, al.clone(), model.clone())?;
    let mut records = Vec::with_capacity(al.num_stages + 1);
    for _ in 0..=al.num_stages {
        let rec = exp.run_stage()?;
        sink(&rec);
        records.push(rec);
    }
    Ok(records)
}
