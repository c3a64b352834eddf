//! Tri-branch multi-modal classifier.
//!
//! Two modality encoders feed a fusion block and the main head. The
//! visual-only and question-only heads read the encoder outputs but are
//! detached: their losses only ever update their own weights.
//!
//! ```text
//! x_v -> enc_v -> z_v --+--> fusion -> z -> head_main -> y_hat
//!                       |
//!                       +--> head_v -> y_v   (detached)
//! x_q -> enc_q -> z_q --+--> (fusion)
//!                       +--> head_q -> y_q   (detached)
//! ```

mod checkpoint;
mod optim;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::OutputTriple;
use crate::probmath::RawOutput;
use crate::{rng, Error, Result};

pub use checkpoint::{load_parameters, read_parameters, save_parameters, write_parameters, CHECKPOINT_MAGIC};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};

/// Lower clamp applied inside every BCE logarithm.
pub const LOG_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dim_v: usize,
    pub dim_q: usize,
    pub hidden: usize,
    pub num_classes: usize,
    /// Self-distillation weight on `BCE(y_hat, y_m)`.
    pub lambda: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim_v == 0 || self.dim_q == 0 || self.hidden == 0 {
            return Err(Error::Validation("all dims >= 1".into()));
        }
        if self.num_classes < 2 {
            return Err(Error::Validation("num_classes >= 2".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Validation(format!("lambda >= 0 (got {})", self.lambda)));
        }
        Ok(())
    }
}

/// Fully connected layer, `rows` outputs by `cols` inputs, weights row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            weight: vec![0.0; rows * cols],
            bias: vec![0.0; rows],
        }
    }

    fn uniform<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (cols as f64).sqrt();
        let weight = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Self {
            rows,
            cols,
            weight,
            bias: vec![0.0; rows],
        }
    }

    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        self.weight
            .chunks_exact(self.cols)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
            .collect()
    }

    /// Accumulates `delta x^T` and `delta` into `grad`, returns `W^T delta`.
    fn backprop(&self, x: &[f64], delta: &[f64], grad: &mut Dense, need_input: bool) -> Vec<f64> {
        let mut dx = if need_input { vec![0.0; self.cols] } else { Vec::new() };
        for (r, &d) in delta.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[r] += d;
            let grow = &mut grad.weight[r * self.cols..(r + 1) * self.cols];
            for (g, xi) in grow.iter_mut().zip(x) {
                *g += d * xi;
            }
            if need_input {
                let wrow = &self.weight[r * self.cols..(r + 1) * self.cols];
                for (acc, w) in dx.iter_mut().zip(wrow) {
                    *acc += d * w;
                }
            }
        }
        dx
    }

    pub fn num_params(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.weight.iter().chain(&self.bias)
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weight.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Parameter groups. The first four form the main model, trained by
/// `L_main`; each auxiliary head is trained only by its own branch loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Group {
    EncV,
    EncQ,
    Fusion,
    HeadMain,
    HeadV,
    HeadQ,
}

impl Group {
    pub const ALL: [Group; 6] = [
        Group::EncV,
        Group::EncQ,
        Group::Fusion,
        Group::HeadMain,
        Group::HeadV,
        Group::HeadQ,
    ];
    pub const MAIN: [Group; 4] = [Group::EncV, Group::EncQ, Group::Fusion, Group::HeadMain];

    pub fn name(self) -> &'static str {
        match self {
            Group::EncV => "enc_v",
            Group::EncQ => "enc_q",
            Group::Fusion => "fusion",
            Group::HeadMain => "head_main",
            Group::HeadV => "head_v",
            Group::HeadQ => "head_q",
        }
    }

    pub fn is_main(self) -> bool {
        !matches!(self, Group::HeadV | Group::HeadQ)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub enc_v: Dense,
    pub enc_q: Dense,
    pub fusion: Dense,
    pub head_main: Dense,
    pub head_v: Dense,
    pub head_q: Dense,
}

/// Gradients share the parameter layout.
pub type Gradients = Parameters;

impl Parameters {
    pub fn zeros(dim_v: usize, dim_q: usize, hidden: usize, num_classes: usize) -> Self {
        Self {
            enc_v: Dense::zeros(hidden, dim_v),
            enc_q: Dense::zeros(hidden, dim_q),
            fusion: Dense::zeros(hidden, 2 * hidden),
            head_main: Dense::zeros(num_classes, hidden),
            head_v: Dense::zeros(num_classes, hidden),
            head_q: Dense::zeros(num_classes, hidden),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim_v(), self.dim_q(), self.hidden(), self.num_classes())
    }

    pub fn dim_v(&self) -> usize {
        self.enc_v.cols
    }

    pub fn dim_q(&self) -> usize {
        self.enc_q.cols
    }

    pub fn hidden(&self) -> usize {
        self.enc_v.rows
    }

    pub fn num_classes(&self) -> usize {
        self.head_main.rows
    }

    pub fn layer(&self, g: Group) -> &Dense {
        match g {
            Group::EncV => &self.enc_v,
            Group::EncQ => &self.enc_q,
            Group::Fusion => &self.fusion,
            Group::HeadMain => &self.head_main,
            Group::HeadV => &self.head_v,
            Group::HeadQ => &self.head_q,
        }
    }

    pub fn layer_mut(&mut self, g: Group) -> &mut Dense {
        match g {
            Group::EncV => &mut self.enc_v,
            Group::EncQ => &mut self.enc_q,
            Group::Fusion => &mut self.fusion,
            Group::HeadMain => &mut self.head_main,
            Group::HeadV => &mut self.head_v,
            Group::HeadQ => &mut self.head_q,
        }
    }

    pub fn num_params(&self) -> usize {
        Group::ALL.iter().map(|&g| self.layer(g).num_params()).sum()
    }

    pub fn is_finite(&self) -> bool {
        Group::ALL
            .iter()
            .all(|&g| self.layer(g).values().all(|v| v.is_finite()))
    }

    /// Order-sensitive hash of every parameter bit pattern.
    pub fn checksum(&self) -> u64 {
        Group::ALL
            .iter()
            .flat_map(|&g| self.layer(g).values())
            .fold(0xcbf2_9ce4_8422_2325u64, |h, v| {
                (h ^ v.to_bits()).wrapping_mul(0x0000_0100_0000_01b3)
            })
    }
}

/// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` weights, zero biases.
pub fn init_model(cfg: &ModelConfig) -> Result<Parameters> {
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, &[rng::tag::MODEL_INIT]);
    let h = cfg.hidden;
    Ok(Parameters {
        enc_v: Dense::uniform(h, cfg.dim_v, &mut r),
        enc_q: Dense::uniform(h, cfg.dim_q, &mut r),
        fusion: Dense::uniform(h, 2 * h, &mut r),
        head_main: Dense::uniform(cfg.num_classes, h, &mut r),
        head_v: Dense::uniform(cfg.num_classes, h, &mut r),
        head_q: Dense::uniform(cfg.num_classes, h, &mut r),
    })
}

/// Intermediate values of one forward pass, kept for backprop.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    pub pre_v: Vec<f64>,
    pub z_v: Vec<f64>,
    pub pre_q: Vec<f64>,
    pub z_q: Vec<f64>,
    pub fused_input: Vec<f64>,
    pub pre_z: Vec<f64>,
    pub z: Vec<f64>,
    pub y_main: Vec<f64>,
    pub y_v: Vec<f64>,
    pub y_q: Vec<f64>,
}

fn relu(v: &mut [f64]) {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn sigmoid_vec(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(sigmoid).collect()
}

fn check_inputs(p: &Parameters, x_v: &[f64], x_q: &[f64]) -> Result<()> {
    if x_v.len() != p.dim_v() {
        return Err(Error::ShapeMismatch {
            what: "x_v",
            expected: p.dim_v(),
            got: x_v.len(),
        });
    }
    if x_q.len() != p.dim_q() {
        return Err(Error::ShapeMismatch {
            what: "x_q",
            expected: p.dim_q(),
            got: x_q.len(),
        });
    }
    Ok(())
}

fn forward_unchecked(p: &Parameters, x_v: &[f64], x_q: &[f64]) -> Activations {
    let pre_v = p.enc_v.affine(x_v);
    let mut z_v = pre_v.clone();
    relu(&mut z_v);
    let pre_q = p.enc_q.affine(x_q);
    let mut z_q = pre_q.clone();
    relu(&mut z_q);
    let fused_input: Vec<f64> = z_v.iter().chain(&z_q).copied().collect();
    let pre_z = p.fusion.affine(&fused_input);
    let mut z = pre_z.clone();
    relu(&mut z);
    let y_main = sigmoid_vec(p.head_main.affine(&z));
    let y_v = sigmoid_vec(p.head_v.affine(&z_v));
    let y_q = sigmoid_vec(p.head_q.affine(&z_q));
    Activations {
        pre_v,
        z_v,
        pre_q,
        z_q,
        fused_input,
        pre_z,
        z,
        y_main,
        y_v,
        y_q,
    }
}

pub fn forward(p: &Parameters, x_v: &[f64], x_q: &[f64]) -> Result<(Activations, OutputTriple)> {
    check_inputs(p, x_v, x_q)?;
    let acts = forward_unchecked(p, x_v, x_q);
    let triple = OutputTriple::new(
        RawOutput::new(acts.y_main.clone())?,
        RawOutput::new(acts.y_v.clone())?,
        RawOutput::new(acts.y_q.clone())?,
    )?;
    Ok((acts, triple))
}

/// Forward pass returning only the output triple.
pub fn predict(p: &Parameters, x_v: &[f64], x_q: &[f64]) -> Result<OutputTriple> {
    forward(p, x_v, x_q).map(|(_, t)| t)
}

/// Binary cross-entropy of `pred` against `target`, averaged over classes.
pub fn bce(target: &[f64], pred: &[f64]) -> f64 {
    debug_assert_eq!(target.len(), pred.len());
    let sum: f64 = target
        .iter()
        .zip(pred)
        .map(|(&t, &p)| -(t * p.max(LOG_EPS).ln() + (1.0 - t) * (1.0 - p).max(LOG_EPS).ln()))
        .sum();
    sum / pred.len() as f64
}

/// `BCE(y, y_hat)`.
pub fn loss_main(y_hat: &RawOutput, target: &[f64]) -> Result<f64> {
    check_target_len(y_hat.len(), target.len())?;
    Ok(bce(target, y_hat.as_slice()))
}

/// `BCE(y, y_m) + lambda BCE(y_hat, y_m)` for a single-modal output `y_m`.
pub fn loss_branch(y_m: &RawOutput, target: &[f64], y_hat: &RawOutput, lambda: f64) -> Result<f64> {
    check_target_len(y_m.len(), target.len())?;
    check_target_len(y_m.len(), y_hat.len())?;
    let mut l = bce(target, y_m.as_slice());
    if lambda != 0.0 {
        l += lambda * bce(y_hat.as_slice(), y_m.as_slice());
    }
    Ok(l)
}

fn check_target_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::LengthMismatch {
            left: expected,
            right: got,
        });
    }
    Ok(())
}

/// One labeled training example.
#[derive(Debug, Clone, Copy)]
pub struct Example<'a> {
    pub x_v: &'a [f64],
    pub x_q: &'a [f64],
    pub target: &'a [f64],
}

/// Which objectives contribute gradients and updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Objectives {
    pub main: bool,
    pub branches: bool,
}

impl Default for Objectives {
    fn default() -> Self {
        Self {
            main: true,
            branches: true,
        }
    }
}

impl Objectives {
    pub const MAIN_ONLY: Self = Self {
        main: true,
        branches: false,
    };
    pub const BRANCHES_ONLY: Self = Self {
        main: false,
        branches: true,
    };

    pub fn updates(self, g: Group) -> bool {
        if g.is_main() {
            self.main
        } else {
            self.branches
        }
    }
}

/// Batch-mean losses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Losses {
    pub main: f64,
    pub visual: f64,
    pub question: f64,
}

/// Exact gradients of the batch-mean losses.
///
/// `L_main` reaches the encoders, fusion and main head. `L_v` and `L_q`
/// reach only their own heads, and the distillation target `y_hat` is a
/// constant, so the branches never feed gradient into the shared trunk.
pub fn backward(
    p: &Parameters,
    batch: &[Example<'_>],
    lambda: f64,
    objectives: Objectives,
) -> Result<(Gradients, Losses)> {
    if batch.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let k = p.num_classes();
    let scale = 1.0 / (batch.len() * k) as f64;
    let h = p.hidden();
    let mut grads = p.zeros_like();
    let mut losses = Losses::default();

    for ex in batch {
        check_inputs(p, ex.x_v, ex.x_q)?;
        check_target_len(k, ex.target.len())?;
        let a = forward_unchecked(p, ex.x_v, ex.x_q);

        if objectives.main {
            losses.main += bce(ex.target, &a.y_main);
            let d_logit: Vec<f64> = a
                .y_main
                .iter()
                .zip(ex.target)
                .map(|(y, t)| (y - t) * scale)
                .collect();
            let dz = p.head_main.backprop(&a.z, &d_logit, &mut grads.head_main, true);
            let d_pre_z: Vec<f64> = dz
                .iter()
                .zip(&a.pre_z)
                .map(|(d, pre)| if *pre > 0.0 { *d } else { 0.0 })
                .collect();
            let d_fused = p.fusion.backprop(&a.fused_input, &d_pre_z, &mut grads.fusion, true);
            let (dz_v, dz_q) = d_fused.split_at(h);
            let d_pre_v: Vec<f64> = dz_v
                .iter()
                .zip(&a.pre_v)
                .map(|(d, pre)| if *pre > 0.0 { *d } else { 0.0 })
                .collect();
            let d_pre_q: Vec<f64> = dz_q
                .iter()
                .zip(&a.pre_q)
                .map(|(d, pre)| if *pre > 0.0 { *d } else { 0.0 })
                .collect();
            p.enc_v.backprop(ex.x_v, &d_pre_v, &mut grads.enc_v, false);
            p.enc_q.backprop(ex.x_q, &d_pre_q, &mut grads.enc_q, false);
        }

        if objectives.branches {
            for (y_m, z_m, head, grad, loss) in [
                (&a.y_v, &a.z_v, &p.head_v, &mut grads.head_v, &mut losses.visual),
                (&a.y_q, &a.z_q, &p.head_q, &mut grads.head_q, &mut losses.question),
            ] {
                *loss += bce(ex.target, y_m);
                if lambda != 0.0 {
                    *loss += lambda * bce(&a.y_main, y_m);
                }
                let d_logit: Vec<f64> = y_m
                    .iter()
                    .zip(ex.target)
                    .zip(&a.y_main)
                    .map(|((y, t), teacher)| ((y - t) + lambda * (y - teacher)) * scale)
                    .collect();
                head.backprop(z_m, &d_logit, grad, false);
            }
        }
    }

    let n = batch.len() as f64;
    losses.main /= n;
    losses.visual /= n;
    losses.question /= n;
    Ok((grads, losses))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epoch: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub adamax_betas: (f64, f64),
    pub adamax_eps: f64,
    #[serde(skip)]
    pub objectives: Objectives,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.002,
            max_epoch: 10,
            batch_size: 64,
            optimizer: OptimizerKind::Adamax,
            adamax_betas: (0.9, 0.999),
            adamax_eps: 1e-8,
            objectives: Objectives::default(),
        }
    }
}

impl TrainConfig {
    /// A zero learning rate is accepted here and freezes the parameters.
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Validation(format!(
                "learning_rate > 0 (got {})",
                self.learning_rate
            )));
        }
        if self.max_epoch == 0 {
            return Err(Error::Validation("max_epoch >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch_size >= 1".into()));
        }
        let (b1, b2) = self.adamax_betas;
        if !((0.0..1.0).contains(&b1) && (0.0..1.0).contains(&b2)) {
            return Err(Error::Validation("adamax_betas in [0,1)".into()));
        }
        if !(self.adamax_eps > 0.0) {
            return Err(Error::Validation("adamax_eps > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Sample-weighted mean `L_main` over each epoch's mini-batches.
    pub epoch_losses: Vec<f64>,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.epoch_losses.last().copied().unwrap_or(f64::NAN)
    }
}

/// Runs `max_epoch` epochs of shuffled mini-batches.
pub fn train(
    p: &mut Parameters,
    data: &[Example<'_>],
    tc: &TrainConfig,
    lambda: f64,
    shuffle_seed: u64,
) -> Result<TrainReport> {
    train_with(p, data, tc, lambda, shuffle_seed, |_, _, _| {})
}

/// Like [`train`], calling `on_epoch(epoch, params, epoch_loss)` after each epoch.
pub fn train_with<F>(
    p: &mut Parameters,
    data: &[Example<'_>],
    tc: &TrainConfig,
    lambda: f64,
    shuffle_seed: u64,
    mut on_epoch: F,
) -> Result<TrainReport>
where
    F: FnMut(usize, &Parameters, f64),
{
    tc.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyLabeledSet);
    }
    let mut state = OptimizerState::new(p);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut report = TrainReport::default();
    let mut batch = Vec::with_capacity(tc.batch_size);

    for epoch in 0..tc.max_epoch {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(shuffle_seed, &[rng::tag::SHUFFLE, epoch as u64]));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(tc.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i]));
            let (grads, losses) = backward(p, &batch, lambda, tc.objectives)?;
            loss_sum += losses.main * chunk.len() as f64;
            optimizer_step(p, &grads, &mut state, tc);
        }
        let epoch_loss = loss_sum / data.len() as f64;
        report.epoch_losses.push(epoch_loss);
        on_epoch(epoch, p, epoch_loss);
    }
    Ok(report)
}

#[cfg(test)]
mod tests;
