//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls into the library's probability math or backward pass.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smem::model::{forward, init_model, predict, train, Example, Group, ModelConfig, Parameters, TrainConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `-sum p ln p` over the support.
pub fn entropy_oracle(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            h -= p[i] * p[i].ln();
        }
    }
    h
}

/// `sum p (ln p - ln q)` over the support of `p`.
pub fn kl_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut cross = 0.0;
    let mut neg_h = 0.0;
    for i in 0..p.len() {
        if p[i] > 0.0 {
            if q[i] == 0.0 {
                return f64::INFINITY;
            }
            neg_h += p[i] * p[i].ln();
            cross += p[i] * q[i].ln();
        }
    }
    neg_h - cross
}

/// `H(M) - (H(p) + H(q)) / 2`.
pub fn jsd_oracle(p: &[f64], q: &[f64]) -> f64 {
    let m: Vec<f64> = (0..p.len()).map(|i| 0.5 * p[i] + 0.5 * q[i]).collect();
    entropy_oracle(&m) - 0.5 * (entropy_oracle(p) + entropy_oracle(q))
}

/// Random probability vector, occasionally with exact zeros.
pub fn random_distribution<R: Rng>(r: &mut R, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| if r.random_bool(0.15) { 0.0 } else { r.random::<f64>() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[r.random_range(0..k)] = 1.0;
    }
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// Random raw sigmoid-range vector with at least one positive entry.
pub fn random_raw<R: Rng>(r: &mut R, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k)
        .map(|_| if r.random_bool(0.1) { 0.0 } else { r.random::<f64>() })
        .collect();
    if v.iter().all(|&x| x == 0.0) {
        v[0] = 0.5;
    }
    v
}

pub fn bce_oracle(target: &[f64], pred: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..pred.len() {
        s -= target[i] * pred[i].max(1e-12).ln() + (1.0 - target[i]) * (1.0 - pred[i]).max(1e-12).ln();
    }
    s / pred.len() as f64
}

/// Batch-mean loss that trains group `g`: `L_main` for the main model,
/// `L_v` / `L_q` for the auxiliary heads.
pub fn group_loss(p: &Parameters, batch: &[Example<'_>], lambda: f64, g: Group) -> f64 {
    let mut total = 0.0;
    for ex in batch {
        let a = forward(p, ex.x_v, ex.x_q).unwrap().0;
        total += match g {
            Group::HeadV => bce_oracle(ex.target, &a.y_v) + lambda * bce_oracle(&a.y_main, &a.y_v),
            Group::HeadQ => bce_oracle(ex.target, &a.y_q) + lambda * bce_oracle(&a.y_main, &a.y_q),
            _ => bce_oracle(ex.target, &a.y_main),
        };
    }
    total / batch.len() as f64
}

/// Central-difference gradient of `group_loss` with respect to every
/// parameter of group `g`.
pub fn numeric_gradient(p: &Parameters, batch: &[Example<'_>], lambda: f64, g: Group, h: f64) -> Vec<f64> {
    let n = p.layer(g).num_params();
    let mut work = p.clone();
    (0..n)
        .map(|i| {
            let orig = *work.layer(g).values().nth(i).unwrap();
            *work.layer_mut(g).values_mut().nth(i).unwrap() = orig + h;
            let up = group_loss(&work, batch, lambda, g);
            *work.layer_mut(g).values_mut().nth(i).unwrap() = orig - h;
            let down = group_loss(&work, batch, lambda, g);
            *work.layer_mut(g).values_mut().nth(i).unwrap() = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a - n| / max(|a|, |n|, floor)`; the floor keeps exact zeros (dead
/// units) from dividing by zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

/// Owned features and targets for building `Example` batches.
pub struct Batch {
    pub x_v: Vec<Vec<f64>>,
    pub x_q: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl Batch {
    pub fn random<R: Rng>(r: &mut R, n: usize, dim_v: usize, dim_q: usize, k: usize) -> Self {
        let x_v = (0..n).map(|_| (0..dim_v).map(|_| r.random_range(-1.5..1.5)).collect()).collect();
        let x_q = (0..n).map(|_| (0..dim_q).map(|_| r.random_range(-1.5..1.5)).collect()).collect();
        let y = (0..n)
            .map(|_| {
                let votes: Vec<u32> = {
                    let mut c = vec![0u32; k];
                    for _ in 0..10 {
                        c[r.random_range(0..k)] += 1;
                    }
                    c
                };
                votes.iter().map(|&c| (c as f64 / 3.0).min(1.0)).collect()
            })
            .collect();
        Self { x_v, x_q, y }
    }

    pub fn examples(&self) -> Vec<Example<'_>> {
        (0..self.y.len())
            .map(|i| Example {
                x_v: &self.x_v[i],
                x_q: &self.x_q[i],
                target: &self.y[i],
            })
            .collect()
    }
}

/// Trains on one fixed random set (only the model seed varies) and returns the held-out mean
/// `(BCE(y_main, y_v), BCE(y_main, y_q))`.
pub fn distillation_gap(seed: u64, lambda: f64) -> (f64, f64) {
    let mut r = rng(100);
    let cfg = ModelConfig {
        dim_v: 6,
        dim_q: 6,
        hidden: 12,
        num_classes: 5,
        lambda,
        seed,
    };
    let train_set = Batch::random(&mut r, 120, 6, 6, 5);
    let held_out = Batch::random(&mut r, 60, 6, 6, 5);
    let mut p = init_model(&cfg).unwrap();
    let tc = TrainConfig {
        max_epoch: 40,
        batch_size: 16,
        learning_rate: 0.01,
        ..Default::default()
    };
    train(&mut p, &train_set.examples(), &tc, lambda, seed).unwrap();
    let mut gap_v = 0.0;
    let mut gap_q = 0.0;
    for ex in held_out.examples() {
        let t = predict(&p, ex.x_v, ex.x_q).unwrap();
        gap_v += bce_oracle(t.main.as_slice(), t.visual.as_slice());
        gap_q += bce_oracle(t.main.as_slice(), t.question.as_slice());
    }
    (gap_v / 60.0, gap_q / 60.0)
}
