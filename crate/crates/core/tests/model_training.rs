mod common;

use common::{numeric_gradient, relative_error, Batch};
use rand::Rng;
use smem::dataset::argmax;
use smem::model::{
    backward, init_model, load_parameters, predict, save_parameters, train, Example, Group, ModelConfig,
    Objectives, TrainConfig,
};

fn config(r: &mut impl Rng, seed: u64, lambda: f64) -> ModelConfig {
    ModelConfig {
        dim_v: r.random_range(2..=5),
        dim_q: r.random_range(2..=5),
        hidden: r.random_range(3..=6),
        num_classes: r.random_range(2..=5),
        lambda,
        seed,
    }
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut r = common::rng(11);
    for trial in 0..4u64 {
        for lambda in [0.0, 0.5, 2.0] {
            let cfg = config(&mut r, trial, lambda);
            let p = init_model(&cfg).unwrap();
            let data = Batch::random(&mut r, 5, cfg.dim_v, cfg.dim_q, cfg.num_classes);
            let batch = data.examples();
            let (grads, _) = backward(&p, &batch, lambda, Objectives::default()).unwrap();
            for g in Group::ALL {
                let numeric = numeric_gradient(&p, &batch, lambda, g, 1e-5);
                for (i, (a, n)) in grads.layer(g).values().zip(&numeric).enumerate() {
                    let err = relative_error(*a, *n);
                    assert!(err < 1e-4, "trial {trial} lambda {lambda} {} [{i}]: {a} vs {n}", g.name());
                }
            }
        }
    }
}

#[test]
fn main_trajectory_ignores_auxiliary_heads() {
    let mut r = common::rng(5);
    let cfg = ModelConfig {
        dim_v: 4,
        dim_q: 3,
        hidden: 6,
        num_classes: 4,
        lambda: 2.0,
        seed: 1,
    };
    let data = Batch::random(&mut r, 40, 4, 3, 4);
    let tc = |objectives| TrainConfig {
        max_epoch: 10,
        batch_size: 8,
        learning_rate: 0.01,
        objectives,
        ..Default::default()
    };
    let mut with = init_model(&cfg).unwrap();
    let mut without = with.clone();
    train(&mut with, &data.examples(), &tc(Objectives::default()), 2.0, 9).unwrap();
    train(&mut without, &data.examples(), &tc(Objectives::MAIN_ONLY), 2.0, 9).unwrap();
    for g in Group::MAIN {
        let a: Vec<u64> = with.layer(g).values().map(|v| v.to_bits()).collect();
        let b: Vec<u64> = without.layer(g).values().map(|v| v.to_bits()).collect();
        assert_eq!(a, b, "{}", g.name());
    }
}

#[test]
fn separable_toy_set_is_learned_perfectly() {
    // Two classes split by the sign of the first visual feature.
    let mut r = common::rng(3);
    let n = 60;
    let mut x_v = Vec::new();
    let mut x_q = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let c = i % 2;
        let sign = if c == 0 { -1.0 } else { 1.0 };
        x_v.push(vec![sign * r.random_range(0.5..2.0), r.random_range(-1.0..1.0)]);
        x_q.push(vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]);
        let mut t = vec![0.0; 2];
        t[c] = 1.0;
        y.push(t);
    }
    let batch: Vec<Example<'_>> = (0..n)
        .map(|i| Example {
            x_v: &x_v[i],
            x_q: &x_q[i],
            target: &y[i],
        })
        .collect();
    let cfg = ModelConfig {
        dim_v: 2,
        dim_q: 2,
        hidden: 8,
        num_classes: 2,
        lambda: 1.0,
        seed: 4,
    };
    let mut p = init_model(&cfg).unwrap();
    let tc = TrainConfig {
        max_epoch: 200,
        batch_size: 10,
        learning_rate: 0.01,
        ..Default::default()
    };
    let report = train(&mut p, &batch, &tc, 1.0, 2).unwrap();
    assert_eq!(report.epoch_losses.len(), 200);
    let correct = (0..n)
        .filter(|&i| argmax(predict(&p, &x_v[i], &x_q[i]).unwrap().main.as_slice()) == i % 2)
        .count();
    assert_eq!(correct, n);
}

#[test]
fn distillation_pulls_branches_toward_main_head() {
    let wins = (0..5u64)
        .filter(|&s| {
            let (v10, q10) = common::distillation_gap(s, 10.0);
            let (v0, q0) = common::distillation_gap(s, 0.0);
            v10 < v0 && q10 < q0
        })
        .count();
    assert!(wins >= 4, "lambda=10 won {wins}/5 seeds");
}

#[test]
fn checkpoint_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.bin");
    let p = init_model(&ModelConfig {
        dim_v: 3,
        dim_q: 2,
        hidden: 4,
        num_classes: 3,
        lambda: 0.0,
        seed: 8,
    })
    .unwrap();
    save_parameters(&p, &path).unwrap();
    assert_eq!(load_parameters(&path).unwrap(), p);
}
