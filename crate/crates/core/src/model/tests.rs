use super::*;
use std::f64::consts::LN_2;

fn cfg(seed: u64) -> ModelConfig {
    ModelConfig {
        dim_v: 4,
        dim_q: 3,
        hidden: 8,
        num_classes: 5,
        lambda: 1.0,
        seed,
    }
}

fn raw(v: &[f64]) -> RawOutput {
    RawOutput::new(v.to_vec()).unwrap()
}

#[test]
fn init_is_deterministic_and_bounded() {
    let a = init_model(&cfg(1)).unwrap();
    let b = init_model(&cfg(1)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, init_model(&cfg(2)).unwrap());
    assert!(a.enc_v.weight.iter().all(|w| w.abs() <= 0.5));
    assert!(Group::ALL.iter().all(|&g| a.layer(g).bias.iter().all(|&b| b == 0.0)));
    assert_eq!(a.fusion.cols, 16);
}

#[test]
fn init_rejects_bad_config() {
    let mut c = cfg(0);
    c.num_classes = 1;
    assert!(init_model(&c).is_err());
    c = cfg(0);
    c.lambda = -1.0;
    assert!(init_model(&c).is_err());
}

#[test]
fn zero_parameters_output_one_half() {
    let p = Parameters::zeros(4, 3, 8, 5);
    let t = predict(&p, &[1.0, -2.0, 3.0, 0.5], &[0.1, 0.2, 0.3]).unwrap();
    for out in [&t.main, &t.visual, &t.question] {
        assert!(out.as_slice().iter().all(|&y| y == 0.5));
    }
}

#[test]
fn forward_rejects_bad_widths() {
    let p = init_model(&cfg(0)).unwrap();
    assert!(matches!(
        forward(&p, &[0.0; 3], &[0.0; 3]),
        Err(Error::ShapeMismatch { what: "x_v", .. })
    ));
    assert!(matches!(
        forward(&p, &[0.0; 4], &[0.0; 4]),
        Err(Error::ShapeMismatch { what: "x_q", .. })
    ));
}

#[test]
fn branches_depend_on_own_modality_only() {
    let p = init_model(&cfg(3)).unwrap();
    let xv = [0.3, -0.2, 1.1, 0.7];
    let a = predict(&p, &xv, &[0.5, 0.5, -0.5]).unwrap();
    let b = predict(&p, &xv, &[-2.0, 1.5, 3.0]).unwrap();
    assert_eq!(a.visual, b.visual);
    assert_ne!(a.question, b.question);
    let xq = [0.1, 0.2, 0.3];
    let c = predict(&p, &[1.0, 1.0, 1.0, 1.0], &xq).unwrap();
    let d = predict(&p, &[-1.0, 2.0, 0.0, 0.5], &xq).unwrap();
    assert_eq!(c.question, d.question);
}

#[test]
fn forward_is_deterministic() {
    let p = init_model(&cfg(9)).unwrap();
    let x = ([0.1, 0.2, 0.3, 0.4], [1.0, 0.0, -1.0]);
    assert_eq!(forward(&p, &x.0, &x.1).unwrap(), forward(&p, &x.0, &x.1).unwrap());
}

#[test]
fn loss_main_examples() {
    assert!(loss_main(&raw(&[1.0, 0.0, 1.0]), &[1.0, 0.0, 1.0]).unwrap() <= 1e-11);
    assert!((loss_main(&raw(&[0.5, 0.5]), &[1.0, 0.0]).unwrap() - LN_2).abs() < 1e-15);
    let v = loss_main(&raw(&[0.9, 0.1]), &[1.0, 0.0]).unwrap();
    assert!((v - 0.1053605).abs() < 1e-7, "{v}");
    // Saturated wrong predictions stay finite under the clamp.
    let worst = loss_main(&raw(&[0.0, 1.0]), &[1.0, 0.0]).unwrap();
    assert!(worst.is_finite() && (worst - (-LOG_EPS.ln())).abs() < 1e-9);
}

#[test]
fn loss_branch_examples() {
    let y = [1.0, 0.0];
    let ym = raw(&[0.7, 0.2]);
    let yh = raw(&[0.4, 0.4]);
    assert_eq!(loss_branch(&ym, &y, &yh, 0.0).unwrap(), bce(&y, ym.as_slice()));
    assert!(loss_branch(&raw(&[1.0, 0.0]), &y, &raw(&[1.0, 0.0]), 3.0).unwrap() <= 1e-10);
    // BCE(y, y_m) = ln 2 and BCE(y_hat, y_m) = ln 2 at matching halves.
    let v = loss_branch(&raw(&[0.5, 0.5]), &y, &raw(&[0.5, 0.5]), 1.0).unwrap();
    assert!((v - 1.3862944).abs() < 1e-7, "{v}");
}

fn toy_batch(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng::stream(seed, &[99]);
    let xv = (0..n).map(|_| (0..4).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let xq = (0..n).map(|_| (0..3).map(|_| r.random_range(-1.0..1.0)).collect()).collect();
    let y = (0..n)
        .map(|i| {
            let mut t = vec![0.0; 5];
            t[i % 5] = 1.0;
            t[(i + 2) % 5] = 1.0 / 3.0;
            t
        })
        .collect();
    (xv, xq, y)
}

fn examples<'a>(d: &'a (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>)) -> Vec<Example<'a>> {
    (0..d.0.len())
        .map(|i| Example {
            x_v: &d.0[i],
            x_q: &d.1[i],
            target: &d.2[i],
        })
        .collect()
}

#[test]
fn backward_rejects_empty_batch() {
    let p = init_model(&cfg(0)).unwrap();
    assert!(matches!(backward(&p, &[], 1.0, Objectives::default()), Err(Error::EmptyLabeledSet)));
}

#[test]
fn branch_gradients_never_touch_trunk() {
    let p = init_model(&cfg(4)).unwrap();
    let d = toy_batch(6, 1);
    let (g, _) = backward(&p, &examples(&d), 2.0, Objectives::BRANCHES_ONLY).unwrap();
    for grp in Group::MAIN {
        assert!(g.layer(grp).values().all(|&v| v == 0.0), "{}", grp.name());
    }
    assert!(g.head_v.values().any(|&v| v != 0.0));
    assert!(g.head_q.values().any(|&v| v != 0.0));
}

#[test]
fn zero_lambda_branch_gradient_is_plain_bce() {
    let p = init_model(&cfg(5)).unwrap();
    let d = toy_batch(4, 2);
    let batch = examples(&d);
    let (g, _) = backward(&p, &batch, 0.0, Objectives::default()).unwrap();
    // Closed form for sigmoid + mean BCE: (y_v - y) z_v^T / (N K).
    let mut expect = Dense::zeros(5, 8);
    for ex in &batch {
        let a = forward(&p, ex.x_v, ex.x_q).unwrap().0;
        for r in 0..5 {
            let d = (a.y_v[r] - ex.target[r]) / 20.0;
            expect.bias[r] += d;
            for c in 0..8 {
                expect.weight[r * 8 + c] += d * a.z_v[c];
            }
        }
    }
    for (x, y) in g.head_v.values().zip(expect.values()) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn sgd_step_is_plain_descent() {
    let mut p = Parameters::zeros(1, 1, 1, 2);
    let mut grads = p.zeros_like();
    grads.head_main.weight[0] = 1.0;
    let tc = TrainConfig {
        learning_rate: 0.1,
        optimizer: OptimizerKind::Sgd,
        ..Default::default()
    };
    let mut st = OptimizerState::new(&p);
    optimizer_step(&mut p, &grads, &mut st, &tc);
    assert_eq!(p.head_main.weight[0], -0.1);
    assert_eq!(p.head_main.weight[1], 0.0);
}

#[test]
fn zero_gradient_leaves_parameters() {
    let mut p = init_model(&cfg(6)).unwrap();
    let before = p.clone();
    let grads = p.zeros_like();
    let mut st = OptimizerState::new(&p);
    for kind in [OptimizerKind::Adamax, OptimizerKind::Sgd] {
        let tc = TrainConfig {
            optimizer: kind,
            ..Default::default()
        };
        optimizer_step(&mut p, &grads, &mut st, &tc);
    }
    assert_eq!(p, before);
}

/// Textbook Adamax on one scalar, written out step by step.
fn adamax_reference(grads: &[f64], lr: f64, b1: f64, b2: f64, eps: f64) -> f64 {
    let (mut theta, mut m, mut u) = (0.0f64, 0.0f64, 0.0f64);
    for (i, g) in grads.iter().enumerate() {
        let t = (i + 1) as i32;
        m = b1 * m + (1.0 - b1) * g;
        u = if b2 * u > g.abs() { b2 * u } else { g.abs() };
        let m_hat = m / (1.0 - b1.powi(t));
        theta -= lr * m_hat / (u + eps);
    }
    theta
}

#[test]
fn adamax_matches_reference_recurrence() {
    let tc = TrainConfig::default();
    let mut p = Parameters::zeros(1, 1, 1, 2);
    let mut st = OptimizerState::new(&p);
    let mut grads = p.zeros_like();
    grads.head_q.bias[1] = 1.0;
    optimizer_step(&mut p, &grads, &mut st, &tc);
    let expect = adamax_reference(&[1.0], 0.002, 0.9, 0.999, 1e-8);
    // lr * (0.1 / 0.1) / (1 + 1e-8)
    assert!((expect + 0.002 / (1.0 + 1e-8)).abs() < 1e-18);
    assert!((p.head_q.bias[1] - expect).abs() < 1e-18);
    assert_eq!(st.steps(Group::HeadQ), 1);

    let seq = [1.0, -0.5, 0.25, 2.0, -3.0, 0.0, 0.1];
    let mut p = Parameters::zeros(1, 1, 1, 2);
    let mut st = OptimizerState::new(&p);
    for g in seq {
        grads.head_q.bias[1] = g;
        optimizer_step(&mut p, &grads, &mut st, &tc);
    }
    let expect = adamax_reference(&seq, 0.002, 0.9, 0.999, 1e-8);
    assert!((p.head_q.bias[1] - expect).abs() < 1e-15);
}

#[test]
fn train_rejects_bad_inputs() {
    let mut p = init_model(&cfg(0)).unwrap();
    let tc = TrainConfig::default();
    assert!(matches!(train(&mut p, &[], &tc, 1.0, 0), Err(Error::EmptyLabeledSet)));
    let d = toy_batch(4, 0);
    let bad = TrainConfig {
        max_epoch: 0,
        ..Default::default()
    };
    assert!(train(&mut p, &examples(&d), &bad, 1.0, 0).is_err());
}

#[test]
fn zero_learning_rate_freezes() {
    let mut p = init_model(&cfg(7)).unwrap();
    let before = p.clone();
    let d = toy_batch(10, 3);
    let tc = TrainConfig {
        learning_rate: 0.0,
        max_epoch: 1,
        batch_size: 3,
        ..Default::default()
    };
    let report = train(&mut p, &examples(&d), &tc, 1.0, 11).unwrap();
    assert_eq!(p, before);
    assert_eq!(report.epoch_losses.len(), 1);
}

#[test]
fn branches_only_training_keeps_main_model() {
    let mut p = init_model(&cfg(8)).unwrap();
    let before = p.clone();
    let d = toy_batch(10, 4);
    let tc = TrainConfig {
        max_epoch: 100,
        batch_size: 10,
        learning_rate: 0.05,
        objectives: Objectives::BRANCHES_ONLY,
        ..Default::default()
    };
    train(&mut p, &examples(&d), &tc, 1.0, 1).unwrap();
    for g in Group::MAIN {
        assert_eq!(p.layer(g), before.layer(g), "{}", g.name());
    }
    assert_ne!(p.head_v, before.head_v);
    assert_ne!(p.head_q, before.head_q);
}

#[test]
fn training_is_deterministic_and_reduces_loss() {
    let d = toy_batch(20, 5);
    let tc = TrainConfig {
        max_epoch: 30,
        batch_size: 4,
        learning_rate: 0.02,
        ..Default::default()
    };
    let mut a = init_model(&cfg(1)).unwrap();
    let mut b = init_model(&cfg(1)).unwrap();
    let ra = train(&mut a, &examples(&d), &tc, 1.0, 3).unwrap();
    let rb = train(&mut b, &examples(&d), &tc, 1.0, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert!(ra.final_loss() < ra.epoch_losses[0]);
    let mut c = init_model(&cfg(1)).unwrap();
    train(&mut c, &examples(&d), &tc, 1.0, 4).unwrap();
    assert_ne!(a, c, "shuffle seed should change the trajectory");
}

#[test]
fn checkpoint_round_trip_and_rejects_garbage() {
    let p = init_model(&cfg(12)).unwrap();
    let mut buf = Vec::new();
    write_parameters(&p, &mut buf).unwrap();
    assert_eq!(&buf[..8], CHECKPOINT_MAGIC);
    assert_eq!(buf.len(), 8 + 32 + 8 * p.num_params());
    assert_eq!(read_parameters(buf.as_slice()).unwrap(), p);

    let mut bad = buf.clone();
    bad[0] = b'X';
    assert!(read_parameters(bad.as_slice()).is_err());
    assert!(read_parameters(&buf[..buf.len() - 1]).is_err());
    let mut long = buf.clone();
    long.push(0);
    assert!(read_parameters(long.as_slice()).is_err());
}
