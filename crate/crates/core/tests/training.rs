use ndarray::Array4;
use pefnn_core::kernel::KernelMode;
use pefnn_core::net::{Model, ModelConfig};
use pefnn_core::training::{
    cosine_lr, objective, relative_l2_loss, train_markov, train_recurrent, Adam, Strategy, TrainConfig, Trainer,
};
use pefnn_core::{Error, Field, Trajectory};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn smooth_field(n: usize, rng: &mut ChaCha8Rng) -> Array4<f64> {
    let modes: Vec<(f64, f64, f64, f64)> = (0..6)
        .map(|_| {
            (
                rng.random_range(-2..=2) as f64,
                rng.random_range(-2..=2) as f64,
                rng.random_range(-0.4..0.4),
                rng.random_range(0.0..2.0 * PI),
            )
        })
        .collect();
    Array4::from_shape_fn((1, 1, n, n), |(_, _, y, x)| {
        let (y, x) = (y as f64 / n as f64, x as f64 / n as f64);
        modes.iter().map(|&(ky, kx, a, p)| a * (2.0 * PI * (ky * y + kx * x) + p).cos()).sum::<f64>() + 0.3
    })
}

/// Trajectories of `u <- u + 0.1 u^2`.
fn quadratic_system(n_traj: usize, slices: usize, n: usize, seed: u64) -> Vec<Trajectory> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_traj)
        .map(|_| {
            let mut u = Field::new(smooth_field(n, &mut rng));
            let mut frames = vec![u.clone()];
            for _ in 1..slices {
                u = Field::new(u.data.mapv(|v| v + 0.1 * v * v));
                frames.push(u.clone());
            }
            Trajectory::from_frames(&frames, 1.0, vec!["u".into()]).unwrap()
        })
        .collect()
}

fn small_model(seed: u64) -> Model {
    let cfg = ModelConfig {
        layers: 2,
        latent: 4,
        modes: 3,
        kernel: KernelMode::SingleRotation,
        groups: 1,
        decoder_hidden: 8,
        ..ModelConfig::default()
    };
    Model::new(cfg, seed).unwrap()
}

fn train_cfg(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, batch_size: 20, lr: 5e-3, weight_decay: 0.0, seed: 3, ..TrainConfig::default() }
}

#[test]
fn relative_l2_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = Field::new(Array4::from_shape_fn((3, 2, 4, 4), |_| rng.random_range(-1.0..1.0)));
    assert_eq!(relative_l2_loss(&t, &t).unwrap().0, 0.0);
    let twice = Field::new(t.data.mapv(|v| 2.0 * v));
    assert!((relative_l2_loss(&twice, &t).unwrap().0 - 1.0).abs() < 1e-14);
    let zero = Field::zeros(3, 2, 4, 4);
    assert!((relative_l2_loss(&zero, &t).unwrap().0 - 1.0).abs() < 1e-14);
    assert!(matches!(relative_l2_loss(&t, &zero), Err(Error::ZeroReference { sample: 0 })));
}

#[test]
fn relative_l2_gradient_matches_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let t = Field::new(Array4::from_shape_fn((2, 1, 3, 3), |_| rng.random_range(-1.0..1.0)));
    let p = Field::new(Array4::from_shape_fn((2, 1, 3, 3), |_| rng.random_range(-1.0..1.0)));
    let (_, g) = relative_l2_loss(&p, &t).unwrap();
    for i in 0..18 {
        let mut a = p.clone();
        a.data.as_slice_mut().unwrap()[i] += 1e-6;
        let mut b = p.clone();
        b.data.as_slice_mut().unwrap()[i] -= 1e-6;
        let fd = (relative_l2_loss(&a, &t).unwrap().0 - relative_l2_loss(&b, &t).unwrap().0) / 2e-6;
        assert!((fd - g.data.as_slice().unwrap()[i]).abs() < 1e-8);
    }
}

#[test]
fn cosine_endpoints() {
    assert_eq!(cosine_lr(1e-3, 0, 50), 1e-3);
    assert_eq!(cosine_lr(1e-3, 50, 50), 0.0);
    assert!((cosine_lr(1e-3, 25, 50) - 5e-4).abs() < 1e-18);
}

#[test]
fn adam_zero_gradient() {
    let p0 = vec![1.0, -2.0, 0.5];
    let mut p = p0.clone();
    let cfg = TrainConfig { weight_decay: 0.0, ..TrainConfig::default() };
    Adam::new(3).step(&mut p, &[0.0; 3], 1e-2, &cfg);
    assert_eq!(p, p0);

    let cfg = TrainConfig { weight_decay: 0.1, ..TrainConfig::default() };
    Adam::new(3).step(&mut p, &[0.0; 3], 1e-2, &cfg);
    for (a, b) in p.iter().zip(&p0) {
        assert!((a - b * (1.0 - 1e-3)).abs() < 1e-15);
    }
}

#[test]
fn adam_first_step_is_signed_lr() {
    let mut p = vec![0.0, 0.0];
    let cfg = TrainConfig { weight_decay: 0.0, eps: 1e-12, ..TrainConfig::default() };
    Adam::new(2).step(&mut p, &[3.0, -0.01], 0.1, &cfg);
    assert!((p[0] + 0.1).abs() < 1e-9 && (p[1] - 0.1).abs() < 1e-9);
}

#[test]
fn zero_epochs_leave_model_unchanged() {
    let data = quadratic_system(2, 3, 8, 4);
    let model = small_model(5);
    let out = train_markov(model.clone(), &data, &[], &train_cfg(0)).unwrap();
    assert_eq!(out.model, model);
    assert!(out.history.is_empty());
}

#[test]
fn markov_learns_quadratic_system() {
    let data = quadratic_system(40, 6, 16, 6);
    let valid = quadratic_system(4, 6, 16, 7);
    let out = train_markov(small_model(8), &data, &valid, &train_cfg(200)).unwrap();
    let h = &out.history.records;
    assert!(h.iter().all(|r| r.train_loss.is_finite() && r.valid_loss.unwrap().is_finite()));
    let last = h.last().unwrap();
    assert!(last.train_loss <= h[0].train_loss);
    assert!(last.train_loss < 1e-2, "final train loss {}", last.train_loss);
    assert_eq!(last.lr, cosine_lr(5e-3, 199, 200));
    let (best_epoch, _) = out.best.unwrap();
    assert_eq!(Some(best_epoch), out.history.best().map(|b| b.0));
}

#[test]
fn recurrent_learns_quadratic_rollout() {
    let data = quadratic_system(20, 6, 16, 9);
    let cfg = TrainConfig { batch_size: 5, ..train_cfg(200) };
    let out = train_recurrent(small_model(10), &data, &[], &cfg, Some(5)).unwrap();
    let last = out.history.records.last().unwrap();
    assert!(last.train_loss < 5e-2, "final rollout loss {}", last.train_loss);
}

#[test]
fn recurrent_with_one_step_equals_markov() {
    let data = quadratic_system(6, 2, 8, 11);
    let model = small_model(12);
    let (lm, gm) = objective(&model, &data, Strategy::Markov, 1, 4).unwrap();
    let (lr, gr) = objective(&model, &data, Strategy::Recurrent, 1, 4).unwrap();
    assert!((lm - lr).abs() < 1e-12);
    assert!(gm.iter().zip(&gr).all(|(a, b)| (a - b).abs() < 1e-12));

    let a = train_markov(model.clone(), &data, &[], &train_cfg(3)).unwrap();
    let b = train_recurrent(model, &data, &[], &train_cfg(3), Some(1)).unwrap();
    for (x, y) in a.history.records.iter().zip(&b.history.records) {
        assert!((x.train_loss - y.train_loss).abs() < 1e-12);
    }
}

#[test]
fn rollout_gradient_matches_differences() {
    let data = quadratic_system(2, 4, 8, 13);
    let model = small_model(14);
    let (_, g) = objective(&model, &data, Strategy::Recurrent, 3, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let eps = 1e-5;
    for _ in 0..30 {
        let i = rng.random_range(0..model.num_params());
        let mut a = model.clone();
        a.params.values[i] += eps;
        let mut b = model.clone();
        b.params.values[i] -= eps;
        let fd = (objective(&a, &data, Strategy::Recurrent, 3, 2).unwrap().0
            - objective(&b, &data, Strategy::Recurrent, 3, 2).unwrap().0)
            / (2.0 * eps);
        let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-4);
        assert!(err < 1e-4, "slot {i}: fd {fd} analytic {}", g[i]);
    }
}

#[test]
fn training_is_deterministic() {
    let data = quadratic_system(6, 4, 8, 16);
    let run = || train_markov(small_model(17), &data, &data[..2], &TrainConfig { batch_size: 4, ..train_cfg(4) }).unwrap();
    let (a, b) = (run(), run());
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    assert_eq!(a.history.to_csv().lines().next(), Some("epoch,lr,train_loss,valid_loss"));
}

#[test]
fn resume_matches_uninterrupted_run() {
    let data = quadratic_system(4, 4, 8, 18);
    let cfg = TrainConfig { batch_size: 3, ..train_cfg(4) };
    let full = train_markov(small_model(19), &data, &[], &cfg).unwrap();

    let mut first = Trainer::new(small_model(19), cfg.clone()).unwrap();
    first.run_epoch(&data, &[]).unwrap();
    first.run_epoch(&data, &[]).unwrap();
    let mut second = Trainer::resume(first.model, cfg, first.optimizer, first.history).unwrap();
    second.run(&data, &[]).unwrap();
    assert_eq!(second.history, full.history);
    assert_eq!(second.model, full.model);
}

#[test]
fn divergence_reports_epoch() {
    let data = quadratic_system(2, 3, 8, 20);
    let mut model = small_model(21);
    model.config.fusion_scale = 1e200;
    let err = train_markov(model, &data, &[], &train_cfg(2)).unwrap_err();
    assert!(matches!(err, Error::NonFiniteEpoch { epoch: 0 }), "{err:?}");
}

#[test]
fn input_noise_is_seeded_and_resumable() {
    let data = quadratic_system(4, 4, 8, 22);
    let cfg = TrainConfig { batch_size: 3, input_noise: 0.05, ..train_cfg(4) };
    let clean = train_markov(small_model(23), &data, &data[..1], &TrainConfig { input_noise: 0.0, ..cfg.clone() }).unwrap();
    let noisy = train_markov(small_model(23), &data, &data[..1], &cfg).unwrap();
    assert_ne!(clean.history, noisy.history);
    assert_eq!(noisy.history, train_markov(small_model(23), &data, &data[..1], &cfg).unwrap().history);

    let mut first = Trainer::new(small_model(23), cfg.clone()).unwrap();
    first.run_epoch(&data, &data[..1]).unwrap();
    let mut second = Trainer::resume(first.model, cfg.clone(), first.optimizer, first.history).unwrap();
    second.run(&data, &data[..1]).unwrap();
    assert_eq!(second.history, noisy.history);

    let bad = TrainConfig { input_noise: -1.0, ..cfg };
    assert!(matches!(bad.validate(), Err(Error::Config(_))));
}
