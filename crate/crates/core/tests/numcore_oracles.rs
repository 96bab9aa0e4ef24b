mod common;

use common::*;
use hadcl::numcore::{
    per_sample_cross_entropy, read_checkpoint, write_checkpoint, AdamConfig, Dense, Gradients, Matrix, MlpModel,
    OptimizerState,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn forward_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let d = rng.random_range(1..7);
        let h = rng.random_range(1..9);
        let c = rng.random_range(2..5);
        let model = MlpModel::<f64>::new(&[d, h, h, c], &mut rng).unwrap();
        let x = random_matrix(rng.random_range(1..10), d, 3.0, &mut rng);
        let fast = model.forward(&x).unwrap();
        let slow = naive_forward(&model, &x);
        for (i, row) in slow.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((fast.get(i, j) - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}

#[test]
fn cross_entropy_matches_naive_softmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let b = rng.random_range(1..8);
        let c = rng.random_range(2..6);
        let logits = random_matrix(b, c, 8.0, &mut rng);
        let labels: Vec<usize> = (0..b).map(|_| rng.random_range(0..c)).collect();
        let fast = per_sample_cross_entropy(&logits, &labels).unwrap();
        for i in 0..b {
            let slow = naive_cross_entropy(logits.row(i), labels[i]);
            assert!((fast[i] - slow).abs() < 1e-10, "{} vs {slow}", fast[i]);
            assert!(fast[i] >= 0.0);
        }
    }
}

#[test]
fn cross_entropy_examples() {
    let z = Matrix::from_rows(&[vec![0.0, 0.0], vec![1000.0, -1000.0]]).unwrap();
    let l = per_sample_cross_entropy(&z, &[1, 0]).unwrap();
    assert!((l[0] - std::f64::consts::LN_2).abs() < 1e-15);
    assert!(l[1].abs() < 1e-300);
    assert!(per_sample_cross_entropy(&z, &[2, 0]).is_err());
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for draw in 0..100 {
        let err = gradient_check_draw(&mut rng);
        assert!(err < 1e-4, "draw {draw}: relative error {err}");
    }
}

#[test]
fn single_sample_mask_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let model = MlpModel::<f64>::new(&[3, 5, 5, 2], &mut rng).unwrap();
    let x = random_matrix(4, 3, 2.0, &mut rng);
    let y = vec![0, 1, 1, 0];
    for i in 0..4 {
        let (g, _) = model.backward(&x, &y, Some(&[i])).unwrap();
        let fd = fd_gradient(&model, &x, &y, &[i], 1e-6);
        for (a, n) in g.blocks().iter().zip(&fd) {
            assert!(norm_relative_error(a, n) < 1e-5);
        }
    }
}

#[test]
fn masked_gradient_is_mean_of_single_sample_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let model = MlpModel::<f64>::new(&[4, 6, 6, 3], &mut rng).unwrap();
        let b = 8;
        let x = random_matrix(b, 4, 2.0, &mut rng);
        let y: Vec<usize> = (0..b).map(|_| rng.random_range(0..3)).collect();
        let mask: Vec<usize> = (0..b - 1).filter(|_| rng.random_bool(0.5)).chain([b - 1]).collect();
        let (g, loss) = model.backward(&x, &y, Some(&mask)).unwrap();
        let singles: Vec<_> = mask.iter().map(|&i| model.backward(&x, &y, Some(&[i])).unwrap()).collect();
        let mean_loss = singles.iter().map(|(_, l)| l).sum::<f64>() / mask.len() as f64;
        assert!((loss - mean_loss).abs() < 1e-10);
        for (bi, block) in g.blocks().iter().enumerate() {
            for (j, v) in block.iter().enumerate() {
                let avg = singles.iter().map(|(s, _)| s.blocks()[bi][j]).sum::<f64>() / mask.len() as f64;
                assert!((v - avg).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn duplicated_sample_leaves_mean_gradient_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let model = MlpModel::<f64>::new(&[3, 4, 4, 2], &mut rng).unwrap();
    let x = random_matrix(3, 3, 2.0, &mut rng);
    let dup = Matrix::from_rows(&[x.row(0).to_vec(), x.row(1).to_vec(), x.row(2).to_vec(), x.row(1).to_vec()]).unwrap();
    let y = [0, 1, 0];
    let (single, l1) = model.backward(&x, &y, Some(&[1])).unwrap();
    let (both, l2) = model.backward(&dup, &[0, 1, 0, 1], Some(&[1, 3])).unwrap();
    assert!((l1 - l2).abs() < 1e-15);
    for (a, b) in single.blocks().iter().zip(both.blocks()) {
        for (u, v) in a.iter().zip(b) {
            assert!((u - v).abs() < 1e-15);
        }
    }
}

#[test]
fn empty_mask_is_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let model = MlpModel::<f64>::new(&[2, 3, 3, 2], &mut rng).unwrap();
    let x = random_matrix(2, 2, 1.0, &mut rng);
    assert!(model.backward(&x, &[0, 1], Some(&[])).is_err());
}

/// Quadratic bowl `½‖θ − c‖²`: gradient is `θ − c`.
fn bowl_gradient(model: &MlpModel<f64>, target: f64) -> Gradients<f64> {
    Gradients {
        layers: model
            .layers()
            .iter()
            .map(|l| Dense {
                weights: Matrix::from_vec(
                    l.weights.rows(),
                    l.weights.cols(),
                    l.weights.as_slice().iter().map(|w| w - target).collect(),
                )
                .unwrap(),
                bias: l.bias.iter().map(|b| b - target).collect(),
            })
            .collect(),
    }
}

#[test]
fn adam_matches_hand_unrolled_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let cfg = AdamConfig {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
        weight_decay: 1e-2,
    };
    let lr = 0.05;
    let target = 0.3;
    let mut model = MlpModel::<f64>::new(&[2, 3, 3, 2], &mut rng).unwrap();
    let mut theta: Vec<f64> = model.blocks().concat();
    let mut m = vec![0.0; theta.len()];
    let mut v = vec![0.0; theta.len()];
    let mut state = OptimizerState::new(&model, cfg);
    for step in 1..=10 {
        let g = bowl_gradient(&model, target);
        state.step(&mut model, &g, lr).unwrap();
        for i in 0..theta.len() {
            let gi = theta[i] - target;
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
            let mh = m[i] / (1.0 - cfg.beta1.powi(step));
            let vh = v[i] / (1.0 - cfg.beta2.powi(step));
            theta[i] = theta[i] * (1.0 - lr * cfg.weight_decay) - lr * mh / (vh.sqrt() + cfg.eps);
        }
        for (a, b) in model.blocks().concat().iter().zip(&theta) {
            assert!((a - b).abs() < 1e-10, "step {step}: {a} vs {b}");
        }
        assert_eq!(state.step_count(), step as u64);
    }
}

proptest! {
    #[test]
    fn checkpoint_round_trip_is_bit_exact(seed in any::<u64>(), d in 1usize..6, h in 1usize..6, c in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = MlpModel::<f64>::new(&[d, h, h, c], &mut rng).unwrap();
        let mut bytes = Vec::new();
        write_checkpoint(&model, &mut bytes).unwrap();
        let back: MlpModel<f64> = read_checkpoint(bytes.as_slice()).unwrap();
        let bits = |m: &MlpModel<f64>| m.blocks().concat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&model), bits(&back));
        prop_assert_eq!(model.dims(), back.dims());
    }

    #[test]
    fn forward_is_finite_on_finite_input(seed in any::<u64>(), scale in 0.0f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = MlpModel::<f64>::new(&[3, 4, 4, 2], &mut rng).unwrap();
        let x = random_matrix(5, 3, scale.max(1e-9), &mut rng);
        prop_assert!(model.forward(&x).unwrap().all_finite());
    }
}
