//! Gradient, normalization and separability checks for the concept classifier.

use cabl_core::logic::LabelId;
use cabl_core::perception::{generate_dataset, softmax, DatasetSpec, PerceptionModel};
use cabl_core::tasks::Task;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-4;
const FD_TOLERANCE: f64 = 1e-5;

/// Relative gap between the analytic gradient and central differences,
/// measured on whole gradient vectors.
fn gradient_gap(model: &PerceptionModel, batch: &[(&[f64], LabelId)]) -> f64 {
    let (_, grad) = model.loss_and_gradient(batch).unwrap();
    let analytic: Vec<f64> = grad.weights.iter().chain(&grad.bias).copied().collect();
    let numeric: Vec<f64> = (0..analytic.len())
        .map(|i| {
            let loss_at = |delta: f64| {
                let mut m = model.clone();
                *m.parameters_mut().nth(i).unwrap() += delta;
                m.loss_and_gradient(batch).unwrap().0
            };
            (loss_at(FD_STEP) - loss_at(-FD_STEP)) / (2.0 * FD_STEP)
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(&analytic).max(norm(&numeric))
}

fn instance() -> impl Strategy<Value = (PerceptionModel, Vec<(Vec<f64>, LabelId)>)> {
    (2usize..6, 1usize..6, 1usize..5).prop_flat_map(|(classes, dim, len)| {
        let model = (
            prop::collection::vec(-2.0f64..2.0, classes * dim),
            prop::collection::vec(-1.0f64..1.0, classes),
        )
            .prop_map(move |(w, b)| PerceptionModel::from_parts(classes, dim, w, b));
        let batch = prop::collection::vec((prop::collection::vec(-3.0f64..3.0, dim), 0..classes), len);
        (model, batch)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn gradient_matches_central_differences((model, batch) in instance()) {
        let batch: Vec<(&[f64], LabelId)> = batch.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        let gap = gradient_gap(&model, &batch);
        prop_assert!(gap < FD_TOLERANCE, "relative gap {gap:e}");
    }

    #[test]
    fn predictions_stay_normalized_through_training((mut model, batch) in instance(), lr in 0.01f64..1.0) {
        let batch: Vec<(&[f64], LabelId)> = batch.iter().map(|(x, l)| (x.as_slice(), *l)).collect();
        for _ in 0..5 {
            model.train_step(&batch, lr).unwrap();
            for (x, _) in &batch {
                let p = model.predict(x).unwrap();
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn softmax_ignores_shifts(logits in prop::collection::vec(-50.0f64..50.0, 1..12), shift in -500.0f64..500.0) {
        let a = softmax(&logits);
        let shifted: Vec<f64> = logits.iter().map(|z| z + shift).collect();
        let b = softmax(&shifted);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn identical_inputs_give_identical_trajectories() {
    let run = || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut model = PerceptionModel::random(4, 6, 0.01, &mut rng);
        let xs: Vec<Vec<f64>> = (0..4).map(|c| (0..6).map(|j| f64::from(u8::from(j == c))).collect()).collect();
        let batch: Vec<(&[f64], LabelId)> = xs.iter().enumerate().map(|(c, x)| (x.as_slice(), c)).collect();
        let losses: Vec<f64> = (0..20).map(|_| model.train_step(&batch, 0.1).unwrap()).collect();
        (losses, model)
    };
    let (la, ma) = run();
    let (lb, mb) = run();
    assert_eq!(la.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), lb.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(ma, mb);
}

/// Nearest-mean accuracy on generated validation positions: the Bayes rule
/// for isotropic Gaussians with equal priors.
fn bayes_accuracy(separation: f64, sigma: f64) -> f64 {
    let task = Task::addition(10, 1).unwrap();
    let spec = DatasetSpec {
        separation,
        sigma,
        train_size: 1,
        val_size: 2000,
        ..DatasetSpec::new(10, 4)
    };
    let data = generate_dataset(&spec, &task, &[]).unwrap();
    let means: Vec<Vec<f64>> = (0..10).map(|c| spec.class_mean(c)).collect();
    let (mut hit, mut total) = (0usize, 0usize);
    for ex in &data.validation {
        for (x, &truth) in ex.features.iter().zip(&ex.concepts) {
            let dist = |m: &Vec<f64>| m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            let guess = (0..10).min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b]))).unwrap();
            hit += usize::from(guess == truth);
            total += 1;
        }
    }
    hit as f64 / total as f64
}

#[test]
fn moderate_separation_is_neither_trivial_nor_hopeless() {
    let acc = bayes_accuracy(3.0, 1.0);
    assert!(acc > 0.6 && acc < 0.99, "Bayes accuracy {acc}");
}

#[test]
fn vanishing_noise_is_separable() {
    assert_eq!(bayes_accuracy(3.0, 1e-6), 1.0);
}
