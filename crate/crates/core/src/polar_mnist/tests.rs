use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::gradcheck::{finite_diff_grad_check, DEFAULT_STEP};
use crate::numerics::Matrix;
use crate::pca::bank_transform;
use crate::train::{flatten_params, load_flat_params, TrainingConfig};

/// Two Gaussian clouds in `dim` dimensions separated along every axis.
fn blobs(n: usize, dim: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
    let x = Matrix::from_fn(n, dim, |r, _| {
        let shift = if labels[r] == 0 { -1.0 } else { 1.0 };
        shift + rng.gen_range(-0.5..0.5)
    });
    (x, labels)
}

fn digit_like(seed: u64) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (cx, cy) = (rng.gen_range(9.0..19.0), rng.gen_range(9.0..19.0));
    let s: f64 = rng.gen_range(2.0..5.0);
    GrayImage::from_fn(|r, c| {
        let (dx, dy) = (c as f64 - cx, r as f64 - cy);
        (-(dx * dx + dy * dy) / (2.0 * s * s)).exp()
    })
}

fn small_cfg(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        epochs,
        batch_size: 16,
        ..TrainingConfig::sgd_default()
    }
}

#[test]
fn linear_model_has_840_parameters() {
    let m = LinearSoftmaxModel::new(84, 10, 0);
    assert_eq!(m.param_count(), 840);
    assert_eq!(m.weights().shape(), (84, 10));
}

#[test]
fn mlp3_default_widths_give_1283() {
    let m = Mlp3Model::new(84, MLP3_DEFAULT_WIDTHS, 10, 0).unwrap();
    assert_eq!(m.param_count(), 1283);
    assert_eq!(Mlp3Model::closed_form_params(84, MLP3_DEFAULT_WIDTHS, 10), 1283);
    // 84·12+12 + 12·8+8 + 8·10+10
    assert_eq!(Mlp3Model::closed_form_params(84, (12, 8), 10), 1214);
}

#[test]
fn separable_blobs_are_learned() {
    let (x, y) = blobs(200, 84, 1);
    let (_, r) = train_linear_softmax(&x, &y, 2, &small_cfg(10)).unwrap();
    assert_eq!(r.train_accuracy, 1.0);
    assert!(r.final_loss().unwrap() < r.initial_loss().unwrap());
    assert_eq!(r.param_count, 168);

    let (x, y) = blobs(400, 84, 2);
    let mut y10 = y.clone();
    // embed the two classes among ten so the band check applies to the real head size
    y10.iter_mut().for_each(|l| *l *= 7);
    let (_, r) = train_mlp3(&x, &y10, 10, MLP3_DEFAULT_WIDTHS, &small_cfg(20)).unwrap();
    assert_eq!(r.train_accuracy, 1.0);
    assert_eq!(r.param_count, 1283);
}

#[test]
fn mlp3_outside_band_is_rejected() {
    let (x, y) = blobs(10, 84, 3);
    assert!(matches!(
        train_mlp3(&x, &y, 10, (2, 2), &small_cfg(1)),
        Err(crate::Error::Parameter(_))
    ));
}

#[test]
fn zero_epochs_return_initialization() {
    let (x, y) = blobs(20, 84, 4);
    let cfg = small_cfg(0);
    let (m, r) = train_linear_softmax(&x, &y, 10, &cfg).unwrap();
    assert_eq!(m, LinearSoftmaxModel::new(84, 10, cfg.seed));
    assert!(r.loss_curve.is_empty());
}

#[test]
fn training_is_bit_reproducible() {
    let (x, y) = blobs(100, 84, 5);
    let (a, ra) = train_mlp3(&x, &y, 10, MLP3_DEFAULT_WIDTHS, &small_cfg(3)).unwrap();
    let (b, rb) = train_mlp3(&x, &y, 10, MLP3_DEFAULT_WIDTHS, &small_cfg(3)).unwrap();
    assert_eq!(a, b);
    assert_eq!(ra.loss_curve, rb.loss_curve);
}

#[test]
fn classifier_gradients_match_finite_differences() {
    let (x, _) = blobs(5, 6, 6);
    let y = vec![0, 2, 1, 2, 0];
    let check = |model: Box<dyn Fn(&[f64]) -> (f64, Vec<f64>)>, theta: Vec<f64>| {
        let (_, analytic) = model(&theta);
        let r = finite_diff_grad_check(|t| model(t).0, &theta, &analytic, DEFAULT_STEP).unwrap();
        assert!(r.max_relative_error < 1e-6, "{r:?}");
    };
    // cross-entropy of a softmax layer on one sample
    let lin = LinearSoftmaxModel::new(6, 3, 9);
    let theta = flatten_params(lin.params());
    let x1 = x.select_rows(&[0]);
    check(
        Box::new(move |t: &[f64]| {
            let mut m = lin.clone();
            load_flat_params(m.params_mut(), t).unwrap();
            let (l, g) = m.loss_and_grads(&x1, &[0]).unwrap();
            (l, flatten_params(&g))
        }),
        theta,
    );
    let mut mlp = Mlp3Model::new(6, (5, 4), 3, 9).unwrap();
    // nonzero biases so every ReLU unit is away from its kink
    for i in [1, 3, 5] {
        let cols = mlp.params()[i].cols();
        mlp.params_mut()[i] = Matrix::from_fn(1, cols, |_, c| 0.3 + 0.1 * c as f64);
    }
    let theta = flatten_params(mlp.params());
    check(
        Box::new(move |t: &[f64]| {
            let mut m = mlp.clone();
            load_flat_params(m.params_mut(), t).unwrap();
            let (l, g) = m.loss_and_grads(&x, &y).unwrap();
            (l, flatten_params(&g))
        }),
        theta,
    );
}

#[test]
fn features_match_bank_transform_rows() {
    let images: Vec<GrayImage> = (0..12).map(digit_like).collect();
    let g = PolarGeometry::default();
    let bank = fit_polar_bank(&images, &g, 3).unwrap();
    let feats = extract_polar_pca_features(&images, &bank, &g).unwrap();
    assert_eq!(feats.shape(), (12, 84));
    let direct = bank_transform(&bank, &polar_tensor(&images, &g).unwrap())
        .unwrap()
        .flatten_samples();
    assert_eq!(feats, direct);

    // permuting images permutes rows
    let order = [3, 0, 11, 5];
    let picked: Vec<GrayImage> = order.iter().map(|&i| images[i].clone()).collect();
    let sub = extract_polar_pca_features(&picked, &bank, &g).unwrap();
    assert_eq!(sub, feats.select_rows(&order));

    // a bank for another radial resolution is rejected
    assert!(extract_polar_pca_features(&images, &bank, &PolarGeometry::with_bins(14)).is_err());
}

#[test]
fn sweep_reports_each_count() {
    let images: Vec<GrayImage> = (0..40).map(digit_like).collect();
    let labels: Vec<u8> = (0..40).map(|i| (i % 10) as u8).collect();
    let cfg = PolarPipelineConfig {
        training: small_cfg(2),
        ..PolarPipelineConfig::default()
    };
    let pts = accuracy_vs_samples_sweep(&[10, 20, 40], (&images, &labels), (&images[..10], &labels[..10]), &cfg)
        .unwrap();
    assert_eq!(pts.iter().map(|p| p.n_samples).collect::<Vec<_>>(), vec![10, 20, 40]);
    assert!(pts.iter().all(|p| p.train_seconds > 0.0 && (0.0..=1.0).contains(&p.accuracy)));
    assert!(accuracy_vs_samples_sweep(&[20, 10], (&images, &labels), (&images, &labels), &cfg).is_err());
    assert!(accuracy_vs_samples_sweep(&[41], (&images, &labels), (&images, &labels), &cfg).is_err());
}
