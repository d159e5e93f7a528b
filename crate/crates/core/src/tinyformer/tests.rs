use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::numerics::gradcheck::DEFAULT_STEP;
use crate::numerics::{grad_check_tensors, Matrix};
use crate::polar_mnist::{LinearSoftmaxModel, Mlp3Model};
use crate::polar_mnist::FeatureClassifier;
use crate::train::TrainingConfig;

fn rand_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

/// Random weights everywhere, including gains and biases, so no gradient
/// is trivially zero by symmetry of the initialisation.
fn random_params(arch: Arch, seed: u64) -> TransformerParams {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = tensor_layout(&arch)
        .into_iter()
        .map(|(_, (r, c))| rand_matrix(&mut rng, r, c))
        .collect();
    TransformerParams::from_tensors(arch, tensors).unwrap()
}

fn mini_encoder(activation: Activation) -> EncoderClassifierSpec {
    EncoderClassifierSpec {
        input_dim: 6,
        seq_len: 4,
        layers: 2,
        heads: 2,
        ffn_hidden: 5,
        classes: 3,
        activation,
    }
}

fn mini_decoder(activation: Activation) -> DecoderSpec {
    DecoderSpec {
        input_dim: 6,
        seq_len: 4,
        layers: 2,
        heads: 2,
        ffn_hidden: 5,
        vocab: 11,
        activation,
    }
}

#[test]
fn closed_form_counts() {
    let linear = count_params(&ModelSpec::Linear {
        inputs: 84,
        outputs: 10,
        bias: false,
    });
    assert_eq!(linear.total, 840);
    assert_eq!(LinearSoftmaxModel::new(84, 10, 0).param_count(), 840);

    let mlp = count_params(&ModelSpec::Mlp {
        dims: vec![84, 13, 7, 10],
    });
    assert_eq!(mlp.total, 1_283);
    assert_eq!(mlp.output_projection, 80);
    assert_eq!(Mlp3Model::new(84, (13, 7), 10, 0).unwrap().param_count(), 1_283);

    let enc = count_params(&ModelSpec::Encoder(EncoderClassifierSpec::default()));
    assert_eq!(enc.total, 77_976);
    let rel = (enc.total as f64 - ENCODER_PARAM_TARGET as f64).abs() / ENCODER_PARAM_TARGET as f64;
    assert!(rel <= ENCODER_PARAM_TOLERANCE);

    let dec = count_params(&ModelSpec::Decoder(DecoderSpec::default()));
    assert_eq!(dec.total, 3_680_899);
    assert!(dec.total > 3_500_000 && dec.total < DECODER_PARAM_LIMIT);
    assert_eq!(
        dec.total,
        dec.attention + dec.ffn + dec.layer_norm + dec.output_projection
    );
    let small = layer_params(&DecoderSpec::default().arch());
    let full = layer_params(&DecoderSpec::full_width(2).arch());
    assert_eq!(small.total, 56_326);
    assert_eq!(full.total, 1_774_464);
    assert!(full.total >= 10 * small.total);
}

#[test]
fn counts_match_allocated_tensors() {
    let specs = [
        EncoderClassifierSpec::default().arch(),
        mini_encoder(Activation::Gelu).arch(),
        DecoderSpec::default().arch(),
        mini_decoder(Activation::Relu).arch(),
        DecoderSpec {
            layers: 5,
            heads: 7,
            ..DecoderSpec::default()
        }
        .arch(),
    ];
    for arch in specs {
        let p = TransformerParams::init(arch, 1).unwrap();
        let model = match arch.kind {
            ArchKind::Encoder => ModelSpec::Encoder(EncoderClassifierSpec {
                input_dim: arch.input_dim,
                seq_len: arch.seq_len,
                layers: arch.layers,
                heads: arch.heads,
                ffn_hidden: arch.ffn_hidden,
                classes: arch.outputs,
                activation: arch.activation,
            }),
            ArchKind::Decoder => ModelSpec::Decoder(DecoderSpec {
                input_dim: arch.input_dim,
                seq_len: arch.seq_len,
                layers: arch.layers,
                heads: arch.heads,
                ffn_hidden: arch.ffn_hidden,
                vocab: arch.outputs,
                activation: arch.activation,
            }),
        };
        assert_eq!(p.param_count(), count_params(&model).total, "{arch:?}");
    }
}

#[test]
fn spec_validation() {
    assert!(EncoderClassifierSpec {
        heads: 3,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(DecoderSpec {
        input_dim: 7,
        heads: 1,
        ..Default::default()
    }
    .validate()
    .is_err());
    assert!(DecoderSpec {
        layers: 0,
        ..Default::default()
    }
    .validate()
    .is_err());
}

#[test]
fn every_tensor_passes_gradient_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for activation in [Activation::Relu, Activation::Gelu] {
        let enc = mini_encoder(activation).arch();
        let dec = mini_decoder(activation).arch();
        let cases: [(Arch, Vec<Option<usize>>); 2] =
            [(enc, vec![Some(2)]), (dec, vec![Some(3), Some(10), Some(0), None])];
        for (arch, targets) in cases {
            let params = random_params(arch, rng.gen());
            let z = rand_matrix(&mut rng, 4, 6);
            let (_, grads) = loss_and_gradients(&params, &z, &targets).unwrap();
            let loss = |t: &[Matrix]| {
                let p = TransformerParams::from_tensors(arch, t.to_vec()).unwrap();
                loss_and_gradients(&p, &z, &targets).unwrap().0
            };
            let reports = grad_check_tensors(loss, params.tensors(), &grads, DEFAULT_STEP).unwrap();
            for ((name, _), r) in tensor_layout(&arch).iter().zip(&reports) {
                assert!(
                    r.max_relative_error <= 1e-4,
                    "{:?} {activation} {name}: {r:?}",
                    arch.kind
                );
            }
        }
    }
}

#[test]
fn decoder_is_causal() {
    let spec = DecoderSpec {
        vocab: 37,
        seq_len: 12,
        ..mini_decoder(Activation::Gelu)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let params = random_params(spec.arch(), rng.gen());
        let z = rand_matrix(&mut rng, 12, 6);
        let base = decoder_forward(&spec, &params, &z).unwrap();
        let t = rng.gen_range(0..11);
        let mut z2 = z.clone();
        for r in t + 1..12 {
            for c in 0..6 {
                z2[(r, c)] += rng.gen_range(-5.0..5.0);
            }
        }
        let pert = decoder_forward(&spec, &params, &z2).unwrap();
        for r in 0..=t {
            assert_eq!(base.row(r), pert.row(r), "row {r} moved after perturbing > {t}");
        }
        assert_ne!(base.row(t + 1), pert.row(t + 1));
    }
}

#[test]
fn attention_rows_are_distributions() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dec = random_params(mini_decoder(Activation::Relu).arch(), 3);
    let out = forward(&dec, &rand_matrix(&mut rng, 4, 6), ForwardOptions::default()).unwrap();
    let mask = causal_mask(4).unwrap();
    for layer in &out.attention {
        for p in layer {
            for q in 0..4 {
                assert!((p.row(q).iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for k in 0..4 {
                    assert_eq!(p[(q, k)] > 0.0, mask.allowed(q, k));
                }
            }
        }
    }
    let enc = random_params(mini_encoder(Activation::Relu).arch(), 4);
    let out = forward(&enc, &rand_matrix(&mut rng, 4, 6), ForwardOptions::default()).unwrap();
    assert_eq!(out.attention.len(), 2);
    assert!(out.attention[1][1].as_slice().iter().all(|&v| v > 0.0));
}

#[test]
fn encoder_ignores_row_order_without_positions() {
    let spec = mini_encoder(Activation::Relu);
    let params = random_params(spec.arch(), 5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let z = rand_matrix(&mut rng, 4, 6);
    let opts = ForwardOptions { zero_positional: true };
    let base = forward(&params, &z, opts).unwrap().logits;
    for perm in [[1, 0, 2, 3], [3, 2, 1, 0], [2, 3, 0, 1]] {
        let zp = z.select_rows(&perm);
        let out = forward(&params, &zp, opts).unwrap().logits;
        assert!(out.max_abs_diff(&base).unwrap() < 1e-12);
    }
    // with positions the order matters
    let with_pe = encoder_forward(&spec, &params, &z).unwrap();
    let swapped = encoder_forward(&spec, &params, &z.select_rows(&[1, 0, 2, 3])).unwrap();
    assert_ne!(with_pe, swapped);
}

#[test]
fn forward_shape_checks() {
    let dec_spec = mini_decoder(Activation::Relu);
    let dec = random_params(dec_spec.arch(), 1);
    assert_eq!(decoder_forward(&dec_spec, &dec, &Matrix::zeros(1, 6)).unwrap().shape(), (1, 11));
    assert!(decoder_forward(&dec_spec, &dec, &Matrix::zeros(5, 6)).is_err());
    assert!(decoder_forward(&dec_spec, &dec, &Matrix::zeros(2, 5)).is_err());
    let enc_spec = mini_encoder(Activation::Relu);
    let enc = random_params(enc_spec.arch(), 1);
    assert!(encoder_forward(&enc_spec, &enc, &Matrix::zeros(3, 6)).is_err());
    assert!(encoder_forward(&enc_spec, &dec, &Matrix::zeros(4, 6)).is_err());
    let full = TransformerParams::init(DecoderSpec::default().arch(), 0).unwrap();
    let logits = decoder_forward(&DecoderSpec::default(), &full, &Matrix::zeros(1, 70)).unwrap();
    assert_eq!(logits.shape(), (1, 50_257));
}

#[test]
fn duplicated_inputs_give_identical_logits() {
    let spec = mini_encoder(Activation::Gelu);
    let params = random_params(spec.arch(), 2);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let z = rand_matrix(&mut rng, 4, 6);
    let other = rand_matrix(&mut rng, 4, 6);
    let preds = encoder_predict(&params, &[z.clone(), other, z.clone()]).unwrap();
    assert_eq!(preds[0], preds[2]);
    assert_eq!(
        encoder_forward(&spec, &params, &z).unwrap(),
        encoder_forward(&spec, &params, &z).unwrap()
    );
}

#[test]
fn zero_head_gives_uniform_loss() {
    let spec = DecoderSpec::default();
    let mut params = TransformerParams::init(spec.arch(), 0).unwrap();
    let head = spec.layers * 16;
    params.tensors_mut()[head] = Matrix::zeros(70, spec.vocab);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let z = rand_matrix(&mut rng, 10, 70);
    let ids: Vec<u32> = (0..10).map(|_| rng.gen_range(0..spec.vocab as u32)).collect();
    let (loss, _) = loss_and_gradients(&params, &z, &next_token_targets(&ids)).unwrap();
    assert!((loss - (spec.vocab as f64).ln()).abs() < 1e-12);
    assert!((loss - 10.825).abs() < 1e-3);
}

#[test]
fn next_token_targets_shift_by_one() {
    assert_eq!(next_token_targets(&[5, 6, 7]), vec![Some(6), Some(7), None]);
    assert_eq!(next_token_targets(&[5]), vec![None]);
}

#[test]
fn checkpoint_round_trip_and_corruption() {
    let dir = tempfile::tempdir().unwrap();
    for (arch, seed) in [
        (mini_encoder(Activation::Gelu).arch(), 1),
        (mini_decoder(Activation::Relu).arch(), 2),
    ] {
        let p = random_params(arch, seed);
        let path = dir.path().join("m.tfm");
        p.save(&path).unwrap();
        let back = TransformerParams::load(&path).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_bytes().unwrap(), p.to_bytes().unwrap());

        let good = p.to_bytes().unwrap();
        for (at, v) in [(0, b'X'), (4, 9), (29, 1), (30, 7)] {
            let mut bad = good.clone();
            bad[at] = v;
            assert!(TransformerParams::from_bytes(&bad, &path).is_err(), "byte {at}");
        }
        // heads = 4 no longer divides input_dim 6
        let mut bad = good.clone();
        bad[17..21].copy_from_slice(&4u32.to_le_bytes());
        assert!(TransformerParams::from_bytes(&bad, &path).is_err());
        assert!(TransformerParams::from_bytes(&good[..good.len() - 1], &path).is_err());
        let mut long = good.clone();
        long.push(0);
        assert!(TransformerParams::from_bytes(&long, &path).is_err());
        let mut nan = good;
        let n = nan.len();
        nan[n - 8..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(TransformerParams::from_bytes(&nan, &path).is_err());
    }
}

fn separable_inputs(n: usize, seed: u64, shuffle: bool) -> (Vec<Matrix>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let label = i % 2;
        let shift = if label == 0 { -0.8 } else { 0.8 };
        inputs.push(Matrix::from_fn(4, 6, |_, _| shift + rng.gen_range(-1.0..1.0)));
        labels.push(label);
    }
    if shuffle {
        use rand::seq::SliceRandom;
        labels.shuffle(&mut rng);
    }
    (inputs, labels)
}

#[test]
fn encoder_learns_a_mean_shift() {
    let spec = EncoderClassifierSpec {
        classes: 2,
        ..mini_encoder(Activation::Relu)
    };
    let cfg = TrainingConfig {
        epochs: 20,
        learning_rate: 3e-3,
        ..TrainingConfig::adam_default()
    };
    let (train, train_y) = separable_inputs(80, 1, false);
    let (test, test_y) = separable_inputs(40, 2, false);
    let (params, report) = train_encoder_on_inputs(&spec, &train, &train_y, &cfg).unwrap();
    assert!(report.final_loss().unwrap() < report.initial_loss().unwrap());
    assert!(encoder_accuracy(&params, &test, &test_y).unwrap() >= 0.95);

    let (again, report2) = train_encoder_on_inputs(&spec, &train, &train_y, &cfg).unwrap();
    assert_eq!(again, params);
    assert_eq!(report2.loss_curve, report.loss_curve);

    assert!(train_encoder_on_inputs(&spec, &train, &vec![2; 80], &cfg).is_err());
}

#[test]
fn decoder_memorises_and_generates() {
    use crate::pca::{bank_fit, bank_transform, SegmentAxis, Tensor3};
    use rand::seq::SliceRandom;

    let spec = DecoderSpec {
        input_dim: 8,
        seq_len: 12,
        vocab: 23,
        ..mini_decoder(Activation::Relu)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let raw: Vec<Matrix> = (0..20).map(|_| rand_matrix(&mut rng, 12, 10)).collect();
    let bank = bank_fit(&Tensor3::from_samples(&raw).unwrap(), 8, SegmentAxis::TokenPosition).unwrap();
    let mut ids: Vec<u32> = (0..23).collect();
    ids.shuffle(&mut rng);
    ids.truncate(12);
    let z = bank_transform(&bank, &Tensor3::from_samples(&raw[..1]).unwrap()).unwrap().sample(0);
    let cfg = TrainingConfig {
        epochs: 150,
        batch_size: 1,
        learning_rate: 1e-2,
        ..TrainingConfig::adam_default()
    };
    let (params, report) = train_decoder_on_inputs(&spec, &[z.clone()], &[ids.clone()], &cfg).unwrap();
    assert!(report.train_accuracy >= 0.95, "{report:?}");
    assert!(report.final_loss().unwrap() < report.initial_loss().unwrap());
    let again = train_decoder_on_inputs(&spec, &[z.clone()], &[ids.clone()], &cfg).unwrap();
    assert_eq!(again.0, params);
    assert_eq!(again.1.loss_curve, report.loss_curve);
    assert!(train_decoder_on_inputs(&spec, &[z], &[vec![0; 11]], &cfg).is_err());

    // every id is distinct, so each table row is that token's own embedding
    let block_rows = raw[0].clone();
    let table = table_from(&ids, &block_rows);
    let prompt = Prompt::new(ids[..3].to_vec(), block_rows.select_rows(&[0, 1, 2])).unwrap();
    let out = generate(&spec, &params, &bank, &prompt, 9, &table).unwrap();
    assert_eq!(out, ids);
    assert_eq!(generate(&spec, &params, &bank, &prompt, 9, &table).unwrap(), out);
    assert_eq!(generate(&spec, &params, &bank, &prompt, 0, &table).unwrap(), ids[..3].to_vec());
    assert_eq!(generate(&spec, &params, &bank, &prompt, 50, &table).unwrap().len(), 12);
    assert!(Prompt::new(Vec::new(), Matrix::zeros(0, 10)).is_err());
}

fn table_from(ids: &[u32], rows: &Matrix) -> TokenEmbeddingTable {
    TokenEmbeddingTable::from_rows(ids.iter().enumerate().map(|(t, &id)| (id, rows.row(t).to_vec())).collect()).unwrap()
}

#[test]
fn decoder_divergence_names_the_step() {
    let spec = mini_decoder(Activation::Relu);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let z = rand_matrix(&mut rng, 4, 6);
    let cfg = TrainingConfig {
        epochs: 3,
        batch_size: 1,
        learning_rate: 1e300,
        ..TrainingConfig::adam_default()
    };
    let err = train_decoder_on_inputs(&spec, &[z], &[vec![1, 2, 3, 4]], &cfg).unwrap_err();
    assert!(matches!(err, crate::Error::Diverged { stage: "step", index } if index >= 1), "{err:?}");
}


#[test]
fn embedding_table_averages_repeated_ids() {
    use crate::embedding_io::{EmbeddingBlock, BLOCK_TOKENS, EMBED_DIM};
    let mut ids = vec![7u32; BLOCK_TOKENS];
    ids[1] = 9;
    let emb = Matrix::from_fn(BLOCK_TOKENS, EMBED_DIM, |r, _| r as f64);
    let table = TokenEmbeddingTable::from_blocks(&[EmbeddingBlock::new(ids, emb, None).unwrap()]);
    assert_eq!(table.len(), 2);
    assert_eq!(table.dim(), EMBED_DIM);
    assert_eq!(table.get(9).unwrap()[0], 1.0);
    // rows 0 and 2..100 average to (4950 − 1) / 99
    assert!((table.get(7).unwrap()[5] - 4949.0 / 99.0).abs() < 1e-12);
    assert!(table.get(8).is_none());
    let mut bad = std::collections::BTreeMap::new();
    bad.insert(1, vec![0.0; 2]);
    bad.insert(2, vec![0.0; 3]);
    assert!(TokenEmbeddingTable::from_rows(bad).is_err());
}
