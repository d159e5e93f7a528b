use std::path::{Path, PathBuf};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::embedding_io::{blocks_to_tensor, read_blocks, EmbeddingBlock};
use crate::pca::{bank_fit, bank_inverse, bank_transform, SegmentAxis};
use crate::tinyformer::{layer_params, TransformerParams};

// numpy float64 recomputation over the pinned fixtures (fixtures/oracle.py)
const ORACLE_RATES: [(usize, f64); 12] = [
    (1, 0.03),
    (10, 0.46),
    (20, 0.95),
    (30, 1.0),
    (40, 1.0),
    (50, 1.0),
    (60, 1.0),
    (70, 1.0),
    (80, 1.0),
    (90, 1.0),
    (100, 1.0),
    (199, 1.0),
];
const ORACLE_RANK70_MEAN_COSINE: f64 = 0.999992352666;
const ORACLE_RANK70_MIN_COSINE: f64 = 0.999901281498;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn sentence_pair() -> (EmbeddingBlock, EmbeddingBlock) {
    let mut blocks = read_blocks(&fixture("sentence_pair.peb")).unwrap();
    let test = blocks.pop().unwrap();
    (blocks.pop().unwrap(), test)
}

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

#[test]
fn fixture_curve_matches_oracle() {
    let (reference, test) = sentence_pair();
    let ks: Vec<usize> = ORACLE_RATES.iter().map(|&(k, _)| k).collect();
    let curve = reconstruction_curve(reference.embeddings(), test.embeddings(), &ks, MatchPool::TestTokens).unwrap();
    for &(k, want) in &ORACLE_RATES {
        assert_eq!(curve.rate_at(k), Some(want), "k={k}");
    }
    let single = token_reconstruction_accuracy(&reference, &test, 60, MatchPool::TestTokens).unwrap();
    assert_eq!(single, 1.0);
    assert!(curve.rate_at(1).unwrap() < curve.rate_at(60).unwrap());
}

#[test]
fn full_rank_reconstructs_every_token() {
    let (reference, test) = sentence_pair();
    for pool in [MatchPool::TestTokens, MatchPool::Union] {
        assert_eq!(token_reconstruction_accuracy(&reference, &test, 384, pool).unwrap(), 1.0);
    }
}

#[test]
fn reconstruction_rejects_bad_requests() {
    let (reference, test) = sentence_pair();
    let (r, t) = (reference.embeddings(), test.embeddings());
    assert!(match_rate(r, t, 0, MatchPool::TestTokens).is_err());
    assert!(match_rate(r, t, 385, MatchPool::TestTokens).is_err());
    assert!(reconstruction_curve(r, t, &[10, 10], MatchPool::TestTokens).is_err());
    assert!(match_rate(r, &gaussian(3, 5, 1), 2, MatchPool::TestTokens).is_err());
    assert!(reconstruction_curve(r, t, &[], MatchPool::TestTokens).unwrap().points.is_empty());
    assert_eq!("union".parse::<MatchPool>().unwrap(), MatchPool::Union);
    assert!("all".parse::<MatchPool>().is_err());
}

#[test]
fn rank70_similarity_matches_oracle() {
    let blocks = read_blocks(&fixture("classify_train.peb")).unwrap();
    let x = blocks_to_tensor(&blocks).unwrap();
    let bank = bank_fit(&x, 70, SegmentAxis::TokenPosition).unwrap();
    let recon = bank_inverse(&bank, &bank_transform(&bank, &x).unwrap()).unwrap();
    let (n, s, d) = x.shape();
    let flat = |t: &crate::pca::Tensor3| Matrix::from_fn(n * s, d, |r, c| t.get(r % n, r / n, c));
    let report = embedding_similarity_report(&flat(&x), &flat(&recon)).unwrap();
    assert_eq!(report.per_token.len(), n * s);
    assert!((report.mean - ORACLE_RANK70_MEAN_COSINE).abs() < 1e-6, "{}", report.mean);
    assert!((report.min - ORACLE_RANK70_MIN_COSINE).abs() < 1e-6, "{}", report.min);
}

#[test]
fn similarity_needs_matching_shapes() {
    let a = gaussian(4, 3, 2);
    assert!(embedding_similarity_report(&a, &gaussian(3, 3, 2)).is_err());
    assert!(embedding_similarity_report(&Matrix::zeros(0, 3), &Matrix::zeros(0, 3)).is_err());
    let same = embedding_similarity_report(&a, &a).unwrap();
    assert!((same.mean - 1.0).abs() < 1e-12 && (same.min - 1.0).abs() < 1e-12);
}

#[test]
fn rotation_leaves_match_rates_unchanged() {
    let reference = gaussian(12, 8, 3);
    let test = gaussian(10, 8, 4);
    let (c, s) = (0.6_f64, 0.8_f64);
    let rotate = |m: &Matrix| {
        Matrix::from_fn(m.rows(), m.cols(), |r, j| match j {
            0 => c * m[(r, 0)] - s * m[(r, 1)],
            1 => s * m[(r, 0)] + c * m[(r, 1)],
            _ => m[(r, j)],
        })
    };
    let ks = [1, 2, 3, 5, 8];
    for pool in [MatchPool::TestTokens, MatchPool::Union] {
        let a = reconstruction_curve(&reference, &test, &ks, pool).unwrap();
        let b = reconstruction_curve(&rotate(&reference), &rotate(&test), &ks, pool).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn parameter_curve_is_affine_in_depth() {
    let compressed = DecoderSpec::default();
    let full = DecoderSpec::full_width(compressed.layers);
    let curve = params_vs_depth(&[1, 2, 3, 4, 6], &compressed, &full).unwrap();
    let per_layer_c = layer_params(&compressed.arch()).total;
    let per_layer_f = layer_params(&full.arch()).total;
    for w in curve.points.windows(2) {
        let dd = w[1].depth - w[0].depth;
        assert_eq!(w[1].params_compressed - w[0].params_compressed, dd * per_layer_c);
        assert_eq!(w[1].params_full - w[0].params_full, dd * per_layer_f);
    }
    let at2 = curve.points[1];
    assert_eq!(at2.params_compressed, 3_680_899);
    assert!(at2.params_full as f64 / at2.params_compressed as f64 >= 5.0);
    assert!(per_layer_f as f64 / per_layer_c as f64 >= 10.0);

    let allocated: usize = TransformerParams::init(compressed.arch(), 0)
        .unwrap()
        .tensors()
        .iter()
        .map(|t| t.rows() * t.cols())
        .sum();
    assert_eq!(allocated, at2.params_compressed);

    assert!(params_vs_depth(&[2, 1], &compressed, &full).is_err());
    assert!(params_vs_depth(&[0, 1], &compressed, &full).is_err());
}

#[test]
fn r2_of_exact_and_noisy_lines() {
    let x = [1.0, 2.0, 3.0, 4.0];
    assert!((linear_fit_r2(&x, &[3.0, 5.0, 7.0, 9.0]).unwrap() - 1.0).abs() < 1e-12);
    let r2 = linear_fit_r2(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
    assert!((r2 - 0.64).abs() < 1e-12, "{r2}");
    assert!(linear_fit_r2(&x, &[1.0; 4]).is_err());
    assert!(linear_fit_r2(&x[..1], &[1.0]).is_err());
}

#[test]
fn csv_round_trips_and_counts_lines() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("recon.csv");
    let curve = ReconstructionCurve {
        points: vec![
            ReconstructionPoint { k: 1, match_rate: 0.03 },
            ReconstructionPoint { k: 10, match_rate: 1.0 / 3.0 },
            ReconstructionPoint { k: 60, match_rate: 1.0 },
        ],
    };
    emit_csv(&curve, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert_eq!(text.lines().next(), Some("k,match_rate"));
    assert_eq!(parse_csv::<ReconstructionCurve>(&path).unwrap(), curve);

    let sat = SaturationCurve {
        points: vec![SaturationPoint { n_samples: 5000, accuracy: 0.8123, train_seconds: 1.25e-3 }],
    };
    let sat_path = dir.path().join("sat.csv");
    emit_csv(&sat, &sat_path).unwrap();
    assert_eq!(parse_csv::<SaturationCurve>(&sat_path).unwrap(), sat);

    let loss = LossCurve { losses: vec![2.3, 0.7, 0.1] };
    let loss_path = dir.path().join("loss.csv");
    emit_csv(&loss, &loss_path).unwrap();
    assert!(std::fs::read_to_string(&loss_path).unwrap().starts_with("epoch,loss\n1,2.3\n"));
    assert_eq!(parse_csv::<LossCurve>(&loss_path).unwrap(), loss);

    let empty_path = dir.path().join("empty.csv");
    emit_csv(&ParamCurve::default(), &empty_path).unwrap();
    assert_eq!(
        std::fs::read_to_string(&empty_path).unwrap(),
        "depth,params_compressed,params_full\n"
    );
    assert!(parse_csv::<ReconstructionCurve>(&empty_path).is_err());
}

#[test]
fn plots_are_written_unless_empty() {
    let dir = tempfile::tempdir().unwrap();
    let compressed = DecoderSpec::default();
    let curve = params_vs_depth(&[1, 2, 3], &compressed, &DecoderSpec::full_width(2)).unwrap();
    let path = dir.path().join("params.svg");
    assert!(emit_plot(&curve, &path).unwrap());
    let svg = std::fs::read_to_string(&path).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("decoder layers"));

    let single = ReconstructionCurve { points: vec![ReconstructionPoint { k: 5, match_rate: 0.5 }] };
    assert!(emit_plot(&single, &dir.path().join("one.svg")).unwrap());

    let none = dir.path().join("none.svg");
    assert!(!emit_plot(&SaturationCurve::default(), &none).unwrap());
    assert!(!none.exists());
    assert!(emit_plot(&curve, &dir.path().join("missing/params.svg")).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn full_effective_rank_always_matches(n_ref in 1usize..6, n_test in 2usize..6, d in 2usize..7, seed in any::<u64>()) {
        let reference = gaussian(n_ref, d, seed);
        let test = gaussian(n_test, d, seed ^ 0x5eed);
        for pool in [MatchPool::TestTokens, MatchPool::Union] {
            prop_assert_eq!(match_rate(&reference, &test, d, pool).unwrap(), 1.0);
        }
    }

    #[test]
    fn rates_are_fractions_of_the_test_set(n_test in 1usize..8, k in 1usize..6, seed in any::<u64>()) {
        let reference = gaussian(6, 5, seed);
        let test = gaussian(n_test, 5, seed.wrapping_add(1));
        let r = match_rate(&reference, &test, k, MatchPool::Union).unwrap();
        prop_assert!((0.0..=1.0).contains(&r));
        let hits = r * n_test as f64;
        prop_assert!((hits - hits.round()).abs() < 1e-9);
    }
}
