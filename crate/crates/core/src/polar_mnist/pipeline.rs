use std::fmt;
use std::str::FromStr;

use super::{
    extract_polar_pca_features, fit_polar_bank, train_linear_softmax, train_mlp3, FeatureClassifier, GrayImage,
    PolarGeometry, MLP3_DEFAULT_WIDTHS,
};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::pca::PcaBank;
use crate::train::{TrainReport, TrainingConfig};

pub const DIGIT_CLASSES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Linear,
    Mlp3 { widths: (usize, usize) },
}

impl ClassifierKind {
    pub fn mlp3_default() -> Self {
        ClassifierKind::Mlp3 {
            widths: MLP3_DEFAULT_WIDTHS,
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassifierKind::Linear => f.write_str("linear"),
            ClassifierKind::Mlp3 { .. } => f.write_str("mlp3"),
        }
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ClassifierKind::Linear),
            "mlp3" => Ok(ClassifierKind::mlp3_default()),
            other => Err(Error::param(format!("unknown classifier {other:?} (linear | mlp3)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolarPipelineConfig {
    pub geometry: PolarGeometry,
    pub pca_k: usize,
    pub classifier: ClassifierKind,
    pub training: TrainingConfig,
}

impl Default for PolarPipelineConfig {
    fn default() -> Self {
        Self {
            geometry: PolarGeometry::default(),
            pca_k: 3,
            classifier: ClassifierKind::Linear,
            training: TrainingConfig::sgd_default(),
        }
    }
}

pub struct PipelineOutcome {
    pub bank: PcaBank,
    /// Trained parameter tensors in declaration order.
    pub params: Vec<Matrix>,
    pub report: TrainReport,
}

/// Bank fit on `train`, classifier trained on its features, accuracy on `test`.
pub fn run_polar_pipeline(
    train: (&[GrayImage], &[u8]),
    test: (&[GrayImage], &[u8]),
    cfg: &PolarPipelineConfig,
) -> Result<PipelineOutcome> {
    let bank = fit_polar_bank(train.0, &cfg.geometry, cfg.pca_k)?;
    let x_train = extract_polar_pca_features(train.0, &bank, &cfg.geometry)?;
    let x_test = extract_polar_pca_features(test.0, &bank, &cfg.geometry)?;
    let y_train: Vec<usize> = train.1.iter().map(|&l| l as usize).collect();
    let y_test: Vec<usize> = test.1.iter().map(|&l| l as usize).collect();
    let (params, mut report, test_acc) = match cfg.classifier {
        ClassifierKind::Linear => {
            let (m, r) = train_linear_softmax(&x_train, &y_train, DIGIT_CLASSES, &cfg.training)?;
            let acc = m.accuracy(&x_test, &y_test)?;
            (m.params().to_vec(), r, acc)
        }
        ClassifierKind::Mlp3 { widths } => {
            let (m, r) = train_mlp3(&x_train, &y_train, DIGIT_CLASSES, widths, &cfg.training)?;
            let acc = m.accuracy(&x_test, &y_test)?;
            (m.params().to_vec(), r, acc)
        }
    };
    report.test_accuracy = Some(test_acc);
    Ok(PipelineOutcome { bank, params, report })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationPoint {
    pub n_samples: usize,
    pub accuracy: f64,
    /// Classifier training loop only; PCA fitting and feature extraction excluded.
    pub train_seconds: f64,
}

/// One full pipeline run per count on the first `n` training images.
pub fn accuracy_vs_samples_sweep(
    sample_counts: &[usize],
    train: (&[GrayImage], &[u8]),
    test: (&[GrayImage], &[u8]),
    cfg: &PolarPipelineConfig,
) -> Result<Vec<SaturationPoint>> {
    if sample_counts.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::param("sample counts must be strictly ascending"));
    }
    if let Some(&n) = sample_counts.iter().find(|&&n| n > train.0.len()) {
        return Err(Error::InsufficientData {
            needed: n,
            got: train.0.len(),
        });
    }
    sample_counts
        .iter()
        .map(|&n| {
            let out = run_polar_pipeline((&train.0[..n], &train.1[..n]), test, cfg).map_err(|e| Error::Sweep {
                n,
                source: Box::new(e),
            })?;
            Ok(SaturationPoint {
                n_samples: n,
                accuracy: out.report.test_accuracy.unwrap_or(0.0),
                train_seconds: out.report.train_seconds,
            })
        })
        .collect()
}
