//! Polar resampling of MNIST digits, per-segment PCA features and the small
//! feature classifiers trained on them.

mod classifier;
mod features;
mod idx;
mod pipeline;
mod polar;

pub use classifier::{
    train_linear_softmax, train_mlp3, FeatureClassifier, LinearSoftmaxModel, Mlp3Model, MLP3_DEFAULT_WIDTHS,
    MLP3_PARAM_RANGE,
};
pub use features::{extract_polar_pca_features, fit_polar_bank, polar_tensor};
pub use idx::{encode_idx, load_mnist, parse_images, parse_labels, IMAGES_MAGIC, LABELS_MAGIC};
pub use pipeline::{
    accuracy_vs_samples_sweep, run_polar_pipeline, ClassifierKind, PipelineOutcome, PolarPipelineConfig,
    SaturationPoint, DIGIT_CLASSES,
};
pub use polar::{to_polar, GrayImage, PolarGeometry, PolarImage};

#[cfg(test)]
mod tests;
