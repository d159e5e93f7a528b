mod binio;
pub mod embedding_io;
pub mod eval;
pub mod error;
pub mod numerics;
pub mod pca;
pub mod polar_mnist;
pub mod tinyformer;
pub mod train;

pub use error::{Error, ParseError, Result};
pub use numerics::Matrix;
pub use pca::{PcaBank, PcaModel, SegmentAxis, Tensor3};
pub use train::{OptimizerKind, TrainReport, TrainingConfig};
