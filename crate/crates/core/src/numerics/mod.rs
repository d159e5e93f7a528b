//! Dense linear algebra, a symmetric eigensolver and a reverse-mode tape.

mod eigen;
pub mod gradcheck;
pub mod graph;
mod matrix;
mod ops;

pub use eigen::{symmetric_eigendecompose, SymmetricEigen, MAX_QL_ITERATIONS, SYMMETRY_TOLERANCE};
pub use gradcheck::{finite_diff_grad_check, grad_check_tensors, GradCheckReport};
pub use graph::{Gradients, Graph, Var};
pub use matrix::{argmax, dot, Matrix};
pub use ops::{cosine_similarity, softmax_rows, COSINE_ZERO_NORM};
