//! Dense matrices, weighted sparse adjacency, and a reverse-mode tape.

mod adj;
mod csr;
mod matrix;
mod tape;

pub use adj::SparseWeightedAdj;
pub use csr::CsrMatrix;
pub use matrix::{argmax, softmax, DenseMatrix};
pub use tape::{Gradients, Tape, Var};
