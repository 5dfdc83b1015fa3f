//! Numeric core: dense and sparse matrices, a reverse-mode tape over a
//! closed set of operations, Adam, and a finite-difference gradient checker.

mod adam;
mod gradcheck;
mod init;
pub mod io;
pub mod kernels;
mod sparse;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{gradient_check, GradCheckReport};
pub use init::glorot_uniform;
pub use sparse::{SparseMatrix, SparseOperand};
pub use tape::{dropout_mask, softmax_rows, FrozenPattern, Gradients, Tape, Var};
pub use tensor::{Parameter, Tensor};
