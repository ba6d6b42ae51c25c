//! Dense numeric kernels: row-major `f64` matrices, matmul with a fixed
//! reduction order, numerically stable row softmax, small MLPs and the LTF
//! tensor file format.

mod ltf;
mod matrix;
mod mlp;

pub use ltf::{read_ltf, read_ltf_file, write_ltf, write_ltf_file};
pub use matrix::{dot, logistic, row_softmax, row_softmax_in_place, Matrix};
pub use mlp::{Activation, Linear, MlpParams};
