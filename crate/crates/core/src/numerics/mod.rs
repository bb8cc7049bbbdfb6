//! Dense linear algebra, stable nonlinear primitives, seeded randomness and a
//! central-difference gradient checker.

mod gradcheck;
mod matrix;
mod rng;
mod special;

pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error, GradCheck};
pub use matrix::Matrix;
pub use rng::{Rng, Stream};
pub use special::{gaussian_kernel_matrix, log_softmax_rows, log_sum_exp, softmax_rows, squared_distance};
