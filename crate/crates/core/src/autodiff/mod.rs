//! Reverse-mode automatic differentiation over 2-D `f64` tensors.

mod gradcheck;
mod tape;

pub use gradcheck::{finite_difference_check, GradCheckReport, GRADCHECK_FLOOR, KINK_TOLERANCE};
pub use tape::{Gradients, SparseConst, Tape, Var};
