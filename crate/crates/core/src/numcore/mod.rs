//! Dense-tensor arithmetic with reverse-mode differentiation.
//!
//! Deliberately minimal: rank-1/rank-2 f64 tensors, the dozen operations the
//! fusion model needs, and a per-example execution tape. No broadcasting, no
//! views, no parallel kernels.

mod tape;
mod tensor;

pub use tape::Tape;
pub use tensor::{dropout_mask, Tensor};
