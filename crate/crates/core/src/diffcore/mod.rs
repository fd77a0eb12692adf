//! Dense-matrix math with reverse-mode automatic differentiation.
//!
//! All network equations are compositions of the primitives recorded on a
//! [`Tape`]. Tensors are 2-D matrices; pairwise quantities over an `n`-node
//! graph are flattened to `[n*n, d]` rows in `(i, j)` order.

pub mod gradcheck;
mod mat;
mod tape;

pub use mat::{Mat, Real};
pub use tape::{Grads, Tape, Var};
