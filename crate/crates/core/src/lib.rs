// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod characteristics;
pub mod error;
pub mod flux;
pub mod grid;
pub mod harness;
pub mod homogeneous;
pub mod inhomogeneous;
pub mod initial;
pub mod kinetic;
pub mod oracles;
pub mod path;
pub mod trajectory;
