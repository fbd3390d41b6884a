// NaN-rejecting guards are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod qdynamics;
pub mod wigner;
pub mod mapping;
pub mod synth;
pub mod bosehubbard;
pub mod score;
pub mod cli;
