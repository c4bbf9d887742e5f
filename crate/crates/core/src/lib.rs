#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod direction;
pub mod distributions;
pub mod effective_rank;
pub mod error;
pub mod geometry;
pub mod isotropy;
pub(crate) mod linalg;
pub mod pipeline;
pub mod rng;
pub mod verifier;
