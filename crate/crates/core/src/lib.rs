//! Grouped causal representation learning: synthetic grouped causal models,
//! a contrastive estimator of group-wise latents and inter-group causal
//! strengths, and the scoring used to compare them with the truth.
//!
//! The crate is `no_std` with `alloc`; file formats and the command line live
//! in the companion `gcarl` crate.

#![no_std]

extern crate alloc;

pub mod diffnet;
pub mod estimator;
pub mod evaluation;
pub mod graphs;
pub mod grn;
pub mod linalg;
pub mod matrix;
pub mod mixing;
pub mod rng;
pub mod sampler;

pub use matrix::{GroupLayout, Matrix};
