//! Approximate pattern-to-text Hamming distance.
//!
//! For a text `T` of length `n` and a pattern `P` of length `m` over an
//! integer alphabet, every alignment `j` gets an estimate of
//! `HAM(T[j..j+m], P)`. The crate provides exact baselines
//! ([`exact`]), the classical binary-projection estimator ([`karloff`]), and
//! a lower-variance estimator ([`approx`]) that removes heavy mismatch pairs
//! found by [`sparse_recovery`] and counts projection collisions with the
//! XOR-tree family in [`hash`].

pub mod approx;
pub mod cli;
pub mod correlation;
pub mod error;
pub mod exact;
pub mod hash;
pub mod io;
pub mod karloff;
pub mod params;
pub mod seed;
pub mod selftest;
pub mod sparse_recovery;
pub mod stats;
pub mod text_model;

pub use error::{Error, Result};
