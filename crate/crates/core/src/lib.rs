//! Finite-truncation toolkit for 2-microlocal Besov-type and
//! Triebel–Lizorkin-type function spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: dyadic cubes, containment, enumeration and base-point chains.
//! - [`field`]: sparse cube-indexed coefficient sequences and their norms.
//! - [`embeddings`]: executable embedding relations between the sequence spaces.
//! - [`lp`]: band-limited Littlewood–Paley analysis/synthesis (φ-transform).
//! - [`wavelet`] and [`frames`]: compactly supported orthonormal wavelets,
//!   atom/molecule verification, Gram decay and atomic decomposition.
//! - [`almost_diag`]: almost-diagonal cube matrices and the boundedness harness.
//! - [`operators`]: multipliers, pseudo-differential symbols and singular
//!   integral kernels.
//! - [`regularity`]: test signals with known pointwise regularity and
//!   (s′, σ) frontier scans.
//!
//! Everything is deterministic given a seed; see [`seed::SeedTree`].

pub mod almost_diag;
pub mod cli;
pub mod embeddings;
pub mod engine;
pub mod ensemble;
pub mod equivalence;
pub mod error;
pub mod field;
pub mod frames;
pub mod lattice;
pub mod lp;
pub mod maximal;
pub mod operators;
pub mod params;
pub mod regularity;
pub mod report;
pub mod seed;
pub mod signal;
mod spectral;
pub mod wavelet;

pub use error::{Error, Result};
pub use field::CoeffField;
pub use lattice::{DyadicCube, Region};
pub use params::{Family, SpaceParams};
pub use signal::SampledSignal;
