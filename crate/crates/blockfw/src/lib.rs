//! Block factor-width-two matrix cones and the conic programs built on them.
//!
//! A symmetric matrix belongs to the block factor-width-two cone `FW_{α,2}`
//! for a partition `α = {k_1, …, k_p}` when it can be written as a sum of
//! PSD matrices, each supported on one pair of partition blocks. These cones
//! sit between the scaled-diagonally-dominant matrices (trivial partition)
//! and the full PSD cone (two-block partition), and coarsening the partition
//! tightens the approximation.
//!
//! The crate provides:
//!
//! - [`partition`]: partition algebra, sub-partition witnesses, block
//!   permutations;
//! - [`linalg`]: dense symmetric eigendecomposition and PSD projections;
//! - [`cone`]: membership certification, constructive decompositions,
//!   partition coarsening, SDD scalings, and sparse (forest) decompositions;
//! - [`solver`]: a first-order operator-splitting solver for conic programs
//!   over products of PSD blocks;
//! - [`reformulate`]: rewriting a standard SDP over the pair-block cone and
//!   lifting block solutions back;
//! - [`bounds`]: closed-form distance bounds and worst-case witnesses;
//! - [`sos`]: sum-of-squares and block-SDSOS program builders with
//!   certificate extraction;
//! - [`io`]: SDPA sparse files and the matrix/polynomial/partition text
//!   formats used by the CLI.

pub mod bounds;
pub mod cli;
pub mod cone;
pub mod io;
pub mod linalg;
pub mod partition;
pub mod reformulate;
pub mod solver;
pub mod sos;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid decomposition: {0}")]
    InvalidDecomposition(String),
    #[error("invalid certificate: {0}")]
    InvalidCertificate(String),
    #[error("inconclusive: {0}")]
    Inconclusive(String),
    #[error("invalid program: {0}")]
    InvalidProgram(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
