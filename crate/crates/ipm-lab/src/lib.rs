//! Numerical laboratory for population dynamics of evolutionary algorithms on
//! continuous search spaces.
//!
//! The crate simulates finite-population evolutionary algorithms (proportionate
//! selection, mutation, k-ary recombination), evolves the matching
//! infinite-population marginal laws — on a 1-D quadrature grid and as an
//! i.i.d. particle ensemble — and measures how close the finite dynamics get
//! to the infinite-population predictions as the population grows. It also
//! ships executable demonstrations of why exchangeability alone is too weak an
//! assumption for the classical marginal transition equation: a law-of-large-
//! numbers dependence demo and a transition-gap demo on exchangeable-but-not-
//! independent populations.
//!
//! Everything is driven by explicit [`rng::RandomStream`] values, so a whole
//! experiment re-run with the same master seed reproduces its result files
//! byte for byte, regardless of thread count.
//!
//! The `ipm-lab` binary exposes the experiment kinds (`simulate`, `ipm`,
//! `compare`, `counterexample`, `sweep`) over TOML configuration files; see
//! the repository README for the config reference.

pub mod config;
pub mod counterexample;
pub mod diagnostics;
pub mod error;
pub mod init;
pub mod ipm;
pub mod kernel;
pub mod objective;
pub mod ops;
pub mod population;
pub mod rng;
pub mod runner;
pub mod stats;

pub use error::{Error, Result};
pub use kernel::MutationKernel;
pub use objective::{DomainBox, Objective, ObjectiveKind};
pub use population::{Individual, Population};
pub use rng::RandomStream;
