//! Simulation and verification laboratory for the Push rumor-spreading
//! protocol on edge-Markovian evolving graphs.
//!
//! The crate is organized around five parts:
//!
//! * [`dyngraph`] — the random graph models (edge-Markov chain, independent
//!   G(n,p), static) and their closed-form quantities;
//! * [`protocol`] — Push and Flooding execution with per-run
//!   instrumentation, plus the source-only bootstrap process;
//! * [`coupling`] — the stochastic-dominance couplings and the exact
//!   enumeration oracles that verify them;
//! * [`stats`] — run aggregation, scaling fits, the bounded-degree
//!   predicate and sample-based dominance tests;
//! * [`harness`] — declarative, reproducible parameter sweeps with CSV/JSON
//!   persistence.
//!
//! All randomness flows through [`rng::RngStream`] (ChaCha8 with derived
//! stream ids); a (config, master seed) pair reproduces results
//! bit-identically within one build, independent of thread count.

pub mod checks;
pub mod coupling;
pub mod dyngraph;
pub mod error;
pub mod harness;
pub mod nodeset;
pub mod protocol;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
