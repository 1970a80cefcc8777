//! Learning noisy-OR Bayesian networks with perturb-and-max-product.
//!
//! The crate is organised bottom-up:
//!
//! - [`factor_graph`]: binary max-product engine with a linear-time OR kernel;
//! - [`noisy_or`]: the network model, its factor-graph lowering, the Dirac
//!   posterior Elbo and its gradient;
//! - [`pmp`]: MAP and perturbed (sampling) posterior queries;
//! - [`training`]: Adam ascent on the Elbo over mini-batches;
//! - [`mf_vi`]: the mean-field bound, its optimizer and hybrid training;
//! - [`problems`]: synthetic benchmarks, graph construction and metrics.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod factor_graph;
pub mod math;
pub mod mf_vi;
pub mod noisy_or;
pub mod pmp;
pub mod problems;
pub mod rng;
#[cfg(test)]
mod testutil;
pub mod training;

pub use error::{Error, Result};
pub use factor_graph::{Factor, FactorGraph, LogUnary, MaxProductConfig, MessageState, VarId};
pub use mf_vi::{EdgeWeights, MeanFieldPosterior, ViConfig};
pub use noisy_or::{NetworkBuilder, NodeId, NoisyOrNetwork, ParamStore, PosteriorAssignment};
pub use pmp::PmpQueryConfig;
pub use problems::BinaryMatrix;
pub use training::{AdamConfig, AdamState, History, InitScheme, TrainConfig};
