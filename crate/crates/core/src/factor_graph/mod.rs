//! Max-product over binary variables with a damped flooding schedule.
//!
//! Messages live in the log domain and are shifted after every update so
//! that their larger entry is 0. `-inf` entries encode hard constraints and
//! are carried exactly through sums, damping and decoding.

mod engine;
mod graph;
mod kernels;

pub use engine::{
    decode, decode_with, run_max_product, run_max_product_with, score, score_with, MaxProductConfig, MessageState,
};
pub use graph::{Config, Factor, FactorGraph, FactorGraphBuilder, FactorId, LogPair, LogUnary, VarId};
pub use kernels::{factor_to_var, factor_to_var_enum, factor_to_var_or, normalize};
