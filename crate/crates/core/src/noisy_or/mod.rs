//! Noisy-OR Bayesian networks.
//!
//! Node `0` is an always-on leak; hidden nodes come next and visible leaves
//! last. `p(z_i = 0 | parents) = exp(-theta_0i - sum_k theta_ki z_k)`, with
//! every edge parameter read through a slot of a [`ParamStore`] so that
//! several edges may share one parameter.

mod elbo;
mod format;
mod lowering;
mod network;

pub use elbo::PosteriorAssignment;
pub use format::{network_from_str, network_to_string, read_network, write_network, MAGIC as NETWORK_MAGIC};
pub use lowering::{lower_to_factor_graph, pairwise_table, LoweredNetwork, VarMap};
pub use network::{Edge, NetworkBuilder, NodeId, NoisyOrNetwork, ParamStore, SlotRole};
