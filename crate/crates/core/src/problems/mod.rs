//! Synthetic benchmarks, graph construction and evaluation metrics.

pub mod bd;
mod binary;
pub mod bmf;
pub mod cluster;
pub mod gt;
pub mod hungarian;
pub mod layered;
pub mod ovpm;

pub use bd::{
    bd_network, bd_test_re, features_iou, gen_bd, pair_iou, BdInstance, BdLayout, BdSpec, BinaryFeatures, IouReport,
};
pub use binary::{BinaryMatrix, MAGIC as NBIN_MAGIC};
pub use bmf::{
    bmf_entry_prob, bmf_network, bmf_test_re, gen_bmf, independent_pixels_log_likelihood, BipartiteLayout, BmfInstance,
    FROZEN_NOISE_PROB, WEIGHT_THRESHOLD,
};
pub use cluster::{agglomerative_average_linkage, cooccurrence_distance, DistanceMatrix};
pub use gt::{GroundTruth, GT_MAGIC};
pub use hungarian::min_cost_matching;
pub use layered::{build_layered_graph, LayeredGraphSpec, LayeredTopology};
pub use ovpm::{gen_ovpm, ovpm_recovery, ovpm_recovery_net, OvpmGroundTruth, RecoveryReport};

use crate::error::Result;
use crate::noisy_or::{LoweredNetwork, NoisyOrNetwork};
use crate::pmp::{pmp_batch, PmpQueryConfig};

/// Max-product posterior mode of every observation, in parallel.
pub fn posterior_modes<X: AsRef<[bool]> + Sync>(
    net: &NoisyOrNetwork,
    observations: &[X],
    n_iters: usize,
    damping: f64,
) -> Result<Vec<Vec<bool>>> {
    let lowered = LoweredNetwork::new(net);
    let query = PmpQueryConfig {
        temperature: 0.0,
        n_iters,
        damping,
        seed: 0,
    };
    Ok(pmp_batch(&lowered, observations, &query, &[])?
        .into_iter()
        .map(|a| a.hidden)
        .collect())
}

/// Mean Elbo of a Dirac posterior at the max-product mode.
pub fn mean_elbo_mp<X: AsRef<[bool]> + Sync>(
    net: &NoisyOrNetwork,
    observations: &[X],
    n_iters: usize,
    damping: f64,
) -> Result<f64> {
    let modes = posterior_modes(net, observations, n_iters, damping)?;
    let mut total = 0.0;
    for (h, x) in modes.iter().zip(observations) {
        total += net.elbo_mp(x.as_ref(), h)?;
    }
    Ok(total / observations.len().max(1) as f64)
}
