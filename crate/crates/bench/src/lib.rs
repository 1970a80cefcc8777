//! Shared fixtures for the benchmarks.

use norbn_core::problems::{gen_bmf, BipartiteLayout, BmfInstance};
use norbn_core::training::init_params;
use norbn_core::{InitScheme, NoisyOrNetwork};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A generated factorization problem and a freshly initialized model for it.
pub fn bmf_fixture(n: usize, r: usize, p: usize) -> (BmfInstance, NoisyOrNetwork) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let inst = gen_bmf(n, r, p, 0.25, &mut rng).expect("valid problem");
    let skeleton = BipartiteLayout::bmf(r, p).network().expect("valid layout");
    let scheme = InitScheme::factorization(1).expect("scheme 1");
    let net = init_params(&skeleton, &scheme, &mut rng).expect("init");
    (inst, net)
}
