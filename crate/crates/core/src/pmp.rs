//! Perturb-and-max-product posterior queries.
//!
//! With the visible nodes clamped to an observation, max-product on the
//! lowered network estimates the posterior mode (`T = 0`). Adding `T` times
//! independent Gumbel noise to the unaries of the hidden nodes first turns the
//! same query into an approximate posterior sample (`T = 1`).

use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::factor_graph::{decode_with, run_max_product_with, LogUnary, MaxProductConfig};
use crate::noisy_or::{LoweredNetwork, NodeId, NoisyOrNetwork, PosteriorAssignment};
use crate::rng::{derive_seed, rng_from, Rng as Rng64};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PmpQueryConfig {
    pub temperature: f64,
    pub n_iters: usize,
    pub damping: f64,
    pub seed: u64,
}

impl Default for PmpQueryConfig {
    fn default() -> Self {
        PmpQueryConfig {
            temperature: 0.0,
            n_iters: 100,
            damping: 0.5,
            seed: 0,
        }
    }
}

impl PmpQueryConfig {
    pub fn mode() -> Self {
        Self::default()
    }

    pub fn sample(seed: u64) -> Self {
        PmpQueryConfig {
            temperature: 1.0,
            seed,
            ..Self::default()
        }
    }

    pub fn max_product(&self) -> MaxProductConfig {
        MaxProductConfig::new(self.n_iters, self.damping)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid(format!(
                "temperature must be a nonnegative real, got {}",
                self.temperature
            )));
        }
        self.max_product().validate()
    }
}

/// Standard Gumbel variate `-ln(-ln u)`.
#[inline]
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// Draws a standard Gumbel variate, rejecting `u` on the boundary of `(0, 1)`.
pub fn gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 && u < 1.0 {
            return gumbel_from_uniform(u);
        }
    }
}

/// Adds `temperature` times an independent Gumbel variate to every finite
/// unary entry of the unclamped hidden nodes.
///
/// The leak and the visible nodes are clamped, and auxiliary variables are
/// deterministic given the originals, so nothing else is perturbed.
pub fn perturb_hidden<R: Rng + ?Sized>(
    lowered: &LoweredNetwork,
    unaries: &mut [LogUnary],
    temperature: f64,
    rng: &mut R,
) {
    if temperature == 0.0 {
        return;
    }
    let map = lowered.var_map();
    for k in 1..=lowered.n_hidden() {
        let u = &mut unaries[map.node(NodeId(k as u32)).index()];
        if u.clamped_state().is_some() {
            continue;
        }
        for s in 0..2 {
            if u.0[s].is_finite() {
                u.0[s] += temperature * gumbel(rng);
            }
        }
    }
}

/// Posterior query on an already lowered network.
pub fn pmp_query_lowered<R: Rng + ?Sized>(
    lowered: &LoweredNetwork,
    observation: &[bool],
    config: &PmpQueryConfig,
    rng: &mut R,
) -> Result<PosteriorAssignment> {
    let mut unaries = lowered.unaries(Some(observation))?;
    perturb_hidden(lowered, &mut unaries, config.temperature, rng);
    let state = run_max_product_with(lowered.graph(), &unaries, config.max_product())?;
    let assignment = decode_with(lowered.graph(), &unaries, &state);
    let (hidden, _) = lowered.split_assignment(&assignment);
    Ok(PosteriorAssignment {
        hidden,
        visible: observation.to_vec(),
    })
}

/// Single query with the rng seeded from `config.seed`.
pub fn pmp_query(net: &NoisyOrNetwork, observation: &[bool], config: &PmpQueryConfig) -> Result<PosteriorAssignment> {
    config.validate()?;
    let lowered = LoweredNetwork::new(net);
    let mut rng = rng_from(config.seed, &[]);
    pmp_query_lowered(&lowered, observation, config, &mut rng)
}

/// Max-product estimate of the posterior mode (`T = 0`).
pub fn posterior_mode(
    net: &NoisyOrNetwork,
    observation: &[bool],
    n_iters: usize,
    damping: f64,
) -> Result<PosteriorAssignment> {
    pmp_query(
        net,
        observation,
        &PmpQueryConfig {
            temperature: 0.0,
            n_iters,
            damping,
            seed: 0,
        },
    )
}

/// Independent queries for many observations. Query `i` draws its noise from
/// `derive_seed(config.seed, [stream..., i])`, so the result does not depend
/// on the number of worker threads.
pub fn pmp_batch<X: AsRef<[bool]> + Sync>(
    lowered: &LoweredNetwork,
    observations: &[X],
    config: &PmpQueryConfig,
    stream: &[u64],
) -> Result<Vec<PosteriorAssignment>> {
    config.validate()?;
    observations
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut rng = Rng64::seed_from_u64(batch_seed(config.seed, stream, i));
            pmp_query_lowered(lowered, x.as_ref(), config, &mut rng)
        })
        .collect()
}

/// Seed of query `i` in [`pmp_batch`].
pub fn batch_seed(base: u64, stream: &[u64], i: usize) -> u64 {
    let mut path = stream.to_vec();
    path.push(i as u64);
    derive_seed(base, &path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::score_with;
    use crate::noisy_or::NetworkBuilder;
    use crate::testutil::{all_assignments, joint_table, random_bits, random_net, random_tree_net};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn gumbel_closed_form_and_mean() {
        assert!(gumbel_from_uniform((-1.0f64).exp()).abs() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| gumbel(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 0.577_215_664_9).abs() < 0.01, "mean {mean}");
        let a: Vec<f64> = (0..10)
            .map({
                let mut r = ChaCha8Rng::seed_from_u64(3);
                move |_| gumbel(&mut r)
            })
            .collect();
        let b: Vec<f64> = (0..10)
            .map({
                let mut r = ChaCha8Rng::seed_from_u64(3);
                move |_| gumbel(&mut r)
            })
            .collect();
        assert_eq!(a, b);
    }

    /// h1 -> h2 -> x with near-deterministic edges; only h1 has a
    /// non-negligible prior.
    fn deterministic_chain() -> NoisyOrNetwork {
        let mut b = NetworkBuilder::new(2, 1);
        let prior = b.new_slot(-(0.99f64.ln()));
        let rare = b.new_slot(1e-6);
        let fail = b.new_slot(30.0);
        b.set_leak(NodeId(1), prior)
            .set_leak(NodeId(2), rare)
            .set_leak(NodeId(3), rare);
        b.add_edge(NodeId(1), NodeId(2), fail);
        b.add_edge(NodeId(2), NodeId(3), fail);
        b.build().unwrap()
    }

    #[test]
    fn mode_of_deterministic_chain() {
        let net = deterministic_chain();
        let mode = posterior_mode(&net, &[true], 100, 0.5).unwrap();
        assert_eq!(mode.hidden, vec![true, true]);
        let table = joint_table(&net, &[true]);
        let best = table.iter().map(|(_, lp)| *lp).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(net.elbo_mp(&[true], &mode.hidden).unwrap(), best);
        let mode0 = posterior_mode(&net, &[false], 100, 0.5).unwrap();
        assert_eq!(mode0.hidden, vec![false, false]);
    }

    #[test]
    fn zero_temperature_ignores_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = random_net(&mut rng, 4, 4, false);
        let x = random_bits(&mut rng, 4);
        let a = pmp_query(
            &net,
            &x,
            &PmpQueryConfig {
                seed: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let b = pmp_query(
            &net,
            &x,
            &PmpQueryConfig {
                seed: 99,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn negative_temperature_is_rejected() {
        let net = deterministic_chain();
        let cfg = PmpQueryConfig {
            temperature: -1.0,
            ..Default::default()
        };
        assert!(pmp_query(&net, &[true], &cfg).is_err());
    }

    /// On polytrees the lowered graph is a tree, so the mode query returns the
    /// exact maximizer of the lowered score over hidden and auxiliary
    /// variables jointly.
    #[test]
    fn tree_modes_maximize_lowered_score() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..60 {
            let m = rng.random_range(1..=5);
            let p = rng.random_range(1..=(12 - m).min(4));
            let net = random_tree_net(&mut rng, m, p);
            let x = random_bits(&mut rng, p);
            let low = LoweredNetwork::new(&net);
            let u = low.unaries(Some(&x)).unwrap();
            let mut best = f64::NEG_INFINITY;
            for a in all_assignments(low.var_map().n_aux) {
                for h in all_assignments(m) {
                    let mut full = net.full_state(&h, &x).unwrap();
                    full.extend_from_slice(&a);
                    best = best.max(score_with(low.graph(), &u, &full));
                }
            }
            let st = run_max_product_with(low.graph(), &u, MaxProductConfig::default()).unwrap();
            let full = decode_with(low.graph(), &u, &st);
            assert!(score_with(low.graph(), &u, &full) >= best - 1e-9);
            let mode = pmp_query(&net, &x, &PmpQueryConfig::mode()).unwrap();
            assert_eq!(mode.hidden, low.split_assignment(&full).0);
        }
    }

    /// Two causes of one effect: observing the effect and the second cause's
    /// other child lowers the first cause's posterior.
    #[test]
    fn sampling_shows_explaining_away() {
        let mut b = NetworkBuilder::new(2, 2);
        let prior = b.new_slot(-(0.8f64.ln()));
        let noise = b.new_slot(-(0.99f64.ln()));
        let strong = b.new_slot(-(0.05f64.ln()));
        b.set_leak(NodeId(1), prior).set_leak(NodeId(2), prior);
        b.set_leak(NodeId(3), noise).set_leak(NodeId(4), noise);
        b.add_edge(NodeId(1), NodeId(3), strong)
            .add_edge(NodeId(2), NodeId(3), strong);
        b.add_edge(NodeId(2), NodeId(4), strong);
        let net = b.build().unwrap();
        let low = LoweredNetwork::new(&net);
        let freq = |x: [bool; 2]| {
            let obs = vec![x.to_vec(); 4000];
            let out = pmp_batch(&low, &obs, &PmpQueryConfig::sample(5), &[]).unwrap();
            out.iter().filter(|a| a.hidden[0]).count() as f64 / obs.len() as f64
        };
        let effect_only = freq([true, false]);
        let both = freq([true, true]);
        assert!(both < effect_only - 0.2, "{both} vs {effect_only}");
    }

    fn tv_to_exact(net: &NoisyOrNetwork, x: &[bool], n: usize, seed: u64) -> f64 {
        let table = joint_table(net, x);
        let z = table.iter().map(|(_, lp)| lp.exp()).sum::<f64>();
        let low = LoweredNetwork::new(net);
        let obs = vec![x.to_vec(); n];
        let out = pmp_batch(&low, &obs, &PmpQueryConfig::sample(seed), &[]).unwrap();
        let mut counts: HashMap<Vec<bool>, usize> = HashMap::new();
        for a in out {
            *counts.entry(a.hidden).or_default() += 1;
        }
        0.5 * table
            .iter()
            .map(|(h, lp)| (lp.exp() / z - *counts.get(h).unwrap_or(&0) as f64 / n as f64).abs())
            .sum::<f64>()
    }

    #[test]
    fn samples_track_exact_posterior() {
        let mut b = NetworkBuilder::new(2, 2);
        let p1 = b.new_slot(-(0.7f64.ln()));
        let p2 = b.new_slot(-(0.6f64.ln()));
        let noise = b.new_slot(-(0.95f64.ln()));
        let f1 = b.new_slot(-(0.2f64.ln()));
        let f2 = b.new_slot(-(0.3f64.ln()));
        b.set_leak(NodeId(1), p1).set_leak(NodeId(2), p2);
        b.set_leak(NodeId(3), noise).set_leak(NodeId(4), noise);
        b.add_edge(NodeId(1), NodeId(3), f1).add_edge(NodeId(2), NodeId(3), f2);
        b.add_edge(NodeId(2), NodeId(4), f1);
        let net = b.build().unwrap();
        for x in [[true, false], [true, true], [false, true]] {
            let tv = tv_to_exact(&net, &x, 20_000, 17);
            assert!(tv <= 0.15, "x={x:?}: tv {tv}");
        }
    }

    #[test]
    fn batch_is_reproducible_and_thread_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let net = random_net(&mut rng, 4, 5, true);
        let low = LoweredNetwork::new(&net);
        let obs: Vec<Vec<bool>> = (0..16).map(|_| random_bits(&mut rng, 5)).collect();
        let cfg = PmpQueryConfig::sample(21);
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| pmp_batch(&low, &obs, &cfg, &[3]).unwrap());
        let b = four.install(|| pmp_batch(&low, &obs, &cfg, &[3]).unwrap());
        assert_eq!(a, b);
        let c = pmp_batch(&low, &obs, &cfg, &[4]).unwrap();
        assert_ne!(a, c);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn clamps_are_preserved(seed in 0u64..10_000, t in 0.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (m, p) = (rng.random_range(0..4), rng.random_range(1..5));
            let net = random_net(&mut rng, m, p, seed % 2 == 0);
            let x = random_bits(&mut rng, p);
            let cfg = PmpQueryConfig { temperature: t, n_iters: 20, damping: 0.5, seed };
            let out = pmp_query(&net, &x, &cfg).unwrap();
            prop_assert_eq!(&out.visible, &x);
            prop_assert_eq!(out.hidden.len(), m);
            // the decoded full assignment of the lowered graph keeps the clamps
            let low = LoweredNetwork::new(&net);
            let mut r = rng_from(seed, &[]);
            let mut u = low.unaries(Some(&x)).unwrap();
            perturb_hidden(&low, &mut u, t, &mut r);
            let st = run_max_product_with(low.graph(), &u, cfg.max_product()).unwrap();
            let full = decode_with(low.graph(), &u, &st);
            prop_assert!(full[0]);
            let (_, vis) = low.split_assignment(&full);
            prop_assert_eq!(vis, x);
        }
    }
}
