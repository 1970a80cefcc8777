//! Elbo of a Dirac posterior and its closed-form gradient.
//!
//! With `q(h | x)` concentrated on one hidden assignment the entropy vanishes
//! and the bound is the joint log-likelihood of `(h, x)`, which splits over
//! nodes as `z_i f(beta_i) - (1 - z_i) beta_i` with `f(b) = log(1 - e^-b)`.

use super::network::{NodeId, NoisyOrNetwork};
use crate::error::Result;
use crate::math::{dlog1mexp, log1mexp};

/// Hidden assignment of one posterior query together with the observation it
/// was conditioned on. The leak is implicitly on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PosteriorAssignment {
    pub hidden: Vec<bool>,
    pub visible: Vec<bool>,
}

impl PosteriorAssignment {
    pub fn elbo_mp(&self, net: &NoisyOrNetwork) -> Result<f64> {
        net.elbo_mp(&self.visible, &self.hidden)
    }
}

impl NoisyOrNetwork {
    /// Joint log-likelihood of a full state (`z[0]` is the leak).
    pub fn log_joint(&self, z: &[bool]) -> f64 {
        debug_assert_eq!(z.len(), self.n_nodes());
        let mut total = 0.0;
        for i in 1..self.n_nodes() {
            let beta = self.beta(NodeId(i as u32), z);
            total += if z[i] { log1mexp(beta) } else { -beta };
        }
        total
    }

    pub fn elbo_mp(&self, observation: &[bool], hidden: &[bool]) -> Result<f64> {
        let z = self.full_state(hidden, observation)?;
        Ok(self.log_joint(&z))
    }

    /// Adds the gradient of [`Self::log_joint`] at `z` into `grad` (one entry
    /// per slot). Shared slots accumulate over their edges; frozen slots are
    /// left untouched.
    pub fn accumulate_grad(&self, z: &[bool], grad: &mut [f64]) {
        debug_assert_eq!(grad.len(), self.params().len());
        let frozen = self.params().frozen();
        for i in 1..self.n_nodes() {
            let node = NodeId(i as u32);
            let beta = self.beta(node, z);
            // d/dtheta_ki = z_k (z_i f'(beta) + z_i - 1)
            let per_active_parent = if z[i] { dlog1mexp(beta) } else { -1.0 };
            for e in self.edges(node) {
                if z[e.parent as usize] && !frozen[e.slot as usize] {
                    grad[e.slot as usize] += per_active_parent;
                }
            }
        }
    }

    pub fn elbo_grad(&self, observation: &[bool], hidden: &[bool]) -> Result<Vec<f64>> {
        let z = self.full_state(hidden, observation)?;
        let mut g = vec![0.0; self.params().len()];
        self.accumulate_grad(&z, &mut g);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noisy_or::NetworkBuilder;
    use crate::testutil::{random_bits, random_net};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_visible_examples() {
        let mut b = NetworkBuilder::new(0, 1);
        let s = b.new_slot(std::f64::consts::LN_2);
        b.set_leak(NodeId(1), s);
        let net = b.build().unwrap();
        assert!((net.elbo_mp(&[true], &[]).unwrap() - 0.5f64.ln()).abs() < 1e-15);
        assert!((net.elbo_mp(&[false], &[]).unwrap() + std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_sign_rules() {
        let mut b = NetworkBuilder::new(1, 1);
        let s0 = b.new_slot(0.5);
        let s1 = b.new_slot(0.5);
        let s2 = b.new_slot(1.0);
        b.set_leak(NodeId(1), s0).set_leak(NodeId(2), s1);
        b.add_edge(NodeId(1), NodeId(2), s2);
        let net = b.build().unwrap();
        // z_i = 0, z_k = 1 -> -1
        let g = net.elbo_grad(&[false], &[true]).unwrap();
        assert_eq!(g[s2], -1.0);
        // z_k = 0 -> 0
        let g = net.elbo_grad(&[true], &[false]).unwrap();
        assert_eq!(g[s2], 0.0);
    }

    /// Dirac posterior: elbo equals the product of the conditionals.
    #[test]
    fn elbo_is_joint_log_probability() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let (m, p) = (rng.random_range(0..4), rng.random_range(1..4));
            let net = random_net(&mut rng, m, p, false);
            let h = random_bits(&mut rng, m);
            let x = random_bits(&mut rng, p);
            let z = net.full_state(&h, &x).unwrap();
            let mut log_p = 0.0;
            for i in 1..net.n_nodes() {
                let node = NodeId(i as u32);
                let pv: Vec<bool> = net.parents(node).map(|k| z[k.index()]).collect();
                let p0 = net.conditional_prob_zero(node, &pv).unwrap();
                log_p += if z[i] { (1.0 - p0).ln() } else { p0.ln() };
            }
            let elbo = net.elbo_mp(&x, &h).unwrap();
            assert!((elbo - log_p).abs() < 1e-9 * log_p.abs().max(1.0));
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for trial in 0..100 {
            let (m, p) = (rng.random_range(1..4), rng.random_range(1..4));
            let net = random_net(&mut rng, m, p, trial % 2 == 0);
            let h = random_bits(&mut rng, net.n_hidden());
            let x = random_bits(&mut rng, net.n_visible());
            let g = net.elbo_grad(&x, &h).unwrap();
            for s in 0..net.params().len() {
                let step = 1e-5;
                let mut plus = net.clone();
                let v = plus.params().get(s);
                plus.params_mut().set(s, v + step);
                let mut minus = net.clone();
                minus.params_mut().set(s, v - step);
                let fd = (plus.elbo_mp(&x, &h).unwrap() - minus.elbo_mp(&x, &h).unwrap()) / (2.0 * step);
                let rel = (fd - g[s]).abs() / g[s].abs().max(1.0);
                assert!(rel <= 1e-4, "slot {s}: fd {fd} vs {}", g[s]);
            }
        }
    }

    #[test]
    fn shared_slot_gradient_sums_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let shared = random_net(&mut rng, 3, 3, true);
            // same net with one slot per edge
            let mut b = NetworkBuilder::new(shared.n_hidden(), shared.n_visible());
            let mut edge_slot = Vec::new();
            for i in 1..shared.n_nodes() {
                let node = NodeId(i as u32);
                for (k, e) in shared.edges(node).iter().enumerate() {
                    let s = b.new_slot(shared.theta(e));
                    edge_slot.push((e.slot as usize, s));
                    if k == 0 {
                        b.set_leak(node, s);
                    } else {
                        b.add_edge(NodeId(e.parent), node, s);
                    }
                }
            }
            let unshared = b.build().unwrap();
            let h = random_bits(&mut rng, 3);
            let x = random_bits(&mut rng, 3);
            let gs = shared.elbo_grad(&x, &h).unwrap();
            let gu = unshared.elbo_grad(&x, &h).unwrap();
            let mut summed = vec![0.0; gs.len()];
            for (orig, s) in edge_slot {
                summed[orig] += gu[s];
            }
            for (a, b) in gs.iter().zip(&summed) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn frozen_slots_get_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut net = random_net(&mut rng, 2, 2, false);
        for s in 0..net.params().len() {
            net.params_mut().set_frozen(s, true);
        }
        let g = net.elbo_grad(&[true, true], &[true, true]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }
}
