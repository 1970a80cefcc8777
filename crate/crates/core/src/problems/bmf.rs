//! Binary matrix factorization as a bipartite noisy-OR network.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{theta_from_activation, theta_from_failure};
use crate::noisy_or::{NetworkBuilder, NodeId, NoisyOrNetwork};

use super::{posterior_modes, BinaryMatrix};

/// Threshold on a learned weight: `theta > ln 2` means a failure probability
/// below one half.
pub const WEIGHT_THRESHOLD: f64 = std::f64::consts::LN_2;

/// Noise probability used for the frozen visible leak.
pub const FROZEN_NOISE_PROB: f64 = 0.01;

/// Slot layout of a fully connected `r -> p` bipartite network.
///
/// Weight `(i, j)` lives in slot `i * p + j`, followed by the hidden leak
/// slots (one shared slot, or one per hidden unit) and one shared visible
/// leak slot that is frozen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BipartiteLayout {
    pub r: usize,
    pub p: usize,
    pub shared_prior: bool,
}

impl BipartiteLayout {
    pub fn bmf(r: usize, p: usize) -> Self {
        BipartiteLayout {
            r,
            p,
            shared_prior: true,
        }
    }

    pub fn per_unit_prior(r: usize, p: usize) -> Self {
        BipartiteLayout {
            r,
            p,
            shared_prior: false,
        }
    }

    pub fn weight_slot(&self, i: usize, j: usize) -> usize {
        i * self.p + j
    }

    pub fn prior_slot(&self, i: usize) -> usize {
        self.r * self.p + if self.shared_prior { 0 } else { i }
    }

    pub fn noise_slot(&self) -> usize {
        self.r * self.p + if self.shared_prior { 1 } else { self.r }
    }

    pub fn n_slots(&self) -> usize {
        self.noise_slot() + 1
    }

    pub fn hidden(&self, i: usize) -> NodeId {
        NodeId(1 + i as u32)
    }

    pub fn visible(&self, j: usize) -> NodeId {
        NodeId((1 + self.r + j) as u32)
    }

    /// Network with failure and prior probabilities 0.5 and the visible noise
    /// frozen at 0.01.
    pub fn network(&self) -> Result<NoisyOrNetwork> {
        let mut b = NetworkBuilder::new(self.r, self.p);
        for _ in 0..self.r * self.p {
            b.new_slot(theta_from_failure(0.5));
        }
        let n_prior = if self.shared_prior { 1 } else { self.r };
        for _ in 0..n_prior {
            b.new_slot(theta_from_activation(0.5));
        }
        let noise = b.new_slot(theta_from_activation(FROZEN_NOISE_PROB));
        b.freeze(noise);
        for i in 0..self.r {
            b.set_leak(self.hidden(i), self.prior_slot(i));
        }
        for j in 0..self.p {
            b.set_leak(self.visible(j), noise);
            for i in 0..self.r {
                b.add_edge(self.hidden(i), self.visible(j), self.weight_slot(i, j));
            }
        }
        b.build()
    }

    pub fn check(&self, net: &NoisyOrNetwork) -> Result<()> {
        if net.n_hidden() != self.r || net.n_visible() != self.p || net.params().len() != self.n_slots() {
            return Err(Error::InvalidNetwork(format!(
                "expected a {}x{} bipartite network with {} slots",
                self.r,
                self.p,
                self.n_slots()
            )));
        }
        Ok(())
    }

    /// Learned weights as an `r x p` row-major array.
    pub fn weights(&self, net: &NoisyOrNetwork) -> Result<Vec<f64>> {
        self.check(net)?;
        Ok(net.params().values()[..self.r * self.p].to_vec())
    }

    pub fn thresholded(&self, net: &NoisyOrNetwork) -> Result<BinaryMatrix> {
        let w = self.weights(net)?;
        BinaryMatrix::from_vec(self.r, self.p, w.iter().map(|&v| v > WEIGHT_THRESHOLD).collect())
    }

    /// Prior probability of each hidden unit.
    pub fn priors(&self, net: &NoisyOrNetwork) -> Result<Vec<f64>> {
        self.check(net)?;
        Ok((0..self.r)
            .map(|i| -(-net.params().get(self.prior_slot(i))).exp_m1())
            .collect())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BmfInstance {
    pub n: usize,
    pub r: usize,
    pub p: usize,
    pub p_x: f64,
    pub p_uv: f64,
    pub u_train: BinaryMatrix,
    pub u_test: BinaryMatrix,
    pub v: BinaryMatrix,
    pub x_train: BinaryMatrix,
    pub x_test: BinaryMatrix,
}

/// Entry probability of `U` and `V` that makes `P(X_ij = 1) = p_x`.
pub fn bmf_entry_prob(p_x: f64, r: usize) -> f64 {
    (1.0 - (1.0 - p_x).powf(1.0 / r as f64)).sqrt()
}

pub fn gen_bmf<R: Rng + ?Sized>(n: usize, r: usize, p: usize, p_x: f64, rng: &mut R) -> Result<BmfInstance> {
    if !(p_x > 0.0 && p_x < 1.0) {
        return Err(Error::invalid(format!("p_X must lie in (0, 1), got {p_x}")));
    }
    if r == 0 || r >= n.min(p) {
        return Err(Error::invalid(format!(
            "need 0 < r < min(n, p), got r={r}, n={n}, p={p}"
        )));
    }
    let p_uv = bmf_entry_prob(p_x, r);
    let v = BinaryMatrix::bernoulli(r, p, p_uv, rng);
    let u_train = BinaryMatrix::bernoulli(n, r, p_uv, rng);
    let u_test = BinaryMatrix::bernoulli(n, r, p_uv, rng);
    let x_train = u_train.boolean_product(&v)?;
    let x_test = u_test.boolean_product(&v)?;
    Ok(BmfInstance {
        n,
        r,
        p,
        p_x,
        p_uv,
        u_train,
        u_test,
        v,
        x_train,
        x_test,
    })
}

/// BMF network: one weight per hidden-visible pair, one shared trainable
/// prior and one shared frozen noise.
pub fn bmf_network(p: usize, r: usize) -> Result<NoisyOrNetwork> {
    BipartiteLayout::bmf(r, p).network()
}

/// Fraction of test entries that differ from the Boolean product of the
/// posterior modes with the thresholded weights.
pub fn bmf_test_re(
    net: &NoisyOrNetwork,
    layout: &BipartiteLayout,
    x_test: &BinaryMatrix,
    n_iters: usize,
    damping: f64,
) -> Result<f64> {
    let v_thre = layout.thresholded(net)?;
    let modes = posterior_modes(net, &x_test.row_slices(), n_iters, damping)?;
    let u = BinaryMatrix::from_rows(&modes)?;
    let u = if u.rows() == 0 {
        BinaryMatrix::zeros(0, layout.r)
    } else {
        u
    };
    let rec = u.boolean_product(&v_thre)?;
    let total = x_test.rows() * x_test.cols();
    Ok(if total == 0 {
        0.0
    } else {
        rec.hamming(x_test)? as f64 / total as f64
    })
}

/// Average per-row log-likelihood of the best model without hidden causes:
/// independent pixels at the empirical frequency.
pub fn independent_pixels_log_likelihood(x: &BinaryMatrix) -> f64 {
    let mut total = 0.0;
    for j in 0..x.cols() {
        let ones = (0..x.rows()).filter(|&i| x.get(i, j)).count() as f64;
        let q = ones / x.rows() as f64;
        if q > 0.0 {
            total += ones * q.ln();
        }
        if q < 1.0 {
            total += (x.rows() as f64 - ones) * (1.0 - q).ln();
        }
    }
    total / x.rows() as f64
}
