//! Mean-field variational baseline.
//!
//! For a factorized posterior `q(h) = prod q_i^h_i (1 - q_i)^(1 - h_i)` the
//! expected log-likelihood of a noisy-OR node is lower-bounded with Jensen's
//! inequality using per-edge weights `r_ki` on the simplex of the node's
//! parents. Writing `mu` for `q` on hidden nodes, the observation on visible
//! nodes and 1 on the leak, and `u_ki = theta_0i + theta_ki / r_ki`:
//!
//! ```text
//! E_i = mu_i [f(theta_0i) + sum_k r_ki mu_k (f(u_ki) - f(theta_0i))]
//!     + (1 - mu_i) (-theta_0i - sum_k theta_ki mu_k)
//! ```
//!
//! and the bound is `sum_i E_i + H(q)`. Edges with `r_ki = 0` drop out of the
//! Jensen sum.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{bernoulli_entropy, dlog1mexp, log1mexp, sigmoid};
use crate::noisy_or::{NodeId, NoisyOrNetwork};
use crate::pmp::posterior_mode;
use crate::training::{
    reduce_mean, train_with, update_parameters_with, AdamConfig, AdamState, History, Objective, TrainConfig,
    TrainOutput,
};

/// Hidden-node activation probabilities of one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanFieldPosterior {
    pub q: Vec<f64>,
}

/// Jensen weights indexed by global edge; leak edges carry 0 and are unused.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeights {
    pub r: Vec<f64>,
}

impl MeanFieldPosterior {
    pub fn uniform(n_hidden: usize) -> Self {
        MeanFieldPosterior { q: vec![0.5; n_hidden] }
    }

    pub fn entropy(&self) -> f64 {
        self.q.iter().map(|&q| bernoulli_entropy(q)).sum()
    }
}

impl EdgeWeights {
    /// Equal weights over the parents of every node.
    pub fn uniform(net: &NoisyOrNetwork) -> Self {
        let mut r = vec![0.0; net.n_edges()];
        for i in 1..net.n_nodes() {
            let range = net.edge_range(NodeId(i as u32));
            let n_par = range.len() - 1;
            for e in range.skip(1) {
                r[e] = 1.0 / n_par as f64;
            }
        }
        EdgeWeights { r }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ViConfig {
    pub inner_steps: usize,
    /// Adam learning rate on the logits of `q` and `r`.
    pub lr: f64,
}

impl Default for ViConfig {
    fn default() -> Self {
        ViConfig {
            inner_steps: 50,
            lr: 0.1,
        }
    }
}

impl ViConfig {
    pub fn validate(&self) -> Result<()> {
        if self.inner_steps == 0 {
            return Err(Error::invalid("inner_steps must be at least 1"));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid("inner learning rate must be positive"));
        }
        Ok(())
    }
}

fn node_means(net: &NoisyOrNetwork, observation: &[bool], q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != net.n_hidden() {
        return Err(Error::DimensionMismatch {
            expected: net.n_hidden(),
            got: q.len(),
        });
    }
    if observation.len() != net.n_visible() {
        return Err(Error::DimensionMismatch {
            expected: net.n_visible(),
            got: observation.len(),
        });
    }
    let mut mu = Vec::with_capacity(net.n_nodes());
    mu.push(1.0);
    mu.extend_from_slice(q);
    mu.extend(observation.iter().map(|&x| if x { 1.0 } else { 0.0 }));
    Ok(mu)
}

/// Bound value with optional gradients w.r.t. node means, edge weights and
/// parameter slots.
struct Evaluation {
    value: f64,
    d_mu: Vec<f64>,
    d_r: Vec<f64>,
    d_theta: Vec<f64>,
}

fn evaluate(net: &NoisyOrNetwork, mu: &[f64], r: &[f64], want_grad: bool, want_theta: bool) -> Evaluation {
    let n = net.n_nodes();
    let mut d_mu = if want_grad { vec![0.0; n] } else { Vec::new() };
    let mut d_r = if want_grad {
        vec![0.0; net.n_edges()]
    } else {
        Vec::new()
    };
    let mut d_theta = if want_theta {
        vec![0.0; net.params().len()]
    } else {
        Vec::new()
    };
    let mut value = 0.0;
    for i in 1..n {
        let node = NodeId(i as u32);
        let range = net.edge_range(node);
        let edges = net.edges(node);
        let t0 = net.theta(&edges[0]);
        let f0 = log1mexp(t0);
        let fp0 = dlog1mexp(t0);
        let mut big_f = f0;
        let mut big_g = -t0;
        let mut df_dt0 = fp0;
        for (e, edge) in range.clone().zip(edges).skip(1) {
            let tk = net.theta(edge);
            let mk = mu[edge.parent as usize];
            big_g -= tk * mk;
            let rk = r[e];
            if rk > 0.0 {
                let u = t0 + tk / rk;
                big_f += rk * mk * (log1mexp(u) - f0);
                df_dt0 += rk * mk * (dlog1mexp(u) - fp0);
            }
        }
        let mi = mu[i];
        value += mi * big_f + (1.0 - mi) * big_g;
        if want_grad {
            d_mu[i] += big_f - big_g;
        }
        if !(want_grad || want_theta) {
            continue;
        }
        for (e, edge) in range.zip(edges).skip(1) {
            let tk = net.theta(edge);
            let k = edge.parent as usize;
            let mk = mu[k];
            let rk = r[e];
            // f(u) - f(theta_0), and f'(u) theta / r, at the r -> 0 limit when r = 0
            let (diff, fpu, slope) = if rk > 0.0 {
                let u = t0 + tk / rk;
                let fpu = dlog1mexp(u);
                let slope = fpu * tk / rk;
                (log1mexp(u) - f0, fpu, if slope.is_finite() { slope } else { 0.0 })
            } else {
                (-f0, 0.0, 0.0)
            };
            if want_grad {
                d_mu[k] += mi * rk * diff - (1.0 - mi) * tk;
                d_r[e] += mi * mk * (diff - slope);
            }
            if want_theta {
                d_theta[edge.slot as usize] += mi * mk * fpu - (1.0 - mi) * mk;
            }
        }
        if want_theta {
            d_theta[edges[0].slot as usize] += mi * df_dt0 - (1.0 - mi);
        }
    }
    for k in 1..=net.n_hidden() {
        let q = mu[k];
        value += bernoulli_entropy(q);
        if want_grad {
            let qc = q.clamp(1e-300, 1.0 - 1e-16);
            d_mu[k] += ((1.0 - qc) / qc).ln();
        }
    }
    if want_theta {
        for (s, g) in d_theta.iter_mut().enumerate() {
            if net.params().is_frozen(s) {
                *g = 0.0;
            }
        }
    }
    Evaluation {
        value,
        d_mu,
        d_r,
        d_theta,
    }
}

pub fn elbo_vi(net: &NoisyOrNetwork, observation: &[bool], q: &MeanFieldPosterior, r: &EdgeWeights) -> Result<f64> {
    let mu = node_means(net, observation, &q.q)?;
    check_weights(net, r)?;
    Ok(evaluate(net, &mu, &r.r, false, false).value)
}

/// Gradient of [`elbo_vi`] w.r.t. the parameter slots at fixed `(q, r)`;
/// frozen slots get 0.
pub fn elbo_vi_grad(
    net: &NoisyOrNetwork,
    observation: &[bool],
    q: &MeanFieldPosterior,
    r: &EdgeWeights,
) -> Result<Vec<f64>> {
    let mu = node_means(net, observation, &q.q)?;
    check_weights(net, r)?;
    Ok(evaluate(net, &mu, &r.r, false, true).d_theta)
}

/// Gradients w.r.t. `q` (hidden nodes) and `r` (global edges).
pub fn elbo_vi_variational_grad(
    net: &NoisyOrNetwork,
    observation: &[bool],
    q: &MeanFieldPosterior,
    r: &EdgeWeights,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mu = node_means(net, observation, &q.q)?;
    check_weights(net, r)?;
    let ev = evaluate(net, &mu, &r.r, true, false);
    Ok((ev.d_mu[1..=net.n_hidden()].to_vec(), ev.d_r))
}

fn check_weights(net: &NoisyOrNetwork, r: &EdgeWeights) -> Result<()> {
    if r.r.len() != net.n_edges() {
        return Err(Error::DimensionMismatch {
            expected: net.n_edges(),
            got: r.r.len(),
        });
    }
    Ok(())
}

/// Result of the inner variational optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct ViFit {
    pub q: MeanFieldPosterior,
    pub r: EdgeWeights,
    pub elbo: f64,
}

/// Maximizes [`elbo_vi`] over `(q, r)` from `q = 0.5` and uniform `r`.
///
/// `q` is the logistic function of free logits and `r` a per-node softmax;
/// both are moved by Adam. The best iterate (including the start) is
/// returned.
pub fn optimize_vi(net: &NoisyOrNetwork, observation: &[bool], config: &ViConfig) -> Result<ViFit> {
    config.validate()?;
    let m = net.n_hidden();
    let mut mu = node_means(net, observation, &vec![0.5; m])?;
    let mut r = EdgeWeights::uniform(net).r;
    let mut logits_q = vec![0.0; m];
    let mut logits_r = vec![0.0; net.n_edges()];
    let adam_cfg = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(m + net.n_edges());
    let mut grad = vec![0.0; m + net.n_edges()];

    let mut best_value = f64::NEG_INFINITY;
    let mut best = (Vec::new(), Vec::new());
    for it in 0..=config.inner_steps {
        let ev = evaluate(net, &mu, &r, it < config.inner_steps, false);
        if ev.value > best_value {
            best_value = ev.value;
            best = (mu[1..=m].to_vec(), r.clone());
        }
        if it == config.inner_steps {
            break;
        }
        // chain rule through the logistic and softmax maps
        for k in 0..m {
            let q = mu[1 + k];
            grad[k] = ev.d_mu[1 + k] * q * (1.0 - q);
        }
        for i in 1..net.n_nodes() {
            let range = net.edge_range(NodeId(i as u32));
            let parents = range.start + 1..range.end;
            let mean: f64 = parents.clone().map(|e| r[e] * ev.d_r[e]).sum();
            for e in parents {
                grad[m + e] = r[e] * (ev.d_r[e] - mean);
            }
        }
        adam_step(&mut adam, &adam_cfg, &mut logits_q, &mut logits_r, &grad);
        for k in 0..m {
            mu[1 + k] = sigmoid(logits_q[k]);
        }
        for i in 1..net.n_nodes() {
            let range = net.edge_range(NodeId(i as u32));
            softmax_into(
                &logits_r[range.start + 1..range.end],
                &mut r[range.start + 1..range.end],
            );
        }
    }
    Ok(ViFit {
        q: MeanFieldPosterior { q: best.0 },
        r: EdgeWeights { r: best.1 },
        elbo: best_value,
    })
}

fn adam_step(adam: &mut AdamState, cfg: &AdamConfig, a: &mut [f64], b: &mut [f64], grad: &[f64]) {
    adam.t += 1;
    let bc1 = 1.0 - cfg.beta1.powf(adam.t as f64);
    let bc2 = 1.0 - cfg.beta2.powf(adam.t as f64);
    let na = a.len();
    for (s, &g) in grad.iter().enumerate() {
        adam.m[s] = cfg.beta1 * adam.m[s] + (1.0 - cfg.beta1) * g;
        adam.v[s] = cfg.beta2 * adam.v[s] + (1.0 - cfg.beta2) * g * g;
        let step = cfg.lr * (adam.m[s] / bc1) / ((adam.v[s] / bc2).sqrt() + cfg.eps);
        if s < na {
            a[s] += step;
        } else {
            b[s - na] += step;
        }
    }
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - mx).exp();
        z += *o;
    }
    out.iter_mut().for_each(|o| *o /= z);
}

/// `h_i = 1` iff `q_i >= 0.5`.
pub fn vi_posterior_mode(q: &MeanFieldPosterior) -> Vec<bool> {
    q.q.iter().map(|&p| p >= 0.5).collect()
}

/// Mean bound and mean parameter gradient of a batch, each sample using its
/// own optimized `(q, r)`.
pub fn vi_batch_gradient<X: AsRef<[bool]> + Sync>(
    net: &NoisyOrNetwork,
    batch: &[X],
    config: &ViConfig,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let per_sample: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|x| {
            let fit = optimize_vi(net, x.as_ref(), config)?;
            let g = elbo_vi_grad(net, x.as_ref(), &fit.q, &fit.r)?;
            Ok((fit.elbo, g))
        })
        .collect::<Result<_>>()?;
    Ok(reduce_mean(per_sample, net.params().len()))
}

/// One Adam step on the batch-averaged mean-field bound; returns the mean
/// bound at the pre-update parameters.
pub fn vi_update_parameters<X: AsRef<[bool]> + Sync>(
    net: &mut NoisyOrNetwork,
    batch: &[X],
    vi: &ViConfig,
    config: &TrainConfig,
    adam: &mut AdamState,
) -> Result<f64> {
    vi.validate()?;
    update_parameters_with(net, batch, config, &Objective::MeanField(*vi), adam, adam.t)
}

/// `mp_steps` of max-product training, then `vi_steps` of mean-field
/// training from the resulting parameters with a fresh optimizer.
pub fn hybrid_train<X: AsRef<[bool]> + Sync>(
    net: NoisyOrNetwork,
    data: &[X],
    mp_steps: usize,
    vi_steps: usize,
    config: &TrainConfig,
    vi: &ViConfig,
) -> Result<TrainOutput> {
    let mp_config = TrainConfig {
        n_steps: mp_steps,
        ..*config
    };
    let mp = train_with(net, data, &mp_config, Objective::MaxProduct, None, |_, _| Ok(()))?;
    if vi_steps == 0 {
        return Ok(mp);
    }
    let vi_config = TrainConfig {
        n_steps: vi_steps,
        ..*config
    };
    let out = train_with(mp.net, data, &vi_config, Objective::MeanField(*vi), None, |_, _| Ok(()))?;
    let mut history = History::default();
    history.entries.extend(mp.history.entries);
    history.entries.extend(out.history.entries.into_iter().map(|mut e| {
        e.step += mp_steps;
        e
    }));
    Ok(TrainOutput {
        net: out.net,
        history,
        adam: out.adam,
    })
}

/// Both bounds of one observation and their maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestElbo {
    pub mp: f64,
    pub vi: f64,
    pub best: f64,
}

/// `max(Elbo^MP at the max-product mode, Elbo^VI at the optimized (q, r))`.
pub fn best_elbo(
    net: &NoisyOrNetwork,
    observation: &[bool],
    n_iters: usize,
    damping: f64,
    vi: &ViConfig,
) -> Result<BestElbo> {
    let mode = posterior_mode(net, observation, n_iters, damping)?;
    let mp = mode.elbo_mp(net)?;
    let vi = optimize_vi(net, observation, vi)?.elbo;
    Ok(BestElbo {
        mp,
        vi,
        best: mp.max(vi),
    })
}
