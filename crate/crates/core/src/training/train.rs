use std::io::Write;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::adam::{AdamConfig, AdamState};
use crate::error::{Error, Result};
use crate::mf_vi::{vi_batch_gradient, ViConfig};
use crate::noisy_or::{LoweredNetwork, NoisyOrNetwork};
use crate::pmp::{pmp_batch, PmpQueryConfig};
use crate::rng::rng_from;

/// Stream tag separating epoch shuffles from per-step query seeds.
const SHUFFLE_STREAM: u64 = 0x5348_5546;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub adam: AdamConfig,
    pub batch_size: usize,
    pub n_steps: usize,
    pub temperature: f64,
    pub clip_eps: f64,
    pub n_iters: usize,
    pub damping: f64,
    pub seed: u64,
    /// Calls the evaluation hook every `eval_every` steps; `0` disables it.
    pub eval_every: usize,
    /// Measures wall-clock seconds per update; otherwise `0` is recorded.
    pub record_timing: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            adam: AdamConfig::default(),
            batch_size: 20,
            n_steps: 1000,
            temperature: 1.0,
            clip_eps: 1e-5,
            n_iters: 100,
            damping: 0.5,
            seed: 0,
            eval_every: 0,
            record_timing: false,
        }
    }
}

impl TrainConfig {
    pub fn query(&self) -> PmpQueryConfig {
        PmpQueryConfig {
            temperature: self.temperature,
            n_iters: self.n_iters,
            damping: self.damping,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.clip_eps.is_nan() || self.clip_eps <= 0.0 {
            return Err(Error::invalid("clip floor must be positive"));
        }
        self.adam.validate()?;
        self.query().validate()
    }
}

/// Which Elbo the trainer ascends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Objective {
    /// Dirac posterior at the perturb-and-max-product assignment.
    MaxProduct,
    /// Mean-field bound with per-sample variational optimization.
    MeanField(ViConfig),
}

/// Mean Elbo and mean gradient of a batch at the current parameters, with
/// queries answered by perturb-and-max-product.
///
/// Query `i` of step `step` is seeded from `(seed, step, i)`; per-sample
/// gradients are summed in batch order.
pub fn mp_batch_gradient<X: AsRef<[bool]> + Sync>(
    net: &NoisyOrNetwork,
    lowered: &LoweredNetwork,
    batch: &[X],
    query: &PmpQueryConfig,
    step: u64,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    let assignments = pmp_batch(lowered, batch, query, &[step])?;
    let per_sample: Vec<(f64, Vec<f64>)> = assignments
        .par_iter()
        .map(|a| {
            let z = net.full_state(&a.hidden, &a.visible)?;
            let mut g = vec![0.0; net.params().len()];
            net.accumulate_grad(&z, &mut g);
            Ok((net.log_joint(&z), g))
        })
        .collect::<Result<_>>()?;
    Ok(reduce_mean(per_sample, net.params().len()))
}

/// Ordered mean of per-sample `(elbo, gradient)` pairs.
pub(crate) fn reduce_mean(per_sample: Vec<(f64, Vec<f64>)>, n_slots: usize) -> (f64, Vec<f64>) {
    let n = per_sample.len() as f64;
    let mut elbo = 0.0;
    let mut grad = vec![0.0; n_slots];
    for (e, g) in per_sample {
        elbo += e;
        for (acc, x) in grad.iter_mut().zip(g) {
            *acc += x;
        }
    }
    grad.iter_mut().for_each(|g| *g /= n);
    (elbo / n, grad)
}

fn check_batch<X: AsRef<[bool]>>(net: &NoisyOrNetwork, batch: &[X]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    for x in batch {
        if x.as_ref().len() != net.n_visible() {
            return Err(Error::DimensionMismatch {
                expected: net.n_visible(),
                got: x.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Adam ascent along a batch gradient followed by the `theta >= eps` clip on
/// trainable slots. Returns the batch Elbo at the pre-update parameters.
fn apply_step<X: AsRef<[bool]> + Sync>(
    net: &mut NoisyOrNetwork,
    lowered: &mut LoweredNetwork,
    batch: &[X],
    config: &TrainConfig,
    objective: &Objective,
    adam: &mut AdamState,
    step: u64,
) -> Result<f64> {
    check_batch(net, batch)?;
    lowered.refresh(net);
    let (elbo, grad) = match objective {
        Objective::MaxProduct => mp_batch_gradient(net, lowered, batch, &config.query(), step)?,
        Objective::MeanField(vi) => vi_batch_gradient(net, batch, vi)?,
    };
    adam.ascend(&config.adam, net.params_mut(), &grad)?;
    net.params_mut().clip(config.clip_eps);
    Ok(elbo)
}

/// One update of `objective` on `batch`; `step` seeds the queries.
pub fn update_parameters_with<X: AsRef<[bool]> + Sync>(
    net: &mut NoisyOrNetwork,
    batch: &[X],
    config: &TrainConfig,
    objective: &Objective,
    adam: &mut AdamState,
    step: u64,
) -> Result<f64> {
    config.validate()?;
    let mut lowered = LoweredNetwork::new(net);
    apply_step(net, &mut lowered, batch, config, objective, adam, step)
}

/// One stochastic update: perturb-and-max-product queries for every sample,
/// the averaged closed-form gradient, an Adam step and the clip.
pub fn update_parameters<X: AsRef<[bool]> + Sync>(
    net: &mut NoisyOrNetwork,
    batch: &[X],
    config: &TrainConfig,
    adam: &mut AdamState,
    step: u64,
) -> Result<f64> {
    update_parameters_with(net, batch, config, &Objective::MaxProduct, adam, step)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistoryEntry {
    pub step: usize,
    pub elbo: f64,
    pub update_seconds: f64,
}

/// Per-step batch Elbo and update time.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub entries: Vec<HistoryEntry>,
}

impl History {
    pub const HEADER: &'static str = "step,elbo,update_seconds";

    pub fn push(&mut self, e: HistoryEntry) {
        self.entries.push(e);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", Self::HEADER)?;
        for e in &self.entries {
            writeln!(w, "{},{},{}", e.step, e.elbo, e.update_seconds)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Mean Elbo over the last `n` entries.
    pub fn tail_mean(&self, n: usize) -> Option<f64> {
        let n = n.min(self.len());
        (n > 0).then(|| self.entries[self.len() - n..].iter().map(|e| e.elbo).sum::<f64>() / n as f64)
    }
}

/// Mini-batch iterator state plus the model and optimizer being trained.
pub struct Trainer<'a, X> {
    net: NoisyOrNetwork,
    lowered: LoweredNetwork,
    adam: AdamState,
    config: TrainConfig,
    objective: Objective,
    data: &'a [X],
    order: Vec<usize>,
    cursor: usize,
    epoch: u64,
    step: u64,
    batch: Vec<&'a [bool]>,
}

impl<'a, X: AsRef<[bool]> + Sync> Trainer<'a, X> {
    pub fn new(net: NoisyOrNetwork, data: &'a [X], config: TrainConfig, objective: Objective) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::invalid("empty dataset"));
        }
        check_batch(&net, data)?;
        if let Objective::MeanField(vi) = &objective {
            vi.validate()?;
        }
        let adam = AdamState::new(net.params().len());
        let lowered = LoweredNetwork::new(&net);
        Ok(Trainer {
            net,
            lowered,
            adam,
            config,
            objective,
            data,
            order: Vec::new(),
            cursor: 0,
            epoch: 0,
            step: 0,
            batch: Vec::new(),
        })
    }

    /// Resumes from a saved optimizer state.
    pub fn with_adam(mut self, adam: AdamState) -> Result<Self> {
        if adam.len() != self.net.params().len() {
            return Err(Error::DimensionMismatch {
                expected: self.net.params().len(),
                got: adam.len(),
            });
        }
        self.adam = adam;
        Ok(self)
    }

    pub fn net(&self) -> &NoisyOrNetwork {
        &self.net
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// Reshuffled once per epoch; the last partial batch of an epoch is kept.
    fn next_batch(&mut self) {
        if self.cursor >= self.order.len() {
            self.order = (0..self.data.len()).collect();
            let mut rng = rng_from(self.config.seed, &[SHUFFLE_STREAM, self.epoch]);
            self.order.shuffle(&mut rng);
            self.epoch += 1;
            self.cursor = 0;
        }
        let end = (self.cursor + self.config.batch_size).min(self.order.len());
        self.batch.clear();
        let data = self.data;
        self.batch
            .extend(self.order[self.cursor..end].iter().map(|&i| data[i].as_ref()));
        self.cursor = end;
    }

    pub fn step(&mut self) -> Result<HistoryEntry> {
        self.next_batch();
        let start = self.config.record_timing.then(Instant::now);
        let batch = std::mem::take(&mut self.batch);
        let result = apply_step(
            &mut self.net,
            &mut self.lowered,
            &batch,
            &self.config,
            &self.objective,
            &mut self.adam,
            self.step,
        );
        self.batch = batch;
        let elbo = result?;
        let entry = HistoryEntry {
            step: self.step as usize,
            elbo,
            update_seconds: start.map_or(0.0, |s| s.elapsed().as_secs_f64()),
        };
        self.step += 1;
        Ok(entry)
    }

    pub fn into_parts(self) -> (NoisyOrNetwork, AdamState) {
        (self.net, self.adam)
    }
}

pub struct TrainOutput {
    pub net: NoisyOrNetwork,
    pub history: History,
    pub adam: AdamState,
}

/// Runs `config.n_steps` updates. `on_eval(step, net)` is called after every
/// `config.eval_every`-th step.
pub fn train_with<X, F>(
    net: NoisyOrNetwork,
    data: &[X],
    config: &TrainConfig,
    objective: Objective,
    adam: Option<AdamState>,
    mut on_eval: F,
) -> Result<TrainOutput>
where
    X: AsRef<[bool]> + Sync,
    F: FnMut(usize, &NoisyOrNetwork) -> Result<()>,
{
    let mut trainer = Trainer::new(net, data, *config, objective)?;
    if let Some(a) = adam {
        trainer = trainer.with_adam(a)?;
    }
    let mut history = History::default();
    for _ in 0..config.n_steps {
        let entry = trainer.step()?;
        history.push(entry);
        if config.eval_every > 0 && (entry.step + 1) % config.eval_every == 0 {
            on_eval(entry.step + 1, trainer.net())?;
        }
    }
    let (net, adam) = trainer.into_parts();
    Ok(TrainOutput { net, history, adam })
}

/// Max-product training with perturbed posterior queries.
pub fn train<X: AsRef<[bool]> + Sync>(net: NoisyOrNetwork, data: &[X], config: &TrainConfig) -> Result<TrainOutput> {
    train_with(net, data, config, Objective::MaxProduct, None, |_, _| Ok(()))
}
