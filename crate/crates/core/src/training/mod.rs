//! Stochastic ascent of the Elbo over mini-batches.
//!
//! Each step answers one posterior query per sample, averages the per-sample
//! gradients, takes an Adam step and clips every trainable parameter to
//! `theta >= eps`.

mod adam;
mod init;
mod train;

pub use adam::{AdamConfig, AdamState, ADAM_MAGIC};
pub use init::{init_params, InitScheme, PROB_MARGIN};
pub(crate) use train::reduce_mean;
pub use train::{
    mp_batch_gradient, train, train_with, update_parameters, update_parameters_with, History, HistoryEntry, Objective,
    TrainConfig, TrainOutput, Trainer,
};
