use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::math::{theta_from_activation, theta_from_failure};
use crate::noisy_or::{NoisyOrNetwork, SlotRole};

/// Projection margin applied after symmetry-breaking noise.
pub const PROB_MARGIN: f64 = 1e-3;

/// Initial failure, prior and noise probabilities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitScheme {
    pub failure_prob: f64,
    pub prior_prob: f64,
    pub noise_prob: f64,
    /// Standard deviation of the Gaussian noise added to failure and prior
    /// probabilities; `0` disables it.
    pub symmetry_noise_sd: f64,
    /// Sets every visible leak slot to `noise_prob` and freezes it.
    pub freeze_noise: bool,
}

impl InitScheme {
    /// Schemes 1 to 4 of the general experiments: (failure, prior = noise)
    /// in (0.5, 0.5), (0.5, 0.1), (0.9, 0.1), (0.9, 0.5).
    pub fn general(k: u8) -> Result<Self> {
        let (failure, prior) = Self::table(k)?;
        Ok(InitScheme {
            failure_prob: failure,
            prior_prob: prior,
            noise_prob: prior,
            symmetry_noise_sd: 0.0,
            freeze_noise: false,
        })
    }

    /// Schemes 1 to 4 for factorization problems: frozen 0.01 visible noise
    /// and `N(0, 0.1)` symmetry-breaking noise.
    pub fn factorization(k: u8) -> Result<Self> {
        let (failure, prior) = Self::table(k)?;
        Ok(InitScheme {
            failure_prob: failure,
            prior_prob: prior,
            noise_prob: 0.01,
            symmetry_noise_sd: 0.1,
            freeze_noise: true,
        })
    }

    fn table(k: u8) -> Result<(f64, f64)> {
        match k {
            1 => Ok((0.5, 0.5)),
            2 => Ok((0.5, 0.1)),
            3 => Ok((0.9, 0.1)),
            4 => Ok((0.9, 0.5)),
            _ => Err(Error::invalid(format!("initialization scheme must be 1..=4, got {k}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("failure", self.failure_prob),
            ("prior", self.prior_prob),
            ("noise", self.noise_prob),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!(
                    "{name} probability must lie in (0, 1), got {p}"
                )));
            }
        }
        if !(self.symmetry_noise_sd >= 0.0 && self.symmetry_noise_sd.is_finite()) {
            return Err(Error::invalid("symmetry noise must be a nonnegative real"));
        }
        Ok(())
    }
}

/// Parameters of `net` reinitialized from `scheme`, one draw per slot.
///
/// Slots keep their frozen flag; frozen slots keep their value unless
/// `freeze_noise` rewrites the visible leaks.
pub fn init_params<R: Rng + ?Sized>(net: &NoisyOrNetwork, scheme: &InitScheme, rng: &mut R) -> Result<NoisyOrNetwork> {
    scheme.validate()?;
    let roles = net.slot_roles()?;
    let normal = if scheme.symmetry_noise_sd > 0.0 {
        Some(Normal::new(0.0, scheme.symmetry_noise_sd).map_err(|e| Error::invalid(e.to_string()))?)
    } else {
        None
    };
    let jitter = |p: f64, rng: &mut R| match &normal {
        Some(n) => (p + n.sample(rng)).clamp(PROB_MARGIN, 1.0 - PROB_MARGIN),
        None => p,
    };
    let mut params = net.params().clone();
    for (s, role) in roles.iter().enumerate() {
        if params.is_frozen(s) {
            continue;
        }
        let theta = match role {
            SlotRole::Failure => theta_from_failure(jitter(scheme.failure_prob, rng)),
            SlotRole::Prior => theta_from_activation(jitter(scheme.prior_prob, rng)),
            SlotRole::Noise => theta_from_activation(scheme.noise_prob),
        };
        params.set(s, theta);
    }
    if scheme.freeze_noise {
        for s in net.visible_leak_slots() {
            params.set(s, theta_from_activation(scheme.noise_prob));
            params.set_frozen(s, true);
        }
    }
    net.with_params(params)
}
