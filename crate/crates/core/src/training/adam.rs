use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::noisy_or::ParamStore;

pub const ADAM_MAGIC: &str = "ADAM 1";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.lr.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// First and second moments per parameter slot.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n_slots: usize) -> Self {
        AdamState {
            m: vec![0.0; n_slots],
            v: vec![0.0; n_slots],
            t: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// One ascent step along `grad`. Moments are updated from the raw
    /// gradient; frozen slots are neither moved nor tracked.
    pub fn ascend(&mut self, config: &AdamConfig, params: &mut ParamStore, grad: &[f64]) -> Result<()> {
        if grad.len() != self.len() || params.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: grad.len().min(params.len()),
            });
        }
        self.t += 1;
        let bc1 = 1.0 - config.beta1.powf(self.t as f64);
        let bc2 = 1.0 - config.beta2.powf(self.t as f64);
        for (s, &g) in grad.iter().enumerate() {
            if params.is_frozen(s) {
                continue;
            }
            self.m[s] = config.beta1 * self.m[s] + (1.0 - config.beta1) * g;
            self.v[s] = config.beta2 * self.v[s] + (1.0 - config.beta2) * g * g;
            let step = config.lr * (self.m[s] / bc1) / ((self.v[s] / bc2).sqrt() + config.eps);
            params.set(s, params.get(s) + step);
        }
        Ok(())
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{ADAM_MAGIC}")?;
        writeln!(w, "t {}", self.t)?;
        writeln!(w, "slots {}", self.len())?;
        for (m, v) in self.m.iter().zip(&self.v) {
            writeln!(w, "{m:.16e} {v:.16e}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((i, l)) => Ok((i, l?.trim().to_string())),
                None => Err(Error::parse(0, format!("missing {what}"))),
            }
        };
        let (i, magic) = next("header")?;
        if magic != ADAM_MAGIC {
            return Err(Error::parse(i, format!("expected `{ADAM_MAGIC}`")));
        }
        let keyed = |(i, l): (usize, String), key: &str| -> Result<u64> {
            l.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::parse(i, format!("expected `{key} <n>`")))
        };
        let t = keyed(next("step count")?, "t")?;
        let n = keyed(next("slot count")?, "slots")? as usize;
        let mut state = AdamState::new(n);
        state.t = t;
        for s in 0..n {
            let (i, l) = next("moment line")?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(|x| x.parse().map_err(|_| Error::parse(i, format!("bad number `{x}`"))))
                .collect::<Result<_>>()?;
            if vals.len() != 2 || vals[1] < 0.0 {
                return Err(Error::parse(i, "expected `<m> <v>` with v >= 0"));
            }
            state.m[s] = vals[0];
            state.v[s] = vals[1];
        }
        Ok(state)
    }
}
