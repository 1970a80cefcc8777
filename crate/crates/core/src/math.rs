//! Scalar helpers shared by the Elbo evaluations.

/// `log(1 - exp(-beta))` for `beta > 0`.
///
/// Switches between `expm1` and `ln_1p` around `ln 2` to keep full relative
/// precision at both ends.
#[inline]
pub fn log1mexp(beta: f64) -> f64 {
    if beta <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if beta < std::f64::consts::LN_2 {
        (-(-beta).exp_m1()).ln()
    } else {
        (-(-beta).exp()).ln_1p()
    }
}

/// Derivative of [`log1mexp`]: `exp(-beta) / (1 - exp(-beta))`.
#[inline]
pub fn dlog1mexp(beta: f64) -> f64 {
    1.0 / beta.exp_m1()
}

/// Binary entropy in nats with `0 log 0 = 0`.
#[inline]
pub fn bernoulli_entropy(q: f64) -> f64 {
    let mut h = 0.0;
    if q > 0.0 {
        h -= q * q.ln();
    }
    if q < 1.0 {
        h -= (1.0 - q) * (1.0 - q).ln();
    }
    h
}

#[inline]
pub fn sigmoid(a: f64) -> f64 {
    if a >= 0.0 {
        1.0 / (1.0 + (-a).exp())
    } else {
        let e = a.exp();
        e / (1.0 + e)
    }
}

/// Parameter value for an activation probability: `-ln(1 - prob)`.
#[inline]
pub fn theta_from_activation(prob: f64) -> f64 {
    -(-prob).ln_1p()
}

/// Parameter value for a failure probability: `-ln(prob)`.
#[inline]
pub fn theta_from_failure(prob: f64) -> f64 {
    -prob.ln()
}
