//! Recovery of ground-truth features by overparametrized bipartite networks.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::theta_from_activation;
use crate::noisy_or::NoisyOrNetwork;

use super::hungarian::min_cost_matching;
use super::BinaryMatrix;

/// Learned units with a prior probability below this are ignored.
pub const MIN_PRIOR: f64 = 0.02;
/// A ground-truth feature counts as recovered below this matching cost.
pub const RECOVERY_COST: f64 = 1.0;

/// Ground-truth bipartite network: `features[k][j]` is the weight from cause
/// `k` to pixel `j`, `priors[k]` and `noise` are leak weights.
#[derive(Clone, Debug, PartialEq)]
pub struct OvpmGroundTruth {
    pub features: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
    pub noise: f64,
}

impl OvpmGroundTruth {
    /// Eight line features on an 8x8 grid (rows 1, 3, 5, 7 and columns 0, 2,
    /// 4, 6) with failure probability 0.1 on the line and 1 elsewhere.
    pub fn lines() -> Self {
        let on = -(0.1f64.ln());
        let mut features = Vec::new();
        for row in [1, 3, 5, 7] {
            features.push((0..64).map(|j| if j / 8 == row { on } else { 0.0 }).collect());
        }
        for col in [0, 2, 4, 6] {
            features.push((0..64).map(|j| if j % 8 == col { on } else { 0.0 }).collect());
        }
        OvpmGroundTruth {
            features,
            priors: vec![theta_from_activation(0.25); 8],
            noise: theta_from_activation(0.01),
        }
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn n_pixels(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.n_pixels();
        if self.features.is_empty() || self.priors.len() != self.features.len() {
            return Err(Error::invalid("need one prior per ground-truth feature"));
        }
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if self.features.iter().any(|f| f.len() != p || !f.iter().all(|&v| ok(v)))
            || !self.priors.iter().all(|&v| ok(v))
            || !ok(self.noise)
        {
            return Err(Error::invalid(
                "ground-truth weights must be nonnegative reals of equal length",
            ));
        }
        Ok(())
    }
}

/// `n` samples from the ground-truth network.
pub fn gen_ovpm<R: Rng + ?Sized>(gt: &OvpmGroundTruth, n: usize, rng: &mut R) -> Result<BinaryMatrix> {
    gt.validate()?;
    let p = gt.n_pixels();
    let mut x = BinaryMatrix::zeros(n, p);
    let mut beta = vec![0.0; p];
    for i in 0..n {
        beta.fill(gt.noise);
        for (f, &prior) in gt.features.iter().zip(&gt.priors) {
            if rng.random_bool(-(-prior).exp_m1()) {
                for (b, &w) in beta.iter_mut().zip(f) {
                    *b += w;
                }
            }
        }
        for (j, &b) in beta.iter().enumerate() {
            x.set(i, j, rng.random_bool(-(-b).exp_m1()));
        }
    }
    Ok(x)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryReport {
    pub recovered: usize,
    pub full_recovery: bool,
    /// `(learned unit, ground-truth feature, cost)` for every matched pair.
    pub matching: Vec<(usize, usize, f64)>,
}

/// Learned weights `features[k][j]` and prior weights of each hidden unit of
/// a two-layer network, read from its edges.
pub fn bipartite_parameters(net: &NoisyOrNetwork) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = net.n_hidden();
    let mut features = vec![vec![0.0; net.n_visible()]; m];
    for (j, v) in net.visible_nodes().enumerate() {
        for e in &net.edges(v)[1..] {
            let k = e.parent as usize;
            if (1..=m).contains(&k) {
                features[k - 1][j] = net.theta(e);
            }
        }
    }
    let priors = net.hidden_nodes().map(|h| net.params().get(net.leak_slot(h))).collect();
    (features, priors)
}

/// Counts ground-truth features matched to a kept learned unit with an
/// `l_inf` distance below [`RECOVERY_COST`].
pub fn ovpm_recovery(learned: &[Vec<f64>], learned_priors: &[f64], gt: &OvpmGroundTruth) -> Result<RecoveryReport> {
    gt.validate()?;
    if learned.len() != learned_priors.len() {
        return Err(Error::DimensionMismatch {
            expected: learned.len(),
            got: learned_priors.len(),
        });
    }
    let p = gt.n_pixels();
    let kept: Vec<usize> = (0..learned.len())
        .filter(|&k| -(-learned_priors[k]).exp_m1() >= MIN_PRIOR)
        .collect();
    for &k in &kept {
        if learned[k].len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: learned[k].len(),
            });
        }
    }
    let n_gt = gt.n_features();
    let mut cost = Vec::with_capacity(kept.len() * n_gt);
    for &k in &kept {
        for g in &gt.features {
            cost.push(learned[k].iter().zip(g).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
    }
    let assignment = min_cost_matching(&cost, kept.len(), n_gt)?;
    let matching: Vec<(usize, usize, f64)> = assignment
        .iter()
        .enumerate()
        .filter_map(|(row, g)| g.map(|g| (kept[row], g, cost[row * n_gt + g])))
        .collect();
    let recovered = matching.iter().filter(|m| m.2 < RECOVERY_COST).count();
    Ok(RecoveryReport {
        recovered,
        full_recovery: recovered == n_gt,
        matching,
    })
}

/// [`ovpm_recovery`] on the parameters of a learned two-layer network.
pub fn ovpm_recovery_net(net: &NoisyOrNetwork, gt: &OvpmGroundTruth) -> Result<RecoveryReport> {
    let (features, priors) = bipartite_parameters(net);
    ovpm_recovery(&features, &priors, gt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::bmf::BipartiteLayout;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_features_shape() {
        let gt = OvpmGroundTruth::lines();
        assert_eq!(gt.n_features(), 8);
        assert_eq!(gt.n_pixels(), 64);
        for f in &gt.features {
            assert_eq!(f.iter().filter(|&&v| v > 0.0).count(), 8);
        }
    }

    #[test]
    fn exact_parameters_are_recovered_in_any_order() {
        let gt = OvpmGroundTruth::lines();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut order: Vec<usize> = (0..8).collect();
        order.shuffle(&mut rng);
        let learned: Vec<Vec<f64>> = order.iter().map(|&k| gt.features[k].clone()).collect();
        let r = ovpm_recovery(&learned, &gt.priors, &gt).unwrap();
        assert_eq!(r.recovered, 8);
        assert!(r.full_recovery);
        for (l, g, c) in r.matching {
            assert_eq!(order[l], g);
            assert_eq!(c, 0.0);
        }
    }

    #[test]
    fn extra_units_do_not_hurt() {
        let gt = OvpmGroundTruth::lines();
        let mut learned = gt.features.clone();
        learned.extend((0..8).map(|_| vec![5.0; 64]));
        let priors = vec![1.0; 16];
        assert_eq!(ovpm_recovery(&learned, &priors, &gt).unwrap().recovered, 8);
    }

    #[test]
    fn rare_units_are_discarded() {
        let gt = OvpmGroundTruth::lines();
        let priors = vec![theta_from_activation(0.019); 8];
        let r = ovpm_recovery(&gt.features, &priors, &gt).unwrap();
        assert_eq!(r.recovered, 0);
        assert!(r.matching.is_empty());
    }

    #[test]
    fn cost_threshold_is_strict() {
        let gt = OvpmGroundTruth::lines();
        let mut learned = gt.features.clone();
        learned[0][5] += 1.0;
        learned[1][0] += 0.999;
        let r = ovpm_recovery(&learned, &gt.priors, &gt).unwrap();
        assert_eq!(r.recovered, 7);
    }

    #[test]
    fn reads_parameters_from_a_network() {
        let gt = OvpmGroundTruth::lines();
        let layout = BipartiteLayout::per_unit_prior(10, 64);
        let mut net = layout.network().unwrap();
        for k in 0..10 {
            for j in 0..64 {
                let v = if k < 8 { gt.features[k][j] } else { 3.0 };
                net.params_mut().set(layout.weight_slot(k, j), v);
            }
            let prior = if k < 8 { 0.25 } else { 0.01 };
            net.params_mut().set(layout.prior_slot(k), theta_from_activation(prior));
        }
        let r = ovpm_recovery_net(&net, &gt).unwrap();
        assert_eq!(r.recovered, 8);
        assert!(r.matching.iter().all(|m| m.0 < 8));
    }

    #[test]
    fn generated_pixel_frequencies() {
        let gt = OvpmGroundTruth::lines();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gen_ovpm(&gt, 20_000, &mut rng).unwrap();
        // pixel (0,0) lies on one column feature only
        let p_off = 0.99 * 0.75 + 0.99 * 0.25 * 0.1;
        let p1 = (0..20_000).filter(|&i| x.get(i, 0)).count() as f64 / 20_000.0;
        assert!((p1 - (1.0 - p_off)).abs() < 0.015, "{p1}");
        // pixel (1,0) lies on row 1 and column 0
        let p_off2 = 0.99 * (0.75 + 0.25 * 0.1) * (0.75 + 0.25 * 0.1);
        let p2 = (0..20_000).filter(|&i| x.get(i, 8)).count() as f64 / 20_000.0;
        assert!((p2 - (1.0 - p_off2)).abs() < 0.015, "{p2}");
    }
}
