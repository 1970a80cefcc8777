//! Binary 2D blind deconvolution as a convolutional noisy-OR network.
//!
//! Images are the Boolean convolution of sparse activation maps `S` with a
//! small bank of binary features `W`: pixel `(n, p)` is on iff some feature
//! `f` is active at `(i, j)` with `W[f, n - i, p - j] = 1`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::math::{theta_from_activation, theta_from_failure};
use crate::noisy_or::{NetworkBuilder, NodeId, NoisyOrNetwork};

use super::bmf::{FROZEN_NOISE_PROB, WEIGHT_THRESHOLD};
use super::hungarian::min_cost_matching;
use super::{posterior_modes, BinaryMatrix};

/// Stack of `n` binary `h x w` features, feature-major then row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryFeatures {
    pub n: usize,
    pub h: usize,
    pub w: usize,
    pub data: Vec<bool>,
}

impl BinaryFeatures {
    pub fn zeros(n: usize, h: usize, w: usize) -> Self {
        BinaryFeatures {
            n,
            h,
            w,
            data: vec![false; n * h * w],
        }
    }

    /// Builds features from `'#'`/`'.'` art, one string per feature row.
    pub fn from_art(features: &[&[&str]]) -> Result<Self> {
        let h = features.first().map_or(0, |f| f.len());
        let w = features.first().and_then(|f| f.first()).map_or(0, |r| r.len());
        let mut data = Vec::new();
        for f in features {
            if f.len() != h {
                return Err(Error::invalid("features must share their height"));
            }
            for row in *f {
                if row.len() != w {
                    return Err(Error::invalid("features must share their width"));
                }
                data.extend(row.chars().map(|c| c == '#'));
            }
        }
        Ok(BinaryFeatures {
            n: features.len(),
            h,
            w,
            data,
        })
    }

    /// The four default ground-truth features: plus, cross, square outline
    /// and diamond.
    pub fn default_ground_truth() -> Self {
        Self::from_art(&[
            &["..#..", "..#..", "#####", "..#..", "..#.."],
            &["#...#", ".#.#.", "..#..", ".#.#.", "#...#"],
            &["#####", "#...#", "#...#", "#...#", "#####"],
            &["..#..", ".#.#.", "#...#", ".#.#.", "..#.."],
        ])
        .expect("static art")
    }

    #[inline]
    pub fn get(&self, f: usize, k: usize, l: usize) -> bool {
        self.data[(f * self.h + k) * self.w + l]
    }

    pub fn set(&mut self, f: usize, k: usize, l: usize, v: bool) {
        self.data[(f * self.h + k) * self.w + l] = v;
    }

    pub fn count_ones(&self, f: usize) -> usize {
        let size = self.h * self.w;
        self.data[f * size..(f + 1) * size].iter().filter(|&&b| b).count()
    }
}

/// Geometry of a deconvolution problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BdLayout {
    pub n_feat: usize,
    pub feat_h: usize,
    pub feat_w: usize,
    pub image_h: usize,
    pub image_w: usize,
}

impl BdLayout {
    pub fn new(n_feat: usize, feat_h: usize, feat_w: usize, image_h: usize, image_w: usize) -> Result<Self> {
        if n_feat == 0 || feat_h == 0 || feat_w == 0 {
            return Err(Error::invalid("feature dimensions must be positive"));
        }
        if feat_h > image_h || feat_w > image_w {
            return Err(Error::invalid(format!(
                "feature {feat_h}x{feat_w} is larger than image {image_h}x{image_w}"
            )));
        }
        Ok(BdLayout {
            n_feat,
            feat_h,
            feat_w,
            image_h,
            image_w,
        })
    }

    pub fn act_h(&self) -> usize {
        self.image_h - self.feat_h + 1
    }

    pub fn act_w(&self) -> usize {
        self.image_w - self.feat_w + 1
    }

    pub fn n_hidden(&self) -> usize {
        self.n_feat * self.act_h() * self.act_w()
    }

    pub fn n_pixels(&self) -> usize {
        self.image_h * self.image_w
    }

    /// Position of activation `(f, i, j)` in a hidden assignment.
    pub fn act_index(&self, f: usize, i: usize, j: usize) -> usize {
        (f * self.act_h() + i) * self.act_w() + j
    }

    pub fn weight_slot(&self, f: usize, k: usize, l: usize) -> usize {
        (f * self.feat_h + k) * self.feat_w + l
    }

    pub fn prior_slot(&self, f: usize) -> usize {
        self.n_feat * self.feat_h * self.feat_w + f
    }

    pub fn noise_slot(&self) -> usize {
        self.n_feat * (self.feat_h * self.feat_w + 1)
    }

    pub fn n_slots(&self) -> usize {
        self.noise_slot() + 1
    }

    /// Network whose hidden nodes are the activations of one image and
    /// whose visible nodes are its pixels. Weights are shared across
    /// placements, priors across the positions of a feature, and the frozen
    /// noise across pixels.
    pub fn network(&self) -> Result<NoisyOrNetwork> {
        let mut b = NetworkBuilder::new(self.n_hidden(), self.n_pixels());
        for _ in 0..self.n_feat * self.feat_h * self.feat_w {
            b.new_slot(theta_from_failure(0.5));
        }
        for _ in 0..self.n_feat {
            b.new_slot(theta_from_activation(0.5));
        }
        let noise = b.new_slot(theta_from_activation(FROZEN_NOISE_PROB));
        b.freeze(noise);
        for f in 0..self.n_feat {
            for i in 0..self.act_h() {
                for j in 0..self.act_w() {
                    b.set_leak(NodeId(1 + self.act_index(f, i, j) as u32), self.prior_slot(f));
                }
            }
        }
        let m = self.n_hidden();
        for n in 0..self.image_h {
            for p in 0..self.image_w {
                let pixel = NodeId((1 + m + n * self.image_w + p) as u32);
                b.set_leak(pixel, noise);
                for f in 0..self.n_feat {
                    for (i, k) in self.placements(n, self.act_h(), self.feat_h) {
                        for (j, l) in self.placements(p, self.act_w(), self.feat_w) {
                            let parent = NodeId(1 + self.act_index(f, i, j) as u32);
                            b.add_edge(parent, pixel, self.weight_slot(f, k, l));
                        }
                    }
                }
            }
        }
        b.build()
    }

    /// `(activation, feature offset)` pairs with `act + offset = pos`.
    fn placements(&self, pos: usize, n_act: usize, n_feat: usize) -> impl Iterator<Item = (usize, usize)> {
        (0..n_feat).filter_map(move |k| pos.checked_sub(k).filter(|&i| i < n_act).map(|i| (i, k)))
    }

    pub fn check(&self, net: &NoisyOrNetwork) -> Result<()> {
        if net.n_hidden() != self.n_hidden()
            || net.n_visible() != self.n_pixels()
            || net.params().len() != self.n_slots()
        {
            return Err(Error::InvalidNetwork(format!(
                "expected a deconvolution network with {} activations and {} pixels",
                self.n_hidden(),
                self.n_pixels()
            )));
        }
        Ok(())
    }

    pub fn weights(&self, net: &NoisyOrNetwork) -> Result<Vec<f64>> {
        self.check(net)?;
        Ok(net.params().values()[..self.n_feat * self.feat_h * self.feat_w].to_vec())
    }

    pub fn thresholded(&self, net: &NoisyOrNetwork) -> Result<BinaryFeatures> {
        Ok(BinaryFeatures {
            n: self.n_feat,
            h: self.feat_h,
            w: self.feat_w,
            data: self.weights(net)?.iter().map(|&v| v > WEIGHT_THRESHOLD).collect(),
        })
    }

    /// Boolean convolution of one activation map with `features`.
    pub fn convolve(&self, s: &[bool], features: &BinaryFeatures) -> Result<Vec<bool>> {
        if s.len() != self.n_hidden() {
            return Err(Error::DimensionMismatch {
                expected: self.n_hidden(),
                got: s.len(),
            });
        }
        if (features.n, features.h, features.w) != (self.n_feat, self.feat_h, self.feat_w) {
            return Err(Error::invalid("feature bank does not match the layout"));
        }
        let mut x = vec![false; self.n_pixels()];
        for f in 0..self.n_feat {
            for i in 0..self.act_h() {
                for j in 0..self.act_w() {
                    if !s[self.act_index(f, i, j)] {
                        continue;
                    }
                    for k in 0..self.feat_h {
                        for l in 0..self.feat_w {
                            if features.get(f, k, l) {
                                x[(i + k) * self.image_w + j + l] = true;
                            }
                        }
                    }
                }
            }
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BdSpec {
    pub act_h: usize,
    pub act_w: usize,
    pub n_images: usize,
    pub activation_prob: f64,
    pub train_fraction: f64,
}

impl Default for BdSpec {
    fn default() -> Self {
        BdSpec {
            act_h: 10,
            act_w: 10,
            n_images: 100,
            activation_prob: 0.01,
            train_fraction: 0.8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BdInstance {
    pub w_gt: BinaryFeatures,
    pub layout: BdLayout,
    /// One activation map per image, in [`BdLayout::act_index`] order.
    pub s: BinaryMatrix,
    pub x: BinaryMatrix,
    pub n_train: usize,
}

impl BdInstance {
    pub fn x_train(&self) -> BinaryMatrix {
        self.x.slice_rows(0..self.n_train)
    }

    pub fn x_test(&self) -> BinaryMatrix {
        self.x.slice_rows(self.n_train..self.x.rows())
    }
}

/// Images from Bernoulli activations convolved with `w_gt`. The first
/// `train_fraction` of the images form the training split.
pub fn gen_bd<R: Rng + ?Sized>(w_gt: &BinaryFeatures, spec: &BdSpec, rng: &mut R) -> Result<BdInstance> {
    if !(spec.activation_prob > 0.0 && spec.activation_prob < 1.0) {
        return Err(Error::invalid("activation probability must lie in (0, 1)"));
    }
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) || spec.act_h == 0 || spec.act_w == 0 {
        return Err(Error::invalid("invalid deconvolution dimensions or split"));
    }
    let layout = BdLayout::new(w_gt.n, w_gt.h, w_gt.w, spec.act_h + w_gt.h - 1, spec.act_w + w_gt.w - 1)?;
    let s = BinaryMatrix::bernoulli(spec.n_images, layout.n_hidden(), spec.activation_prob, rng);
    let mut x = BinaryMatrix::zeros(spec.n_images, layout.n_pixels());
    for img in 0..spec.n_images {
        for (j, v) in layout.convolve(s.row(img), w_gt)?.into_iter().enumerate() {
            x.set(img, j, v);
        }
    }
    let n_train = (spec.n_images as f64 * spec.train_fraction).round() as usize;
    Ok(BdInstance {
        w_gt: w_gt.clone(),
        layout,
        s,
        x,
        n_train,
    })
}

/// Network for learning `n_feat` features of size `feat_h x feat_w` on
/// `image_h x image_w` images.
pub fn bd_network(
    image_h: usize,
    image_w: usize,
    n_feat: usize,
    feat_h: usize,
    feat_w: usize,
) -> Result<NoisyOrNetwork> {
    BdLayout::new(n_feat, feat_h, feat_w, image_h, image_w)?.network()
}

/// Fraction of test pixels that differ from the reconvolution of the
/// posterior-mode activations with the thresholded features.
pub fn bd_test_re(
    net: &NoisyOrNetwork,
    layout: &BdLayout,
    x_test: &BinaryMatrix,
    n_iters: usize,
    damping: f64,
) -> Result<f64> {
    let w = layout.thresholded(net)?;
    let modes = posterior_modes(net, &x_test.row_slices(), n_iters, damping)?;
    let mut diff = 0;
    for (img, s) in modes.iter().enumerate() {
        let rec = layout.convolve(s, &w)?;
        diff += rec.iter().zip(x_test.row(img)).filter(|(a, b)| a != b).count();
    }
    let total = x_test.rows() * x_test.cols();
    Ok(if total == 0 { 0.0 } else { diff as f64 / total as f64 })
}

/// Best intersection-over-union of ground-truth feature `g` with any crop of
/// learned feature `j`; `0/0` counts as 0.
pub fn pair_iou(learned: &BinaryFeatures, j: usize, gt: &BinaryFeatures, g: usize) -> f64 {
    let mut best: f64 = 0.0;
    for di in 0..=learned.h - gt.h {
        for dj in 0..=learned.w - gt.w {
            let (mut inter, mut union) = (0usize, 0usize);
            for k in 0..gt.h {
                for l in 0..gt.w {
                    let a = learned.get(j, k + di, l + dj);
                    let b = gt.get(g, k, l);
                    inter += (a && b) as usize;
                    union += (a || b) as usize;
                }
            }
            if union > 0 {
                best = best.max(inter as f64 / union as f64);
            }
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct IouReport {
    /// Mean matched IOU over ground-truth features.
    pub mean: f64,
    /// Matched IOU of each ground-truth feature (0 when unmatched).
    pub per_feature: Vec<f64>,
    /// Learned feature matched to each ground-truth feature.
    pub matched: Vec<Option<usize>>,
}

/// Matches learned features to ground-truth ones maximizing the total IOU.
pub fn features_iou(learned: &BinaryFeatures, gt: &BinaryFeatures) -> Result<IouReport> {
    if learned.h < gt.h || learned.w < gt.w {
        return Err(Error::invalid(
            "learned features must be at least as large as the ground truth",
        ));
    }
    let iou: Vec<f64> = (0..gt.n)
        .flat_map(|g| (0..learned.n).map(move |j| (g, j)))
        .map(|(g, j)| pair_iou(learned, j, gt, g))
        .collect();
    let cost: Vec<f64> = iou.iter().map(|v| -v).collect();
    let matched = min_cost_matching(&cost, gt.n, learned.n)?;
    let per_feature: Vec<f64> = matched
        .iter()
        .enumerate()
        .map(|(g, j)| j.map_or(0.0, |j| iou[g * learned.n + j]))
        .collect();
    let mean = if gt.n == 0 {
        0.0
    } else {
        per_feature.iter().sum::<f64>() / gt.n as f64
    };
    Ok(IouReport {
        mean,
        per_feature,
        matched,
    })
}
