use anyhow::{bail, Result};
use norbn_core::mf_vi::{best_elbo, BestElbo};
use norbn_core::problems::{
    bd_test_re, bmf_test_re, features_iou, ovpm_recovery_net, BdLayout, BipartiteLayout, GroundTruth,
};
use norbn_core::{Error, ViConfig};
use rayon::prelude::*;

use crate::args::{EvalArgs, Metric};
use crate::io::{read_gt, read_matrix, read_model, write_atomic};
use crate::usage;

fn default_metrics(gt: &GroundTruth) -> Vec<Metric> {
    match gt {
        GroundTruth::Bmf { .. } => vec![Metric::TestRe],
        GroundTruth::Bd { .. } => vec![Metric::TestRe, Metric::FeaturesIou],
        GroundTruth::Ovpm(_) => vec![Metric::Recovery],
    }
}

pub fn run(a: &EvalArgs) -> Result<()> {
    let vi = ViConfig {
        inner_steps: a.vi_inner_steps,
        lr: a.vi_lr,
    };
    if let Err(e) = vi.validate() {
        return usage(e.to_string());
    }
    if !(a.damping > 0.0 && a.damping <= 1.0) {
        return usage("--damping must lie in (0, 1]");
    }
    let net = read_model(&a.model)?;
    let x = read_matrix(&a.data)?;
    if x.cols() != net.n_visible() {
        return Err(Error::DimensionMismatch {
            expected: net.n_visible(),
            got: x.cols(),
        }
        .into());
    }

    let rows = x.row_slices();
    let per_row: Vec<BestElbo> = rows
        .par_iter()
        .map(|r| best_elbo(&net, r, a.n_iters, a.damping, &vi))
        .collect::<norbn_core::Result<_>>()?;
    let n = per_row.len().max(1) as f64;
    let mean = |f: fn(&BestElbo) -> f64| per_row.iter().map(f).sum::<f64>() / n;
    let mut metrics: Vec<(String, f64)> = vec![
        ("elbo_mp".into(), mean(|b| b.mp)),
        ("elbo_vi".into(), mean(|b| b.vi)),
        ("elbo_best".into(), mean(|b| b.best)),
    ];

    let gt = a.gt.as_deref().map(read_gt).transpose()?;
    let wanted = match (&gt, a.metrics.is_empty()) {
        (Some(g), true) => default_metrics(g),
        (None, true) => Vec::new(),
        (None, false) => bail!("metrics {:?} need a ground-truth sidecar (--gt)", a.metrics),
        (Some(_), false) => a.metrics.clone(),
    };
    if let Some(gt) = &gt {
        for m in wanted {
            problem_metric(a, &net, &x, gt, m, &mut metrics)?;
        }
    }

    write_atomic(&a.out, |w| {
        writeln!(w, "metric,value")?;
        for (k, v) in &metrics {
            writeln!(w, "{k},{v}")?;
        }
        Ok(())
    })?;
    if let Some(path) = &a.per_sample {
        write_atomic(path, |w| {
            writeln!(w, "sample,elbo_mp,elbo_vi,elbo_best")?;
            for (i, b) in per_row.iter().enumerate() {
                writeln!(w, "{i},{},{},{}", b.mp, b.vi, b.best)?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn problem_metric(
    a: &EvalArgs,
    net: &norbn_core::NoisyOrNetwork,
    x: &norbn_core::BinaryMatrix,
    gt: &GroundTruth,
    metric: Metric,
    out: &mut Vec<(String, f64)>,
) -> Result<()> {
    match (metric, gt) {
        (Metric::TestRe, GroundTruth::Bmf { .. }) => {
            let layout = BipartiteLayout::bmf(net.n_hidden(), net.n_visible());
            layout.check(net)?;
            out.push(("test_re".into(), bmf_test_re(net, &layout, x, a.n_iters, a.damping)?));
        }
        (
            Metric::TestRe | Metric::FeaturesIou,
            GroundTruth::Bd {
                features,
                image_h,
                image_w,
            },
        ) => {
            let layout = BdLayout::new(a.n_feat, a.feat_h, a.feat_w, *image_h, *image_w)?;
            layout.check(net)?;
            if metric == Metric::TestRe {
                out.push(("test_re".into(), bd_test_re(net, &layout, x, a.n_iters, a.damping)?));
            } else {
                let report = features_iou(&layout.thresholded(net)?, features)?;
                out.push(("features_iou".into(), report.mean));
                for (f, v) in report.per_feature.iter().enumerate() {
                    out.push((format!("features_iou_{f}"), *v));
                }
            }
        }
        (Metric::Recovery, GroundTruth::Ovpm(g)) => {
            let report = ovpm_recovery_net(net, g)?;
            out.push(("recovered".into(), report.recovered as f64));
            out.push(("full_recovery".into(), if report.full_recovery { 1.0 } else { 0.0 }));
        }
        (m, g) => bail!("metric {m:?} does not apply to a {} ground truth", g.kind()),
    }
    Ok(())
}
