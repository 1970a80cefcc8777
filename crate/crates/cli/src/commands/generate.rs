use anyhow::Result;
use norbn_core::problems::{gen_bd, gen_bmf, gen_ovpm, BdSpec, BinaryFeatures, GroundTruth, OvpmGroundTruth};
use norbn_core::rng::rng_from;

use crate::args::{Cli, GenBdArgs, GenBmfArgs, GenOvpmArgs};
use crate::io::{create_dir, write_atomic, write_manifest, write_matrix};
use crate::usage;

const GENERATE_STREAM: u64 = 0x47_454e;

fn write_gt(path: &std::path::Path, gt: &GroundTruth) -> Result<()> {
    write_atomic(path, |w| Ok(gt.write(w)?))
}

pub fn bmf(cli: &Cli, a: &GenBmfArgs) -> Result<()> {
    let p = a.p.unwrap_or(a.n);
    if !(a.px > 0.0 && a.px < 1.0) {
        return usage(format!("--px must lie in (0, 1), got {}", a.px));
    }
    if a.r == 0 || a.r >= a.n.min(p) {
        return usage(format!(
            "--r must satisfy 0 < r < min(n, p), got r={} with n={}, p={p}",
            a.r, a.n
        ));
    }
    let mut rng = rng_from(cli.seed, &[GENERATE_STREAM]);
    let inst = gen_bmf(a.n, a.r, p, a.px, &mut rng)?;
    create_dir(&a.out)?;
    write_matrix(&a.out.join("x_train.nbin"), &inst.x_train)?;
    write_matrix(&a.out.join("x_test.nbin"), &inst.x_test)?;
    write_gt(&a.out.join("gt.txt"), &GroundTruth::Bmf { v: inst.v.clone() })?;
    write_manifest(
        &a.out.join("manifest.txt"),
        &[
            ("command", "generate bmf".into()),
            ("seed", cli.seed.to_string()),
            ("n", a.n.to_string()),
            ("r", a.r.to_string()),
            ("p", p.to_string()),
            ("px", a.px.to_string()),
            ("p_uv", format!("{:.16e}", inst.p_uv)),
        ],
    )
}

pub fn bd(cli: &Cli, a: &GenBdArgs) -> Result<()> {
    if a.n_images < 2 || a.act_h == 0 || a.act_w == 0 {
        return usage("need at least two images and a nonempty activation grid");
    }
    if !(a.activation_prob > 0.0 && a.activation_prob < 1.0) {
        return usage("--activation-prob must lie in (0, 1)");
    }
    if !(a.train_fraction > 0.0 && a.train_fraction < 1.0) {
        return usage("--train-fraction must lie in (0, 1)");
    }
    let spec = BdSpec {
        act_h: a.act_h,
        act_w: a.act_w,
        n_images: a.n_images,
        activation_prob: a.activation_prob,
        train_fraction: a.train_fraction,
    };
    let mut rng = rng_from(cli.seed, &[GENERATE_STREAM]);
    let inst = gen_bd(&BinaryFeatures::default_ground_truth(), &spec, &mut rng)?;
    create_dir(&a.out)?;
    write_matrix(&a.out.join("x_train.nbin"), &inst.x_train())?;
    write_matrix(&a.out.join("x_test.nbin"), &inst.x_test())?;
    write_gt(
        &a.out.join("gt.txt"),
        &GroundTruth::Bd {
            features: inst.w_gt.clone(),
            image_h: inst.layout.image_h,
            image_w: inst.layout.image_w,
        },
    )?;
    write_manifest(
        &a.out.join("manifest.txt"),
        &[
            ("command", "generate bd".into()),
            ("seed", cli.seed.to_string()),
            ("n_images", a.n_images.to_string()),
            ("act_h", a.act_h.to_string()),
            ("act_w", a.act_w.to_string()),
            ("activation_prob", a.activation_prob.to_string()),
            ("train_fraction", a.train_fraction.to_string()),
            ("image_h", inst.layout.image_h.to_string()),
            ("image_w", inst.layout.image_w.to_string()),
        ],
    )
}

pub fn ovpm(cli: &Cli, a: &GenOvpmArgs) -> Result<()> {
    if a.n_train == 0 {
        return usage("--n-train must be positive");
    }
    let gt = OvpmGroundTruth::lines();
    let mut rng = rng_from(cli.seed, &[GENERATE_STREAM]);
    let train = gen_ovpm(&gt, a.n_train, &mut rng)?;
    let test = gen_ovpm(&gt, a.n_test, &mut rng)?;
    create_dir(&a.out)?;
    write_matrix(&a.out.join("x_train.nbin"), &train)?;
    write_matrix(&a.out.join("x_test.nbin"), &test)?;
    write_gt(&a.out.join("gt.txt"), &GroundTruth::Ovpm(gt))?;
    write_manifest(
        &a.out.join("manifest.txt"),
        &[
            ("command", "generate ovpm".into()),
            ("seed", cli.seed.to_string()),
            ("n_train", a.n_train.to_string()),
            ("n_test", a.n_test.to_string()),
        ],
    )
}
