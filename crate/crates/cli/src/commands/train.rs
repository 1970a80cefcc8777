use anyhow::Result;
use norbn_core::mf_vi::hybrid_train;
use norbn_core::problems::{BdLayout, BinaryMatrix, BipartiteLayout};
use norbn_core::rng::rng_from;
use norbn_core::training::{init_params, train_with, Objective, TrainOutput};
use norbn_core::{AdamConfig, Error, InitScheme, NoisyOrNetwork, TrainConfig, ViConfig};

use crate::args::{Cli, ModelArgs, Problem, TrainArgs, TrainMethod};
use crate::io::{create_dir, read_matrix, read_model, read_topology, write_atomic, write_manifest, write_model};
use crate::usage;

const INIT_STREAM: u64 = 0x494e_4954;

/// Network with its initial parameters, as `train` would start from it.
pub fn initial_model(
    seed: u64,
    model: &ModelArgs,
    init_model: Option<&std::path::Path>,
    init: u8,
    n_visible: usize,
) -> Result<NoisyOrNetwork> {
    if let Some(path) = init_model {
        return read_model(path);
    }
    let (skeleton, scheme) = if let Some(graph) = &model.graph {
        let topo = read_topology(graph)?;
        (topo.to_network(1.0, 1.0, 1.0)?, InitScheme::general(init))
    } else {
        let Some(problem) = model.problem else {
            return usage("one of --graph, --problem or --init-model is required");
        };
        let net = match problem {
            Problem::Bmf => BipartiteLayout::bmf(model.hidden, n_visible).network()?,
            Problem::Ovpm => BipartiteLayout::per_unit_prior(model.hidden, n_visible).network()?,
            Problem::Bd => {
                let layout = match BdLayout::new(model.n_feat, model.feat_h, model.feat_w, model.image_h, model.image_w)
                {
                    Ok(l) => l,
                    Err(e) => return usage(e.to_string()),
                };
                layout.network()?
            }
        };
        (net, InitScheme::factorization(init))
    };
    let scheme = match scheme {
        Ok(s) => s,
        Err(e) => return usage(e.to_string()),
    };
    let mut rng = rng_from(seed, &[INIT_STREAM]);
    Ok(init_params(&skeleton, &scheme, &mut rng)?)
}

fn method_name(m: &TrainMethod) -> (&'static str, &TrainArgs) {
    match m {
        TrainMethod::Mp(a) => ("mp", a),
        TrainMethod::Vi(a) => ("vi", a),
        TrainMethod::Hybrid(a) => ("hybrid", a),
    }
}

pub fn run(cli: &Cli, method: &TrainMethod) -> Result<()> {
    let (name, a) = method_name(method);
    let data = read_matrix(&a.data)?;
    if data.rows() == 0 {
        return usage("training data has no rows");
    }
    let config = TrainConfig {
        adam: AdamConfig::with_lr(a.lr),
        batch_size: if a.full_batch { data.rows() } else { a.batch_size },
        n_steps: a.steps,
        temperature: a.temperature,
        clip_eps: a.clip_eps,
        n_iters: a.n_iters,
        damping: a.damping,
        seed: cli.seed,
        eval_every: 0,
        record_timing: cli.timing,
    };
    let vi = ViConfig {
        inner_steps: a.vi_inner_steps,
        lr: a.vi_lr,
    };
    if let Err(e) = config.validate().and_then(|_| vi.validate()) {
        return usage(e.to_string());
    }
    let net = initial_model(cli.seed, &a.model, a.init_model.as_deref(), a.init, data.cols())?;
    if net.n_visible() != data.cols() {
        return Err(Error::DimensionMismatch {
            expected: net.n_visible(),
            got: data.cols(),
        }
        .into());
    }
    let out = fit(name, net, &data, &config, &vi, a)?;

    create_dir(&a.out)?;
    write_model(&a.out.join("model.norbn"), &out.net)?;
    write_atomic(&a.out.join("adam.txt"), |w| Ok(out.adam.write(w)?))?;
    write_atomic(&a.out.join("history.csv"), |w| Ok(out.history.write_csv(w)?))?;
    let steps = if name == "hybrid" {
        format!("{}+{}", a.mp_steps, a.vi_steps)
    } else {
        a.steps.to_string()
    };
    write_manifest(
        &a.out.join("manifest.txt"),
        &[
            ("command", format!("train {name}")),
            ("seed", cli.seed.to_string()),
            ("data", a.data.display().to_string()),
            ("rows", data.rows().to_string()),
            ("cols", data.cols().to_string()),
            ("hidden", out.net.n_hidden().to_string()),
            ("edges", out.net.n_edges().to_string()),
            ("init", a.init.to_string()),
            ("steps", steps),
            ("batch_size", config.batch_size.to_string()),
            ("lr", a.lr.to_string()),
            ("temperature", a.temperature.to_string()),
            ("n_iters", a.n_iters.to_string()),
            ("damping", a.damping.to_string()),
        ],
    )
}

fn fit(
    name: &str,
    net: NoisyOrNetwork,
    data: &BinaryMatrix,
    config: &TrainConfig,
    vi: &ViConfig,
    a: &TrainArgs,
) -> Result<TrainOutput> {
    let rows = data.row_slices();
    let out = match name {
        "mp" => train_with(net, &rows, config, Objective::MaxProduct, None, |_, _| Ok(()))?,
        "vi" => train_with(net, &rows, config, Objective::MeanField(*vi), None, |_, _| Ok(()))?,
        _ => hybrid_train(net, &rows, a.mp_steps, a.vi_steps, config, vi)?,
    };
    Ok(out)
}
