use anyhow::Result;
use norbn_core::noisy_or::LoweredNetwork;
use norbn_core::pmp::pmp_batch;
use norbn_core::{BinaryMatrix, Error, PmpQueryConfig};

use crate::args::{Cli, SampleArgs};
use crate::io::{read_matrix, read_model, write_matrix};
use crate::usage;

const SAMPLE_STREAM: u64 = 0x5341_4d50;

pub fn run(cli: &Cli, a: &SampleArgs) -> Result<()> {
    let query = PmpQueryConfig {
        temperature: a.temperature,
        n_iters: a.n_iters,
        damping: a.damping,
        seed: cli.seed,
    };
    if let Err(e) = query.validate() {
        return usage(e.to_string());
    }
    if a.count == 0 {
        return usage("--count must be at least 1");
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
    let repeated: Vec<&[bool]> = (0..x.rows())
        .flat_map(|i| std::iter::repeat_n(x.row(i), a.count))
        .collect();
    let lowered = LoweredNetwork::new(&net);
    let samples = pmp_batch(&lowered, &repeated, &query, &[SAMPLE_STREAM])?;
    let hidden: Vec<Vec<bool>> = samples.into_iter().map(|s| s.hidden).collect();
    let out = if hidden.is_empty() {
        BinaryMatrix::zeros(0, net.n_hidden())
    } else {
        BinaryMatrix::from_rows(&hidden)?
    };
    write_matrix(&a.out, &out)
}
