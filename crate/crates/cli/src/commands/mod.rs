use anyhow::Result;

use crate::args::{Cli, Command, GenerateKind};

mod build_graph;
mod eval;
mod generate;
mod sample;
mod train;

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(GenerateKind::Bmf(a)) => generate::bmf(cli, a),
        Command::Generate(GenerateKind::Bd(a)) => generate::bd(cli, a),
        Command::Generate(GenerateKind::Ovpm(a)) => generate::ovpm(cli, a),
        Command::BuildGraph(a) => build_graph::run(a),
        Command::Train(m) => train::run(cli, m),
        Command::Eval(a) => eval::run(a),
        Command::Sample(a) => sample::run(cli, a),
    }
}
