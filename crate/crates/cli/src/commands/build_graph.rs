use anyhow::Result;
use norbn_core::problems::{build_layered_graph, LayeredGraphSpec};

use crate::args::BuildGraphArgs;
use crate::io::{read_matrix, write_atomic};
use crate::usage;

pub fn run(a: &BuildGraphArgs) -> Result<()> {
    let spec = LayeredGraphSpec {
        n_layers: a.layers,
        r_children_to_parents: a.ratio,
        n_parents_by_node: a.parents,
    };
    if let Err(e) = spec.validate() {
        return usage(e.to_string());
    }
    let x = read_matrix(&a.data)?;
    let topo = build_layered_graph(&x, &spec)?;
    write_atomic(&a.out, |w| Ok(topo.write(w)?))
}
