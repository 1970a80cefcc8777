//! Multi-layer network topology built top-down from data co-occurrences.
//!
//! Starting from the visible layer, each step clusters the current layer,
//! creates one parent per cluster and connects every child to the
//! `n_parents_by_node` clusters closest to it on average. The next layer's
//! distance averages the child distances of the connected sets.
//!
//! Topology text format:
//!
//! ```text
//! LAYERS <k>
//! <size of layer 1> ... <size of layer k>    (top hidden layer first, visible last)
//! EDGES <E>
//! <child> <parent>                           (E lines, network node indices)
//! ```

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::noisy_or::{NetworkBuilder, NodeId, NoisyOrNetwork};

use super::cluster::{agglomerative_average_linkage, cooccurrence_distance, DistanceMatrix};
use super::BinaryMatrix;

pub const TOPOLOGY_MAGIC: &str = "LAYERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayeredGraphSpec {
    /// Number of layers below the leak, the visible layer included.
    pub n_layers: usize,
    pub r_children_to_parents: usize,
    pub n_parents_by_node: usize,
}

impl Default for LayeredGraphSpec {
    fn default() -> Self {
        LayeredGraphSpec {
            n_layers: 3,
            r_children_to_parents: 3,
            n_parents_by_node: 5,
        }
    }
}

impl LayeredGraphSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.r_children_to_parents == 0 || self.n_parents_by_node == 0 {
            return Err(Error::invalid("layer count and ratios must be at least 1"));
        }
        Ok(())
    }
}

/// Layer sizes and non-leak edges of a layered network. Nodes use network
/// numbering: hidden layers top first from 1, then the visible layer. Every
/// node also has a leak edge, which is implicit here.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayeredTopology {
    pub layer_sizes: Vec<usize>,
    /// `(child, parent)` pairs in increasing child order.
    pub edges: Vec<(usize, usize)>,
}

impl LayeredTopology {
    pub fn n_hidden(&self) -> usize {
        self.layer_sizes[..self.layer_sizes.len() - 1].iter().sum()
    }

    pub fn n_visible(&self) -> usize {
        *self.layer_sizes.last().expect("at least one layer")
    }

    /// First node index of each layer.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.layer_sizes.len());
        let mut next = 1;
        for &s in &self.layer_sizes {
            off.push(next);
            next += s;
        }
        off
    }

    /// A network with one slot per edge; leak slots of hidden nodes take
    /// `prior_theta`, visible leaks `noise_theta` and other edges
    /// `failure_theta`.
    pub fn to_network(&self, failure_theta: f64, prior_theta: f64, noise_theta: f64) -> Result<NoisyOrNetwork> {
        let m = self.n_hidden();
        let mut b = NetworkBuilder::new(m, self.n_visible());
        for i in 1..b.n_nodes() {
            let s = b.new_slot(if i <= m { prior_theta } else { noise_theta });
            b.set_leak(NodeId(i as u32), s);
        }
        for &(child, parent) in &self.edges {
            let s = b.new_slot(failure_theta);
            b.add_edge(NodeId(parent as u32), NodeId(child as u32), s);
        }
        b.build()
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{TOPOLOGY_MAGIC} {}", self.layer_sizes.len())?;
        let sizes: Vec<String> = self.layer_sizes.iter().map(|s| s.to_string()).collect();
        writeln!(w, "{}", sizes.join(" "))?;
        writeln!(w, "EDGES {}", self.edges.len())?;
        for (c, p) in &self.edges {
            writeln!(w, "{c} {p}")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines().enumerate().filter_map(|(i, l)| match l {
            Ok(l) if l.trim().is_empty() => None,
            other => Some((i + 1, other)),
        });
        let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
            match lines.next() {
                None => Err(Error::parse(0, format!("missing {what}"))),
                Some((i, l)) => Ok((i, l?.split_whitespace().map(str::to_string).collect())),
            }
        };
        let num = |line: usize, t: &str| -> Result<usize> {
            t.parse().map_err(|_| Error::parse(line, format!("bad integer `{t}`")))
        };
        let (line, head) = next("header")?;
        if head.len() != 2 || head[0] != TOPOLOGY_MAGIC {
            return Err(Error::parse(line, "expected `LAYERS <k>`"));
        }
        let k = num(line, &head[1])?;
        let (line, sizes) = next("layer sizes")?;
        if sizes.len() != k || k == 0 {
            return Err(Error::parse(line, format!("expected {k} layer sizes")));
        }
        let layer_sizes = sizes.iter().map(|t| num(line, t)).collect::<Result<Vec<_>>>()?;
        let (line, eh) = next("edge header")?;
        if eh.len() != 2 || eh[0] != "EDGES" {
            return Err(Error::parse(line, "expected `EDGES <E>`"));
        }
        let n_edges = num(line, &eh[1])?;
        let n_nodes = 1 + layer_sizes.iter().sum::<usize>();
        let mut edges = Vec::with_capacity(n_edges);
        for _ in 0..n_edges {
            let (line, t) = next("edge")?;
            if t.len() != 2 {
                return Err(Error::parse(line, "edge line needs `child parent`"));
            }
            let (c, p) = (num(line, &t[0])?, num(line, &t[1])?);
            if c == 0 || p == 0 || c >= n_nodes || p >= n_nodes {
                return Err(Error::parse(line, "node index out of range"));
            }
            edges.push((c, p));
        }
        if let Some((line, _)) = lines.next() {
            return Err(Error::parse(line, "trailing content"));
        }
        Ok(LayeredTopology { layer_sizes, edges })
    }
}

/// One clustering step: parents of the current layer, the children of each
/// parent, and the distance matrix of the parent layer.
struct LayerStep {
    parents_of: Vec<Vec<usize>>,
    next: DistanceMatrix,
}

fn connect_layer(d: &DistanceMatrix, spec: &LayeredGraphSpec) -> Result<LayerStep> {
    let n = d.len();
    let k = n / spec.r_children_to_parents;
    if k == 0 {
        return Err(Error::invalid(format!(
            "layer of size {n} is too small for ratio {}",
            spec.r_children_to_parents
        )));
    }
    let labels = agglomerative_average_linkage(d, k)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let n_par = spec.n_parents_by_node.min(k);
    let mut parents_of = Vec::with_capacity(n);
    let mut connected: Vec<Vec<usize>> = vec![Vec::new(); k];
    for c in 0..n {
        let mut dist: Vec<(f64, usize)> = members
            .iter()
            .enumerate()
            .map(|(m, mem)| (mem.iter().map(|&l| d.get(c, l)).sum::<f64>() / mem.len() as f64, m))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut ps: Vec<usize> = dist[..n_par].iter().map(|&(_, m)| m).collect();
        ps.sort_unstable();
        for &m in &ps {
            connected[m].push(c);
        }
        parents_of.push(ps);
    }
    // A parent nobody picked falls back to its own cluster members.
    for (m, conn) in connected.iter_mut().enumerate() {
        if conn.is_empty() {
            *conn = members[m].clone();
        }
    }
    let next = DistanceMatrix::from_fn(k, |a, b| {
        let (ca, cb) = (&connected[a], &connected[b]);
        let mut s = 0.0;
        for &x in ca {
            for &y in cb {
                s += d.get(x, y);
            }
        }
        s / (ca.len() * cb.len()) as f64
    })?;
    Ok(LayerStep { parents_of, next })
}

pub fn build_layered_graph(x: &BinaryMatrix, spec: &LayeredGraphSpec) -> Result<LayeredTopology> {
    spec.validate()?;
    let mut d = cooccurrence_distance(x)?;
    // steps[0] connects the visible layer to the layer above, and so on.
    let mut steps = Vec::with_capacity(spec.n_layers - 1);
    let mut sizes_bottom_up = vec![x.cols()];
    for _ in 1..spec.n_layers {
        let step = connect_layer(&d, spec)?;
        d = step.next.clone();
        sizes_bottom_up.push(d.len());
        steps.push(step);
    }
    let layer_sizes: Vec<usize> = sizes_bottom_up.iter().rev().copied().collect();
    let topo = LayeredTopology {
        layer_sizes: layer_sizes.clone(),
        edges: Vec::new(),
    };
    let offsets = topo.layer_offsets();
    let n_l = layer_sizes.len();
    let mut edges = Vec::new();
    // steps[s] links layer n_l-1-s (children) to layer n_l-2-s (parents)
    for child_layer in 1..n_l {
        let step = &steps[n_l - 1 - child_layer];
        for (c, ps) in step.parents_of.iter().enumerate() {
            for &p in ps {
                edges.push((offsets[child_layer] + c, offsets[child_layer - 1] + p));
            }
        }
    }
    Ok(LayeredTopology { layer_sizes, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(rng: &mut ChaCha8Rng, n: usize, p: usize) -> BinaryMatrix {
        // correlated columns through a few latent causes, then force every
        // column active at least once
        let causes = BinaryMatrix::bernoulli(n, 6, 0.2, rng);
        let load = BinaryMatrix::bernoulli(6, p, 0.3, rng);
        let mut x = causes.boolean_product(&load).unwrap();
        for j in 0..p {
            let i = rng.random_range(0..n);
            x.set(i, j, true);
        }
        x
    }

    #[test]
    fn hundred_thirty_three_eleven() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = data(&mut rng, 400, 100);
        let topo = build_layered_graph(&x, &LayeredGraphSpec::default()).unwrap();
        assert_eq!(topo.layer_sizes, vec![11, 33, 100]);
        assert_eq!(topo.n_hidden(), 44);
        let net = topo.to_network(1.0, 1.0, 1.0).unwrap();
        assert_eq!(net.n_nodes(), 145);
        // every visible node has 5 parents plus the leak
        for v in net.visible_nodes() {
            assert_eq!(net.n_parents(v), 5);
        }
        // top hidden layer only has the leak
        for k in 1..=11 {
            assert_eq!(net.n_parents(NodeId(k)), 0);
        }
    }

    #[test]
    fn parents_are_capped_by_layer_size() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = data(&mut rng, 200, 9);
        let spec = LayeredGraphSpec {
            n_layers: 2,
            ..Default::default()
        };
        let topo = build_layered_graph(&x, &spec).unwrap();
        assert_eq!(topo.layer_sizes, vec![3, 9]);
        let net = topo.to_network(1.0, 1.0, 1.0).unwrap();
        for v in net.visible_nodes() {
            assert_eq!(net.n_parents(v), 3);
        }
    }

    #[test]
    fn layerwise_dag_with_visible_leaves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..10 {
            let p = rng.random_range(10..60);
            let x = data(&mut rng, 150, p);
            let spec = LayeredGraphSpec {
                n_layers: 1 + trial % 3,
                r_children_to_parents: 2 + trial % 2,
                n_parents_by_node: 1 + trial % 5,
            };
            let Ok(topo) = build_layered_graph(&x, &spec) else {
                continue;
            };
            for w in topo.layer_sizes.windows(2) {
                assert_eq!(w[0], w[1] / spec.r_children_to_parents);
            }
            let off = topo.layer_offsets();
            let layer_of = |i: usize| off.iter().rposition(|&o| o <= i).unwrap();
            for &(c, p) in &topo.edges {
                assert_eq!(layer_of(c), layer_of(p) + 1);
            }
            let net = topo.to_network(1.0, 1.0, 1.0).unwrap();
            let children = net.children();
            for i in 1..net.n_nodes() {
                assert_eq!(children[i].is_empty(), net.is_visible(NodeId(i as u32)), "node {i}");
            }
        }
    }

    #[test]
    fn topology_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = data(&mut rng, 100, 30);
        let topo = build_layered_graph(&x, &LayeredGraphSpec::default()).unwrap();
        let mut buf = Vec::new();
        topo.write(&mut buf).unwrap();
        assert!(buf.starts_with(b"LAYERS 3\n3 10 30\nEDGES "));
        assert_eq!(LayeredTopology::read(&buf[..]).unwrap(), topo);
        assert!(LayeredTopology::read(&b"LAYERS 1\n2\nEDGES 1\n1 9\n"[..]).is_err());
    }

    #[test]
    fn inactive_columns_propagate() {
        let x = BinaryMatrix::from_rows(&[[true, false, true], [true, false, false]]).unwrap();
        assert!(matches!(
            build_layered_graph(&x, &LayeredGraphSpec::default()),
            Err(Error::InactiveColumns(c)) if c == vec![1]
        ));
    }
}
