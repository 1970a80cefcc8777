//! Lowering of a noisy-OR network to pairwise and logical-OR factors.
//!
//! Every edge `k -> i` (including the leak edge) gets an auxiliary variable
//! `a` and a pairwise factor `p(a = 0 | z_k) = exp(-theta z_k)`; the child is
//! then the logical OR of its auxiliaries. Marginalizing the auxiliaries gives
//! back the noisy-OR conditional, and every message update is linear in the
//! number of parents.

use super::network::{NodeId, NoisyOrNetwork};
use crate::error::{Error, Result};
use crate::factor_graph::{Factor, FactorGraph, FactorId, LogPair, LogUnary, VarId};
use crate::math::log1mexp;

/// Log table `[parent state][auxiliary state]` of the edge factor.
#[inline]
pub fn pairwise_table(theta: f64) -> [LogPair; 2] {
    [[0.0, f64::NEG_INFINITY], [-theta, log1mexp(theta)]]
}

/// Variable layout of a lowered network: node `i` is variable `i`; the
/// auxiliary of global edge `e` is variable `n_nodes + e`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarMap {
    pub n_nodes: usize,
    pub n_aux: usize,
}

impl VarMap {
    #[inline]
    pub fn node(&self, i: NodeId) -> VarId {
        VarId(i.0)
    }

    #[inline]
    pub fn aux(&self, edge: usize) -> VarId {
        VarId((self.n_nodes + edge) as u32)
    }
}

/// A lowered network whose pairwise tables can be refreshed in place when the
/// parameters change.
#[derive(Clone, Debug)]
pub struct LoweredNetwork {
    graph: FactorGraph,
    pairwise: Vec<FactorId>,
    map: VarMap,
    n_hidden: usize,
    n_visible: usize,
}

impl LoweredNetwork {
    pub fn new(net: &NoisyOrNetwork) -> Self {
        let n_nodes = net.n_nodes();
        let map = VarMap {
            n_nodes,
            n_aux: net.n_edges(),
        };
        let mut b = FactorGraph::builder(n_nodes + net.n_edges());
        b.set_unary(map.node(NodeId::LEAK), LogUnary::clamp(true));
        let mut pairwise = Vec::with_capacity(net.n_edges());
        for i in 1..n_nodes {
            let node = NodeId(i as u32);
            let range = net.edge_range(node);
            for (e, edge) in range.clone().zip(net.edges(node)) {
                let f = b
                    .add_factor(Factor::Pairwise {
                        input: map.node(NodeId(edge.parent)),
                        output: map.aux(e),
                        table: pairwise_table(net.theta(edge)),
                    })
                    .expect("valid pairwise factor");
                pairwise.push(f);
            }
            b.add_factor(Factor::LogicalOr {
                parents: range.map(|e| map.aux(e)).collect(),
                child: map.node(node),
            })
            .expect("valid OR factor");
        }
        LoweredNetwork {
            graph: b.build(),
            pairwise,
            map,
            n_hidden: net.n_hidden(),
            n_visible: net.n_visible(),
        }
    }

    /// Rewrites every pairwise table from the network's current parameters.
    pub fn refresh(&mut self, net: &NoisyOrNetwork) {
        debug_assert_eq!(net.n_edges(), self.pairwise.len());
        for (edge, &f) in net.all_edges().iter().zip(&self.pairwise) {
            self.graph.set_pairwise_table(f, pairwise_table(net.theta(edge)));
        }
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    pub fn var_map(&self) -> VarMap {
        self.map
    }

    pub fn pairwise_factor(&self, edge: usize) -> FactorId {
        self.pairwise[edge]
    }

    /// Unaries with the leak clamped on and, if given, the visible nodes
    /// clamped to the observation.
    pub fn unaries(&self, observation: Option<&[bool]>) -> Result<Vec<LogUnary>> {
        let mut u = self.graph.unaries().to_vec();
        if let Some(x) = observation {
            if x.len() != self.n_visible {
                return Err(Error::DimensionMismatch {
                    expected: self.n_visible,
                    got: x.len(),
                });
            }
            for (j, &xj) in x.iter().enumerate() {
                u[1 + self.n_hidden + j] = LogUnary::clamp(xj);
            }
        }
        Ok(u)
    }

    /// Extracts `(hidden, visible)` node states from a decoded assignment.
    pub fn split_assignment(&self, assignment: &[bool]) -> (Vec<bool>, Vec<bool>) {
        let h = assignment[1..=self.n_hidden].to_vec();
        let v = assignment[1 + self.n_hidden..1 + self.n_hidden + self.n_visible].to_vec();
        (h, v)
    }
}

/// Lowers a network to a factor graph, clamping visible nodes when an
/// observation is given.
pub fn lower_to_factor_graph(net: &NoisyOrNetwork, observation: Option<&[bool]>) -> Result<(FactorGraph, VarMap)> {
    let lowered = LoweredNetwork::new(net);
    let unaries = lowered.unaries(observation)?;
    let map = lowered.var_map();
    let mut graph = lowered.graph;
    for (v, u) in unaries.into_iter().enumerate() {
        graph.set_unary(VarId(v as u32), u);
    }
    Ok((graph, map))
}
