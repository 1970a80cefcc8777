use std::collections::VecDeque;
use std::fmt;

use crate::error::{Error, Result};

/// Node index: `0` is the leak, `1..=m` are hidden, `m+1..=m+p` are visible.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub const LEAK: NodeId = NodeId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Incoming edge of a node. The leak edge has `parent == 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub parent: u32,
    pub slot: u32,
}

/// Role of a parameter slot, derived from the edges that use it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotRole {
    /// Non-leak edge: `exp(-theta)` is a failure probability.
    Failure,
    /// Leak edge of a node without parents.
    Prior,
    /// Leak edge of a node with parents.
    Noise,
}

/// Flat parameter array with an optional frozen mask.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamStore {
    values: Vec<f64>,
    frozen: Vec<bool>,
}

impl ParamStore {
    pub fn new(values: Vec<f64>, frozen: Vec<bool>) -> Result<Self> {
        if values.len() != frozen.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                got: frozen.len(),
            });
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidNetwork(format!(
                "parameter {v} is not a nonnegative real"
            )));
        }
        Ok(ParamStore { values, frozen })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, slot: usize) -> f64 {
        self.values[slot]
    }

    pub fn set(&mut self, slot: usize, value: f64) {
        self.values[slot] = value;
    }

    pub fn frozen(&self) -> &[bool] {
        &self.frozen
    }

    pub fn is_frozen(&self, slot: usize) -> bool {
        self.frozen[slot]
    }

    pub fn set_frozen(&mut self, slot: usize, frozen: bool) {
        self.frozen[slot] = frozen;
    }

    /// `theta = max(theta, eps)` on trainable slots.
    pub fn clip(&mut self, eps: f64) {
        for (v, &f) in self.values.iter_mut().zip(&self.frozen) {
            if !f && *v < eps {
                *v = eps;
            }
        }
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A noisy-OR Bayesian network: DAG over leak, hidden and visible nodes with
/// edge parameters stored through a [`ParamStore`] (slots may be shared).
#[derive(Clone, Debug, PartialEq)]
pub struct NoisyOrNetwork {
    n_hidden: usize,
    n_visible: usize,
    node_start: Vec<usize>,
    edges: Vec<Edge>,
    params: ParamStore,
}

impl NoisyOrNetwork {
    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_visible(&self) -> usize {
        self.n_visible
    }

    /// Node count including the leak.
    pub fn n_nodes(&self) -> usize {
        1 + self.n_hidden + self.n_visible
    }

    pub fn hidden_nodes(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.n_hidden as u32).map(NodeId)
    }

    pub fn visible_nodes(&self) -> impl Iterator<Item = NodeId> {
        let start = 1 + self.n_hidden as u32;
        (start..start + self.n_visible as u32).map(NodeId)
    }

    pub fn visible_node(&self, j: usize) -> NodeId {
        NodeId((1 + self.n_hidden + j) as u32)
    }

    pub fn hidden_node(&self, k: usize) -> NodeId {
        NodeId((1 + k) as u32)
    }

    pub fn is_visible(&self, i: NodeId) -> bool {
        i.index() > self.n_hidden
    }

    /// All incoming edges of node `i`, leak edge first.
    #[inline]
    pub fn edges(&self, i: NodeId) -> &[Edge] {
        &self.edges[self.node_start[i.index()]..self.node_start[i.index() + 1]]
    }

    /// Global index range of node `i`'s edges.
    #[inline]
    pub fn edge_range(&self, i: NodeId) -> std::ops::Range<usize> {
        self.node_start[i.index()]..self.node_start[i.index() + 1]
    }

    pub fn all_edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn leak_slot(&self, i: NodeId) -> usize {
        self.edges(i)[0].slot as usize
    }

    /// Parents excluding the leak.
    pub fn parents(&self, i: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.edges(i)[1..].iter().map(|e| NodeId(e.parent))
    }

    pub fn n_parents(&self, i: NodeId) -> usize {
        self.edges(i).len().saturating_sub(1)
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    #[inline]
    pub fn theta(&self, e: &Edge) -> f64 {
        self.params.values[e.slot as usize]
    }

    pub fn check_node(&self, i: NodeId) -> Result<()> {
        if i.index() == 0 || i.index() >= self.n_nodes() {
            Err(Error::UnknownNode(i.index()))
        } else {
            Ok(())
        }
    }

    /// `p(z_i = 0 | parents) = exp(-theta_0i - sum_k theta_ki z_k)`, with
    /// `parent_values` in [`Self::parents`] order.
    pub fn conditional_prob_zero(&self, i: NodeId, parent_values: &[bool]) -> Result<f64> {
        self.check_node(i)?;
        let edges = self.edges(i);
        if parent_values.len() != edges.len() - 1 {
            return Err(Error::DimensionMismatch {
                expected: edges.len() - 1,
                got: parent_values.len(),
            });
        }
        let beta = self.theta(&edges[0])
            + edges[1..]
                .iter()
                .zip(parent_values)
                .filter(|(_, &z)| z)
                .map(|(e, _)| self.theta(e))
                .sum::<f64>();
        Ok((-beta).exp())
    }

    /// Linear activation `beta_i = sum over incoming edges of theta * z_parent`
    /// for a full state vector (`z[0]` is the leak).
    #[inline]
    pub fn beta(&self, i: NodeId, z: &[bool]) -> f64 {
        let mut beta = 0.0;
        for e in self.edges(i) {
            if z[e.parent as usize] {
                beta += self.params.values[e.slot as usize];
            }
        }
        beta
    }

    /// Full state `(z_0 = 1, hidden, visible)`.
    pub fn full_state(&self, hidden: &[bool], visible: &[bool]) -> Result<Vec<bool>> {
        if hidden.len() != self.n_hidden {
            return Err(Error::DimensionMismatch {
                expected: self.n_hidden,
                got: hidden.len(),
            });
        }
        if visible.len() != self.n_visible {
            return Err(Error::DimensionMismatch {
                expected: self.n_visible,
                got: visible.len(),
            });
        }
        let mut z = Vec::with_capacity(self.n_nodes());
        z.push(true);
        z.extend_from_slice(hidden);
        z.extend_from_slice(visible);
        Ok(z)
    }

    pub fn slot_roles(&self) -> Result<Vec<SlotRole>> {
        let mut roles: Vec<Option<SlotRole>> = vec![None; self.params.len()];
        for i in 1..self.n_nodes() {
            let node = NodeId(i as u32);
            let n_par = self.n_parents(node);
            for (k, e) in self.edges(node).iter().enumerate() {
                let role = match (k, n_par) {
                    (0, 0) => SlotRole::Prior,
                    (0, _) => SlotRole::Noise,
                    _ => SlotRole::Failure,
                };
                let slot = &mut roles[e.slot as usize];
                match slot {
                    None => *slot = Some(role),
                    Some(r) if *r == role => {}
                    Some(r) => {
                        return Err(Error::InvalidNetwork(format!(
                            "slot {} is used as both {r:?} and {role:?}",
                            e.slot
                        )))
                    }
                }
            }
        }
        roles
            .into_iter()
            .enumerate()
            .map(|(s, r)| r.ok_or_else(|| Error::InvalidNetwork(format!("slot {s} is unused"))))
            .collect()
    }

    /// Slots used by the leak edge of at least one visible node.
    pub fn visible_leak_slots(&self) -> Vec<usize> {
        let mut slots: Vec<usize> = self.visible_nodes().map(|v| self.leak_slot(v)).collect();
        slots.sort_unstable();
        slots.dedup();
        slots
    }

    /// Children lists (excluding the leak's).
    pub fn children(&self) -> Vec<Vec<NodeId>> {
        let mut ch = vec![Vec::new(); self.n_nodes()];
        for i in 1..self.n_nodes() {
            for p in self.parents(NodeId(i as u32)) {
                ch[p.index()].push(NodeId(i as u32));
            }
        }
        ch
    }

    /// Same topology with a replacement parameter store.
    pub fn with_params(&self, params: ParamStore) -> Result<Self> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch {
                expected: self.params.len(),
                got: params.len(),
            });
        }
        let mut net = self.clone();
        net.params = params;
        Ok(net)
    }
}

/// Incrementally assembles a [`NoisyOrNetwork`].
#[derive(Clone, Debug)]
pub struct NetworkBuilder {
    n_hidden: usize,
    n_visible: usize,
    leak: Vec<Option<u32>>,
    parents: Vec<Vec<Edge>>,
    values: Vec<f64>,
    frozen: Vec<bool>,
}

impl NetworkBuilder {
    pub fn new(n_hidden: usize, n_visible: usize) -> Self {
        let n = 1 + n_hidden + n_visible;
        NetworkBuilder {
            n_hidden,
            n_visible,
            leak: vec![None; n],
            parents: vec![Vec::new(); n],
            values: Vec::new(),
            frozen: Vec::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        1 + self.n_hidden + self.n_visible
    }

    pub fn hidden(&self, k: usize) -> NodeId {
        NodeId((1 + k) as u32)
    }

    pub fn visible(&self, j: usize) -> NodeId {
        NodeId((1 + self.n_hidden + j) as u32)
    }

    pub fn new_slot(&mut self, value: f64) -> usize {
        self.values.push(value);
        self.frozen.push(false);
        self.values.len() - 1
    }

    pub fn freeze(&mut self, slot: usize) -> &mut Self {
        self.frozen[slot] = true;
        self
    }

    pub fn n_slots(&self) -> usize {
        self.values.len()
    }

    pub fn set_leak(&mut self, child: NodeId, slot: usize) -> &mut Self {
        self.leak[child.index()] = Some(slot as u32);
        self
    }

    pub fn add_edge(&mut self, parent: NodeId, child: NodeId, slot: usize) -> &mut Self {
        self.parents[child.index()].push(Edge {
            parent: parent.0,
            slot: slot as u32,
        });
        self
    }

    pub fn build(self) -> Result<NoisyOrNetwork> {
        let n = self.n_nodes();
        let n_slots = self.values.len();
        let mut node_start = vec![0, 0];
        let mut edges = Vec::new();
        for i in 1..n {
            let leak = self.leak[i].ok_or_else(|| Error::InvalidNetwork(format!("node {i} has no leak parameter")))?;
            edges.push(Edge { parent: 0, slot: leak });
            let mut seen = Vec::with_capacity(self.parents[i].len());
            for e in &self.parents[i] {
                let p = e.parent as usize;
                if p == 0 || p >= n {
                    return Err(Error::InvalidNetwork(format!("edge {p} -> {i} has an invalid parent")));
                }
                if p == i {
                    return Err(Error::InvalidNetwork(format!("self loop on node {i}")));
                }
                if p > self.n_hidden {
                    return Err(Error::InvalidNetwork(format!("visible node {p} has a child")));
                }
                if seen.contains(&p) {
                    return Err(Error::InvalidNetwork(format!("duplicate edge {p} -> {i}")));
                }
                seen.push(p);
                edges.push(*e);
            }
            node_start.push(edges.len());
        }
        if let Some(e) = edges.iter().find(|e| e.slot as usize >= n_slots) {
            return Err(Error::InvalidNetwork(format!("edge uses unknown slot {}", e.slot)));
        }
        // Kahn's algorithm over hidden/visible nodes
        let mut indeg: Vec<usize> = (0..n)
            .map(|i| {
                if i == 0 {
                    0
                } else {
                    node_start[i + 1] - node_start[i] - 1
                }
            })
            .collect();
        let mut children = vec![Vec::new(); n];
        for i in 1..n {
            for e in &edges[node_start[i] + 1..node_start[i + 1]] {
                children[e.parent as usize].push(i);
            }
        }
        let mut queue: VecDeque<usize> = (1..n).filter(|&i| indeg[i] == 0).collect();
        let mut visited = 0;
        while let Some(i) = queue.pop_front() {
            visited += 1;
            for &c in &children[i] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        if visited != n - 1 {
            return Err(Error::InvalidNetwork("graph has a directed cycle".into()));
        }
        Ok(NoisyOrNetwork {
            n_hidden: self.n_hidden,
            n_visible: self.n_visible,
            node_start,
            edges,
            params: ParamStore::new(self.values, self.frozen)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> NoisyOrNetwork {
        // h1 -> h2 -> x
        let mut b = NetworkBuilder::new(2, 1);
        for i in 1..=3 {
            let s = b.new_slot(0.1 * i as f64);
            b.set_leak(NodeId(i), s);
        }
        let s = b.new_slot(2.0);
        b.add_edge(NodeId(1), NodeId(2), s);
        let s = b.new_slot(3.0);
        b.add_edge(NodeId(2), NodeId(3), s);
        b.build().unwrap()
    }

    #[test]
    fn conditional_probabilities() {
        let mut b = NetworkBuilder::new(0, 1);
        let s = b.new_slot(-(0.99f64.ln()));
        b.set_leak(NodeId(1), s);
        let net = b.build().unwrap();
        assert!((net.conditional_prob_zero(NodeId(1), &[]).unwrap() - 0.99).abs() < 1e-15);

        let mut b = NetworkBuilder::new(1, 1);
        let s0 = b.new_slot(1e-5);
        b.set_leak(NodeId(1), s0).set_leak(NodeId(2), s0);
        let s = b.new_slot(std::f64::consts::LN_2);
        b.add_edge(NodeId(1), NodeId(2), s);
        let net = b.build().unwrap();
        let p = net.conditional_prob_zero(NodeId(2), &[true]).unwrap();
        assert!((p - 0.5).abs() < 1e-4);
        assert!(matches!(
            net.conditional_prob_zero(NodeId(7), &[]),
            Err(Error::UnknownNode(7))
        ));
        assert!(net.conditional_prob_zero(NodeId(2), &[]).is_err());
    }

    #[test]
    fn structure_queries() {
        let net = chain();
        assert_eq!(net.n_nodes(), 4);
        assert_eq!(net.parents(NodeId(3)).collect::<Vec<_>>(), vec![NodeId(2)]);
        assert_eq!(net.children()[1], vec![NodeId(2)]);
        assert_eq!(
            net.slot_roles().unwrap(),
            vec![
                SlotRole::Prior,
                SlotRole::Noise,
                SlotRole::Noise,
                SlotRole::Failure,
                SlotRole::Failure
            ]
        );
        assert_eq!(net.visible_leak_slots(), vec![2]);
        let z = net.full_state(&[true, false], &[true]).unwrap();
        assert!((net.beta(NodeId(3), &z) - 0.3).abs() < 1e-15);
        assert!((net.beta(NodeId(2), &z) - 2.2).abs() < 1e-15);
    }

    #[test]
    fn builder_rejects_invalid_structures() {
        // missing leak
        let mut b = NetworkBuilder::new(1, 0);
        b.new_slot(1.0);
        assert!(b.build().is_err());

        // cycle between two hidden nodes
        let mut b = NetworkBuilder::new(2, 0);
        let s = b.new_slot(1.0);
        b.set_leak(NodeId(1), s).set_leak(NodeId(2), s);
        b.add_edge(NodeId(1), NodeId(2), s).add_edge(NodeId(2), NodeId(1), s);
        assert!(b.build().is_err());

        // visible node with a child
        let mut b = NetworkBuilder::new(0, 2);
        let s = b.new_slot(1.0);
        b.set_leak(NodeId(1), s).set_leak(NodeId(2), s);
        b.add_edge(NodeId(1), NodeId(2), s);
        assert!(b.build().is_err());

        // negative parameter
        let mut b = NetworkBuilder::new(0, 1);
        let s = b.new_slot(-1.0);
        b.set_leak(NodeId(1), s);
        assert!(b.build().is_err());
    }

    #[test]
    fn clip_respects_frozen_slots() {
        let mut p = ParamStore::new(vec![0.0, 1e-9, 2.0], vec![false, true, false]).unwrap();
        p.clip(1e-5);
        assert_eq!(p.values(), &[1e-5, 1e-9, 2.0]);
    }
}
