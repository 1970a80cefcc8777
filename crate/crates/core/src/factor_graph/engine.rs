use super::graph::{FactorGraph, LogPair, LogUnary};
use super::kernels::{apply_kernel, normalize};
use crate::error::{Error, Result};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Iteration count and damping of a max-product run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MaxProductConfig {
    pub n_iters: usize,
    /// Weight of the freshly computed message; `1.0` disables damping.
    pub damping: f64,
}

impl Default for MaxProductConfig {
    fn default() -> Self {
        MaxProductConfig {
            n_iters: 100,
            damping: 0.5,
        }
    }
}

impl MaxProductConfig {
    pub fn new(n_iters: usize, damping: f64) -> Self {
        MaxProductConfig { n_iters, damping }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters == 0 {
            return Err(Error::invalid("n_iters must be at least 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        Ok(())
    }
}

/// Messages on every edge in both directions.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageState {
    pub factor_to_var: Vec<LogPair>,
    pub var_to_factor: Vec<LogPair>,
    pub damping: f64,
    pub iterations: usize,
}

/// Per-state belief kept as (finite sum, number of `-inf` terms) so that a
/// single edge can be removed exactly.
#[derive(Clone, Copy, Default)]
struct Belief {
    sum: [f64; 2],
    n_inf: [u32; 2],
}

impl Belief {
    #[inline]
    fn add(&mut self, m: LogPair) {
        for s in 0..2 {
            if m[s] == NEG_INF {
                self.n_inf[s] += 1;
            } else {
                self.sum[s] += m[s];
            }
        }
    }

    #[inline]
    fn total(&self) -> LogPair {
        [0, 1].map(|s| if self.n_inf[s] > 0 { NEG_INF } else { self.sum[s] })
    }

    #[inline]
    fn without(&self, m: LogPair) -> LogPair {
        [0, 1].map(|s| {
            if m[s] == NEG_INF {
                if self.n_inf[s] > 1 {
                    NEG_INF
                } else {
                    self.sum[s]
                }
            } else if self.n_inf[s] > 0 {
                NEG_INF
            } else {
                self.sum[s] - m[s]
            }
        })
    }
}

/// Blends a new message into the old one.
///
/// `-inf` is absorbing only on the new side: an old `-inf` entry jumps to a
/// finite new value so that released clamps propagate.
#[inline]
fn damp(new: LogPair, old: LogPair, alpha: f64) -> LogPair {
    let blend = |n: f64, o: f64| {
        if n == NEG_INF {
            NEG_INF
        } else if o == NEG_INF {
            n
        } else {
            alpha * n + (1.0 - alpha) * o
        }
    };
    normalize([blend(new[0], old[0]), blend(new[1], old[1])])
}

impl MessageState {
    /// Zero factor-to-variable messages and variable-to-factor messages that
    /// carry only the unaries.
    pub fn initial(graph: &FactorGraph, unaries: &[LogUnary], damping: f64) -> Self {
        let n_edges = graph.n_edges();
        let mut state = MessageState {
            factor_to_var: vec![[0.0, 0.0]; n_edges],
            var_to_factor: vec![[0.0, 0.0]; n_edges],
            damping,
            iterations: 0,
        };
        state.update_var_to_factor(graph, unaries);
        state
    }

    /// One flooding round: every factor-to-variable message from the previous
    /// variable-to-factor messages, then every variable-to-factor message.
    pub fn round(&mut self, graph: &FactorGraph, unaries: &[LogUnary], scratch: &mut Vec<LogPair>) {
        self.update_factor_to_var(graph, scratch);
        self.update_var_to_factor(graph, unaries);
        self.iterations += 1;
    }

    fn update_factor_to_var(&mut self, graph: &FactorGraph, scratch: &mut Vec<LogPair>) {
        let alpha = self.damping;
        for (f, factor) in graph.factors().iter().enumerate() {
            let edges = graph.factor_edges(f);
            let deg = edges.len();
            if scratch.len() < deg {
                scratch.resize(deg, [0.0; 2]);
            }
            let out = &mut scratch[..deg];
            apply_kernel(factor, &self.var_to_factor[edges.clone()], out);
            for (slot, new) in self.factor_to_var[edges].iter_mut().zip(out.iter()) {
                *slot = if alpha == 1.0 { *new } else { damp(*new, *slot, alpha) };
            }
        }
    }

    fn update_var_to_factor(&mut self, graph: &FactorGraph, unaries: &[LogUnary]) {
        for v in 0..graph.n_vars() {
            let edges = graph.var_edges(v);
            if edges.is_empty() {
                continue;
            }
            let belief = self.belief_of(graph, unaries, v);
            for &e in edges {
                let e = e as usize;
                self.var_to_factor[e] = normalize(belief.without(self.factor_to_var[e]));
            }
        }
    }

    #[inline]
    fn belief_of(&self, graph: &FactorGraph, unaries: &[LogUnary], v: usize) -> Belief {
        let mut b = Belief::default();
        b.add(unaries[v].0);
        for &e in graph.var_edges(v) {
            b.add(self.factor_to_var[e as usize]);
        }
        b
    }

    /// Unnormalized max-marginal scores `unary + sum of incoming messages`.
    pub fn beliefs(&self, graph: &FactorGraph, unaries: &[LogUnary]) -> Vec<LogPair> {
        (0..graph.n_vars())
            .map(|v| self.belief_of(graph, unaries, v).total())
            .collect()
    }
}

/// Runs `n_iters` damped flooding rounds using the graph's own unaries.
pub fn run_max_product(graph: &FactorGraph, n_iters: usize, damping: f64) -> Result<MessageState> {
    run_max_product_with(graph, graph.unaries(), MaxProductConfig::new(n_iters, damping))
}

/// Same as [`run_max_product`] with unaries supplied per call, so one graph
/// can serve many clamped or perturbed queries.
pub fn run_max_product_with(
    graph: &FactorGraph,
    unaries: &[LogUnary],
    config: MaxProductConfig,
) -> Result<MessageState> {
    config.validate()?;
    graph.check_unaries(unaries)?;
    let mut state = MessageState::initial(graph, unaries, config.damping);
    let mut scratch = Vec::new();
    for _ in 0..config.n_iters {
        state.round(graph, unaries, &mut scratch);
    }
    Ok(state)
}

/// Argmax of the beliefs with ties resolved toward state 0. Clamped variables
/// always decode to their clamp.
pub fn decode(graph: &FactorGraph, state: &MessageState) -> Vec<bool> {
    decode_with(graph, graph.unaries(), state)
}

pub fn decode_with(graph: &FactorGraph, unaries: &[LogUnary], state: &MessageState) -> Vec<bool> {
    (0..graph.n_vars())
        .map(|v| match unaries[v].clamped_state() {
            Some(s) => s,
            None => {
                let b = state.belief_of(graph, unaries, v).total();
                b[1] > b[0]
            }
        })
        .collect()
}

/// Sum of unary scores and factor log-potentials at an assignment; `-inf` iff
/// a hard constraint is violated.
pub fn score(graph: &FactorGraph, assignment: &[bool]) -> f64 {
    score_with(graph, graph.unaries(), assignment)
}

pub fn score_with(graph: &FactorGraph, unaries: &[LogUnary], assignment: &[bool]) -> f64 {
    assert_eq!(assignment.len(), graph.n_vars(), "assignment length");
    let mut total: f64 = unaries.iter().zip(assignment).map(|(u, &s)| u.at(s)).sum();
    let mut states = Vec::new();
    for (f, factor) in graph.factors().iter().enumerate() {
        states.clear();
        states.extend(graph.factor_edges(f).map(|e| assignment[graph.edge_var(e)]));
        total += factor.log_potential(&states);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::{Config, Factor, VarId};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force_map(graph: &FactorGraph) -> (Vec<bool>, f64) {
        let n = graph.n_vars();
        let mut best = (vec![false; n], NEG_INF);
        for mask in 0u64..(1 << n) {
            let a: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
            let s = score(graph, &a);
            if s > best.1 {
                best = (a, s);
            }
        }
        best
    }

    /// Random tree: each new variable attaches to an earlier one through a
    /// pairwise, single-variable enumeration, or OR factor. Returns the graph
    /// and its diameter in factor hops.
    fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> (FactorGraph, usize) {
        let mut b = FactorGraph::builder(n);
        for v in 0..n {
            b.set_unary(
                VarId(v as u32),
                LogUnary::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
            );
        }
        let mut depth = vec![0usize; n];
        let mut adj = vec![Vec::new(); n];
        let mut v = 1;
        while v < n {
            let kind = rng.random_range(0..3);
            if kind == 2 && v + 1 < n {
                // OR(parent, v) -> v+1 with parent an earlier variable
                let p = rng.random_range(0..v);
                b.add_factor(Factor::LogicalOr {
                    parents: vec![VarId(p as u32), VarId(v as u32)],
                    child: VarId(v as u32 + 1),
                })
                .unwrap();
                adj[p].push(v);
                adj[v].push(p);
                adj[p].push(v + 1);
                adj[v + 1].push(p);
                adj[v].push(v + 1);
                adj[v + 1].push(v);
                depth[v] = depth[p] + 1;
                depth[v + 1] = depth[p] + 1;
                v += 2;
            } else {
                let p = rng.random_range(0..v);
                let table = [
                    [rng.random_range(-2.0..1.0), rng.random_range(-2.0..1.0)],
                    [rng.random_range(-2.0..1.0), rng.random_range(-2.0..1.0)],
                ];
                b.add_factor(Factor::Pairwise {
                    input: VarId(p as u32),
                    output: VarId(v as u32),
                    table,
                })
                .unwrap();
                adj[p].push(v);
                adj[v].push(p);
                v += 1;
            }
            if rng.random_bool(0.3) {
                let u = rng.random_range(0..v);
                b.add_factor(Factor::Enumeration {
                    vars: vec![VarId(u as u32)],
                    configs: vec![
                        Config {
                            mask: 0,
                            log_potential: rng.random_range(-1.0..0.0),
                        },
                        Config {
                            mask: 1,
                            log_potential: rng.random_range(-1.0..0.0),
                        },
                    ],
                })
                .unwrap();
            }
        }
        // eccentricity by BFS from each node (in variable hops, an upper bound
        // on factor hops)
        let mut diam = 0;
        for s in 0..n {
            let mut dist = vec![usize::MAX; n];
            dist[s] = 0;
            let mut queue = std::collections::VecDeque::from([s]);
            while let Some(x) = queue.pop_front() {
                for &y in &adj[x] {
                    if dist[y] == usize::MAX {
                        dist[y] = dist[x] + 1;
                        queue.push_back(y);
                    }
                }
            }
            diam = diam.max(dist.into_iter().filter(|&d| d != usize::MAX).max().unwrap());
        }
        (b.build(), diam)
    }

    #[test]
    fn isolated_variable_decodes_from_unary() {
        let mut b = FactorGraph::builder(1);
        b.set_unary(VarId(0), LogUnary::new(0.0, 1.0));
        let g = b.build();
        let st = run_max_product(&g, 1, 0.5).unwrap();
        assert!(st.factor_to_var.is_empty());
        assert_eq!(decode(&g, &st), vec![true]);

        let g0 = FactorGraph::builder(1).build();
        let st = run_max_product(&g0, 1, 0.5).unwrap();
        assert_eq!(decode(&g0, &st), vec![false]);
    }

    #[test]
    fn clamp_dominates_messages() {
        let mut b = FactorGraph::builder(1);
        b.set_unary(VarId(0), LogUnary::new(NEG_INF, 0.0));
        b.add_factor(Factor::Enumeration {
            vars: vec![VarId(0)],
            configs: vec![
                Config {
                    mask: 0,
                    log_potential: 0.0,
                },
                Config {
                    mask: 1,
                    log_potential: -50.0,
                },
            ],
        })
        .unwrap();
        let g = b.build();
        let st = run_max_product(&g, 5, 0.5).unwrap();
        assert_eq!(decode(&g, &st), vec![true]);
    }

    #[test]
    fn contradictory_clamp_is_rejected() {
        let mut b = FactorGraph::builder(2);
        b.set_unary(VarId(1), LogUnary::new(NEG_INF, NEG_INF));
        let g = b.build();
        assert!(matches!(
            run_max_product(&g, 3, 0.5),
            Err(Error::ContradictoryClamp { var: 1 })
        ));
        assert!(run_max_product(&FactorGraph::builder(1).build(), 0, 0.5).is_err());
        assert!(run_max_product(&FactorGraph::builder(1).build(), 1, 0.0).is_err());
    }

    #[test]
    fn score_edge_cases() {
        let g = FactorGraph::builder(0).build();
        assert_eq!(score(&g, &[]), 0.0);
        let mut b = FactorGraph::builder(3);
        b.add_factor(Factor::LogicalOr {
            parents: vec![VarId(0), VarId(1)],
            child: VarId(2),
        })
        .unwrap();
        let g = b.build();
        assert_eq!(score(&g, &[false, false, true]), NEG_INF);
        assert_eq!(score(&g, &[true, false, true]), 0.0);
    }

    #[test]
    fn trees_decode_to_exact_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(2..=15);
            let (g, diam) = random_tree(&mut rng, n);
            let (oracle, best) = brute_force_map(&g);
            let st = run_max_product(&g, diam + 2, 1.0).unwrap();
            let dec = decode(&g, &st);
            let s = score(&g, &dec);
            assert!(
                (s - best).abs() < 1e-9,
                "decoded {dec:?} scores {s}, oracle {oracle:?} scores {best}"
            );
        }
    }

    #[test]
    fn damped_runs_reach_exact_map_on_trees() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let n = rng.random_range(2..=12);
            let (g, _) = random_tree(&mut rng, n);
            let (_, best) = brute_force_map(&g);
            let st = run_max_product(&g, 100, 0.5).unwrap();
            assert!((score(&g, &decode(&g, &st)) - best).abs() < 1e-9);
        }
    }

    #[test]
    fn fixed_point_is_stable_under_damping() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (g, diam) = random_tree(&mut rng, 10);
            let unaries = g.unaries().to_vec();
            // undamped flooding on a tree reaches its fixed point
            let mut st = run_max_product(&g, diam + 4, 1.0).unwrap();
            st.damping = 0.5;
            let before = st.clone();
            let mut scratch = Vec::new();
            st.round(&g, &unaries, &mut scratch);
            for (a, b) in st.factor_to_var.iter().zip(&before.factor_to_var) {
                for s in 0..2 {
                    assert!(a[s] == b[s] || (a[s] - b[s]).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn decode_is_invariant_to_message_shifts() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (g, _) = random_tree(&mut rng, 12);
        let st = run_max_product(&g, 30, 0.5).unwrap();
        let mut shifted = st.clone();
        for m in shifted.factor_to_var.iter_mut() {
            let c = rng.random_range(-3.0..3.0);
            m[0] += c;
            m[1] += c;
        }
        assert_eq!(decode(&g, &st), decode(&g, &shifted));
    }

    #[test]
    fn decode_beats_random_assignments_on_loopy_graph() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 8;
        let mut b = FactorGraph::builder(n);
        for v in 0..n {
            b.set_unary(VarId(v as u32), LogUnary::new(0.0, rng.random_range(-1.0..1.0)));
        }
        for v in 0..n {
            let w = (v + 1) % n;
            let a = rng.random_range(0.5..2.0);
            b.add_factor(Factor::Pairwise {
                input: VarId(v as u32),
                output: VarId(w as u32),
                table: [[a, 0.0], [0.0, a]],
            })
            .unwrap();
        }
        let g = b.build();
        let st = run_max_product(&g, 100, 0.5).unwrap();
        let s = score(&g, &decode(&g, &st));
        for _ in 0..100 {
            let a: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
            assert!(s >= score(&g, &a) - 1e-12);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (g, _) = random_tree(&mut rng, 14);
        let a = run_max_product(&g, 50, 0.5).unwrap();
        let b = run_max_product(&g, 50, 0.5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn damping_with_infinities() {
        assert_eq!(damp([NEG_INF, 0.0], [0.0, 0.0], 0.5), [NEG_INF, 0.0]);
        assert_eq!(damp([0.0, -2.0], [0.0, NEG_INF], 0.5), [0.0, -2.0]);
        assert_eq!(damp([0.0, -2.0], [0.0, 0.0], 0.5), [0.0, -1.0]);
        assert_eq!(damp([NEG_INF, 0.0], [NEG_INF, 0.0], 0.5), [NEG_INF, 0.0]);
    }
}
