//! Random instances shared by unit tests.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::noisy_or::{NetworkBuilder, NodeId, NoisyOrNetwork};

/// Random DAG: hidden node `k` may point to later hidden nodes and to every
/// visible node. With `share`, edges reuse a small pool of slots.
pub(crate) fn random_net(rng: &mut ChaCha8Rng, m: usize, p: usize, share: bool) -> NoisyOrNetwork {
    let mut b = NetworkBuilder::new(m, p);
    let pool: Vec<usize> = if share {
        (0..3).map(|_| b.new_slot(rng.random_range(0.05..3.0))).collect()
    } else {
        Vec::new()
    };
    let slot = |b: &mut NetworkBuilder, rng: &mut ChaCha8Rng| {
        if share && rng.random_bool(0.5) {
            pool[rng.random_range(0..pool.len())]
        } else {
            b.new_slot(rng.random_range(0.05..3.0))
        }
    };
    for i in 1..=(m + p) {
        let s = slot(&mut b, rng);
        b.set_leak(NodeId(i as u32), s);
    }
    for i in 1..=(m + p) {
        for k in 1..=(i - 1).min(m) {
            if rng.random_bool(0.5) {
                let s = slot(&mut b, rng);
                b.add_edge(NodeId(k as u32), NodeId(i as u32), s);
            }
        }
    }
    b.build().unwrap()
}

pub(crate) fn random_bits(rng: &mut ChaCha8Rng, n: usize) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(0.5)).collect()
}

/// All `2^n` binary vectors of length `n`, bit `i` of the index at position `i`.
pub(crate) fn all_assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u64..1 << n).map(move |mask| (0..n).map(|i| mask >> i & 1 == 1).collect())
}

/// Random polytree (tree-structured skeleton) whose visible nodes are leaves.
/// Hidden node `k` links to an earlier hidden node in a random direction or
/// starts a new component; each visible node takes parents from distinct
/// components and merges them.
pub(crate) fn random_tree_net(rng: &mut ChaCha8Rng, m: usize, p: usize) -> NoisyOrNetwork {
    let mut b = NetworkBuilder::new(m, p);
    let mut comp: Vec<usize> = (0..m).collect();
    fn find(comp: &mut [usize], mut x: usize) -> usize {
        while comp[x] != x {
            comp[x] = comp[comp[x]];
            x = comp[x];
        }
        x
    }
    let mut edges = Vec::new();
    for k in 1..m {
        if rng.random_bool(0.75) {
            let j = rng.random_range(0..k);
            if rng.random_bool(0.5) {
                edges.push((j, k));
            } else {
                edges.push((k, j));
            }
            let (a, c) = (find(&mut comp, j), find(&mut comp, k));
            comp[a] = c;
        }
    }
    for (par, ch) in edges {
        let s = b.new_slot(rng.random_range(0.1..4.0));
        b.add_edge(b.hidden(par), b.hidden(ch), s);
    }
    for j in 0..p {
        let want = if m == 0 { 0 } else { rng.random_range(1..=m.min(3)) };
        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(rng);
        let mut used_roots = Vec::new();
        for k in order {
            if used_roots.len() == want {
                break;
            }
            let r = find(&mut comp, k);
            if used_roots.contains(&r) {
                continue;
            }
            used_roots.push(r);
            let s = b.new_slot(rng.random_range(0.1..4.0));
            b.add_edge(b.hidden(k), b.visible(j), s);
        }
        if let Some((&first, rest)) = used_roots.split_first() {
            for &r in rest {
                comp[r] = first;
            }
        }
    }
    for i in 1..=(m + p) {
        let s = b.new_slot(rng.random_range(0.05..2.0));
        b.set_leak(NodeId(i as u32), s);
    }
    b.build().unwrap()
}

/// Exact `log p(h, x)` for every hidden assignment, in [`all_assignments`] order.
pub(crate) fn joint_table(net: &NoisyOrNetwork, x: &[bool]) -> Vec<(Vec<bool>, f64)> {
    all_assignments(net.n_hidden())
        .map(|h| {
            let lp = net.elbo_mp(x, &h).unwrap();
            (h, lp)
        })
        .collect()
}
