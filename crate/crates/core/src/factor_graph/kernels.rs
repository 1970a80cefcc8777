//! Factor-to-variable message kernels.
//!
//! Every kernel reads the incoming variable-to-factor messages of one factor
//! (in edge order) and writes max-normalized outgoing messages in the same
//! order.

use super::graph::{Config, Factor, LogPair};

const NEG_INF: f64 = f64::NEG_INFINITY;

/// Shifts a message so that its larger entry is 0.
///
/// A message with both entries at `-inf` carries a contradiction; it is
/// replaced by the uninformative `(0, 0)`.
#[inline]
pub fn normalize(m: LogPair) -> LogPair {
    let mx = m[0].max(m[1]);
    if mx == NEG_INF {
        [0.0, 0.0]
    } else {
        [m[0] - mx, m[1] - mx]
    }
}

/// Brute-force kernel over the listed valid configurations.
pub(crate) fn enumeration_kernel(configs: &[Config], incoming: &[LogPair], out: &mut [LogPair]) {
    let n = incoming.len();
    for o in out.iter_mut() {
        *o = [NEG_INF, NEG_INF];
    }
    for cfg in configs {
        if cfg.log_potential == NEG_INF {
            continue;
        }
        for i in 0..n {
            let mut s = cfg.log_potential;
            for (k, m) in incoming.iter().enumerate() {
                if k != i {
                    s += m[(cfg.mask >> k & 1) as usize];
                }
            }
            let c = (cfg.mask >> i & 1) as usize;
            if s > out[i][c] {
                out[i][c] = s;
            }
        }
    }
    for o in out.iter_mut() {
        *o = normalize(*o);
    }
}

/// Linear-time kernel for `child = OR(parents)`; the child is the last edge.
///
/// Each parent contributes penalties `pen_s = m(s) - max(m)` for taking state
/// `s` instead of its preferred one. The child's `0` state needs every parent
/// off (sum of off-penalties); its `1` state needs at least one parent on,
/// which costs the largest on-penalty (0 if some parent already prefers on).
/// Messages back to parent `j` use the same statistics with `j` removed, with
/// the top-two on-penalties giving the leave-one-out maximum.
pub(crate) fn or_kernel(incoming: &[LogPair], out: &mut [LogPair]) {
    let (child_in, parents_in) = incoming.split_last().expect("OR factor has a child");
    let n = parents_in.len();

    let mut off_sum = 0.0;
    let mut off_inf = 0usize;
    let mut best_on = NEG_INF;
    let mut best_idx = usize::MAX;
    let mut second_on = NEG_INF;
    for (k, m) in parents_in.iter().enumerate() {
        let mx = m[0].max(m[1]);
        let (pen0, pen1) = if mx == NEG_INF {
            (0.0, 0.0)
        } else {
            (m[0] - mx, m[1] - mx)
        };
        if pen0 == NEG_INF {
            off_inf += 1;
        } else {
            off_sum += pen0;
        }
        if pen1 > best_on || best_idx == usize::MAX {
            second_on = best_on;
            best_on = pen1;
            best_idx = k;
        } else if pen1 > second_on {
            second_on = pen1;
        }
    }

    let all_off = if off_inf > 0 { NEG_INF } else { off_sum };
    out[n] = normalize([all_off, best_on]);

    let [c0, c1] = *child_in;
    for (j, m) in parents_in.iter().enumerate() {
        let mx = m[0].max(m[1]);
        let pen0 = if mx == NEG_INF { 0.0 } else { m[0] - mx };
        let others_off = if pen0 == NEG_INF {
            if off_inf > 1 {
                NEG_INF
            } else {
                off_sum
            }
        } else if off_inf > 0 {
            NEG_INF
        } else {
            off_sum - pen0
        };
        let others_on = if j == best_idx { second_on } else { best_on };
        let s0 = (c0 + others_off).max(c1 + others_on);
        out[j] = normalize([s0, c1]);
    }
}

/// Kernel for a 2x2 table indexed `[input][output]`.
#[inline]
pub(crate) fn pairwise_kernel(table: &[LogPair; 2], incoming: &[LogPair], out: &mut [LogPair]) {
    let [u0, u1] = incoming[0];
    let [v0, v1] = incoming[1];
    out[0] = normalize([
        (table[0][0] + v0).max(table[0][1] + v1),
        (table[1][0] + v0).max(table[1][1] + v1),
    ]);
    out[1] = normalize([
        (table[0][0] + u0).max(table[1][0] + u1),
        (table[0][1] + u0).max(table[1][1] + u1),
    ]);
}

#[inline]
pub(crate) fn apply_kernel(factor: &Factor, incoming: &[LogPair], out: &mut [LogPair]) {
    match factor {
        Factor::Pairwise { table, .. } => pairwise_kernel(table, incoming, out),
        Factor::LogicalOr { .. } => or_kernel(incoming, out),
        Factor::Enumeration { configs, .. } => enumeration_kernel(configs, incoming, out),
    }
}

/// Outgoing messages of any factor given its incoming messages in edge order.
pub fn factor_to_var(factor: &Factor, incoming: &[LogPair]) -> Vec<LogPair> {
    assert_eq!(incoming.len(), factor.arity(), "one incoming message per edge");
    let mut out = vec![[0.0; 2]; incoming.len()];
    apply_kernel(factor, incoming, &mut out);
    out
}

/// Enumeration update: `LogicalOr` and `Pairwise` factors are first expanded
/// to their valid configurations.
pub fn factor_to_var_enum(factor: &Factor, incoming: &[LogPair]) -> Vec<LogPair> {
    factor_to_var(&factor.to_enumeration(), incoming)
}

/// Linear-time update of a `LogicalOr` factor.
pub fn factor_to_var_or(factor: &Factor, incoming: &[LogPair]) -> Vec<LogPair> {
    assert!(
        matches!(factor, Factor::LogicalOr { .. }),
        "expected a LogicalOr factor"
    );
    factor_to_var(factor, incoming)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_graph::VarId;
    use proptest::prelude::*;

    fn or_factor(n: usize) -> Factor {
        Factor::LogicalOr {
            parents: (0..n as u32).map(VarId).collect(),
            child: VarId(n as u32),
        }
    }

    fn close(a: &[LogPair], b: &[LogPair], tol: f64) -> bool {
        a.iter()
            .zip(b)
            .all(|(x, y)| (0..2).all(|s| (x[s] == y[s]) || (x[s] - y[s]).abs() <= tol))
    }

    #[test]
    fn unary_enumeration_passthrough() {
        let f = Factor::Enumeration {
            vars: vec![VarId(0)],
            configs: vec![
                Config {
                    mask: 0,
                    log_potential: 0.0,
                },
                Config {
                    mask: 1,
                    log_potential: -3.0,
                },
            ],
        };
        assert_eq!(factor_to_var(&f, &[[0.0, 0.0]]), vec![[0.0, -3.0]]);
    }

    #[test]
    fn two_parent_or_examples() {
        let f = or_factor(2);
        let out = factor_to_var_or(&f, &[[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(out[2], [0.0, 0.0]);

        // best child=1 support is t=(1,0) with score 2; child=0 scores 0
        let incoming = [[0.0, 2.0], [0.0, -1.0], [0.0, 0.0]];
        let out = factor_to_var_or(&f, &incoming);
        assert_eq!(out[2], [-2.0, 0.0]);
        // to t1: t1=0 -> best of c=0 (t2=0: 0) or c=1 with t2=1 (-1) = 0;
        //        t1=1 -> c=1, t2 free: max(0,-1) = 0
        assert_eq!(out[0], [0.0, 0.0]);
        // to t2: t2=0 -> max(c=0,t1=0: 0 ; c=1,t1=1: 2) = 2; t2=1 -> c=1, t1 free: 2
        assert_eq!(out[1], [0.0, 0.0]);
        assert!(close(&out, &factor_to_var_enum(&f, &incoming), 1e-12));
    }

    #[test]
    fn or_enum_example_from_two_parents() {
        let f = Factor::LogicalOr {
            parents: vec![VarId(0), VarId(1)],
            child: VarId(2),
        }
        .to_enumeration();
        let out = factor_to_var(&f, &[[0.0, 2.0], [0.0, -1.0], [0.0, 0.0]]);
        assert_eq!(out[2], normalize([0.0, 2.0]));
    }

    #[test]
    fn single_parent_or_clamps_both_ways() {
        let f = or_factor(1);
        // child clamped to 1 forces the parent on
        let out = factor_to_var_or(&f, &[[0.0, 0.0], [NEG_INF, 0.0]]);
        assert_eq!(out[0], [NEG_INF, 0.0]);
        let out = factor_to_var_or(&f, &[[0.0, 0.0], [0.0, NEG_INF]]);
        assert_eq!(out[0], [0.0, NEG_INF]);
    }

    #[test]
    fn infinite_penalties_match_enumeration() {
        let f = or_factor(3);
        let cases: [[LogPair; 4]; 4] = [
            [[NEG_INF, 0.0], [0.0, -1.0], [0.0, NEG_INF], [0.0, 0.0]],
            [[NEG_INF, 0.0], [NEG_INF, 0.0], [0.0, -2.0], [0.0, NEG_INF]],
            [[0.0, NEG_INF], [0.0, NEG_INF], [0.0, -0.5], [NEG_INF, 0.0]],
            [[0.0, NEG_INF], [0.0, NEG_INF], [0.0, NEG_INF], [0.0, -4.0]],
        ];
        for c in &cases {
            let lin = factor_to_var_or(&f, c);
            let en = factor_to_var_enum(&f, c);
            assert!(close(&lin, &en, 1e-12), "{c:?}: {lin:?} vs {en:?}");
        }
    }

    #[test]
    fn pairwise_matches_enumeration() {
        let f = Factor::Pairwise {
            input: VarId(0),
            output: VarId(1),
            table: [[0.0, NEG_INF], [-0.7, -0.3]],
        };
        let incoming = [[0.0, -1.5], [-0.2, 0.0]];
        assert!(close(
            &factor_to_var(&f, &incoming),
            &factor_to_var_enum(&f, &incoming),
            1e-12
        ));
    }

    proptest! {
        #[test]
        fn or_kernel_equals_enumeration(
            n in 1usize..=10,
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 11),
        ) {
            let f = or_factor(n);
            let incoming: Vec<LogPair> = raw[..=n].iter().map(|&(a, b)| [a, b]).collect();
            let lin = factor_to_var_or(&f, &incoming);
            let en = factor_to_var_enum(&f, &incoming);
            prop_assert!(close(&lin, &en, 1e-9), "{:?} vs {:?}", lin, en);
        }

        #[test]
        fn enumeration_is_config_order_free(
            raw in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 3),
            seed in 0u64..1000,
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let f = or_factor(2).to_enumeration();
            let Factor::Enumeration { vars, mut configs } = f.clone() else { unreachable!() };
            configs.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let g = Factor::Enumeration { vars, configs };
            let incoming: Vec<LogPair> = raw.iter().map(|&(a, b)| [a, b]).collect();
            prop_assert_eq!(factor_to_var(&f, &incoming), factor_to_var(&g, &incoming));
        }
    }
}
