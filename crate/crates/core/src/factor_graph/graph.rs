use std::fmt;

use crate::error::{Error, Result};

/// A log-domain message or potential over the two states of a binary variable.
pub type LogPair = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FactorId(pub u32);

impl VarId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl FactorId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

/// Log-domain unary scores `(score at 0, score at 1)`.
///
/// A negative-infinity entry hard-clamps the variable to the other state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogUnary(pub LogPair);

impl LogUnary {
    pub const UNIFORM: LogUnary = LogUnary([0.0, 0.0]);

    pub fn new(at_zero: f64, at_one: f64) -> Self {
        LogUnary([at_zero, at_one])
    }

    /// Unary that forces the variable to `state`.
    pub fn clamp(state: bool) -> Self {
        if state {
            LogUnary([f64::NEG_INFINITY, 0.0])
        } else {
            LogUnary([0.0, f64::NEG_INFINITY])
        }
    }

    #[inline]
    pub fn at(&self, state: bool) -> f64 {
        self.0[state as usize]
    }

    /// The state forced by a hard clamp, if any.
    #[inline]
    pub fn clamped_state(&self) -> Option<bool> {
        match (self.0[0] == f64::NEG_INFINITY, self.0[1] == f64::NEG_INFINITY) {
            (true, false) => Some(true),
            (false, true) => Some(false),
            _ => None,
        }
    }

    #[inline]
    pub fn is_contradictory(&self) -> bool {
        self.0[0] == f64::NEG_INFINITY && self.0[1] == f64::NEG_INFINITY
    }
}

impl Default for LogUnary {
    fn default() -> Self {
        LogUnary::UNIFORM
    }
}

/// One valid configuration of an enumeration factor: bit `k` of `mask` is the
/// state of the factor's `k`-th variable.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Config {
    pub mask: u64,
    pub log_potential: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Factor {
    /// Explicit list of valid configurations; all others have potential `-inf`.
    Enumeration { vars: Vec<VarId>, configs: Vec<Config> },
    /// Hard constraint `child = OR(parents)`.
    LogicalOr { parents: Vec<VarId>, child: VarId },
    /// `table[input][output]` log-potentials.
    Pairwise {
        input: VarId,
        output: VarId,
        table: [LogPair; 2],
    },
}

impl Factor {
    /// Variables in edge order. For `LogicalOr` the child comes last.
    pub fn vars(&self) -> Vec<VarId> {
        match self {
            Factor::Enumeration { vars, .. } => vars.clone(),
            Factor::LogicalOr { parents, child } => {
                let mut v = parents.clone();
                v.push(*child);
                v
            }
            Factor::Pairwise { input, output, .. } => vec![*input, *output],
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Factor::Enumeration { vars, .. } => vars.len(),
            Factor::LogicalOr { parents, .. } => parents.len() + 1,
            Factor::Pairwise { .. } => 2,
        }
    }

    /// Log-potential of the factor at the given states (edge order).
    pub fn log_potential(&self, states: &[bool]) -> f64 {
        debug_assert_eq!(states.len(), self.arity());
        match self {
            Factor::Enumeration { configs, .. } => {
                let mask = states.iter().enumerate().fold(0u64, |m, (k, &s)| m | ((s as u64) << k));
                configs
                    .iter()
                    .find(|c| c.mask == mask)
                    .map_or(f64::NEG_INFINITY, |c| c.log_potential)
            }
            Factor::LogicalOr { .. } => {
                let (child, parents) = states.split_last().unwrap();
                if *child == parents.iter().any(|&p| p) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Factor::Pairwise { table, .. } => table[states[0] as usize][states[1] as usize],
        }
    }

    /// Expands a `LogicalOr` factor into the equivalent enumeration factor.
    pub fn to_enumeration(&self) -> Factor {
        match self {
            Factor::Enumeration { .. } => self.clone(),
            _ => {
                let vars = self.vars();
                let n = vars.len();
                assert!(n < 64, "enumeration needs fewer than 64 variables");
                let mut configs = Vec::new();
                let mut states = vec![false; n];
                for mask in 0..(1u64 << n) {
                    for (k, s) in states.iter_mut().enumerate() {
                        *s = mask >> k & 1 == 1;
                    }
                    let lp = self.log_potential(&states);
                    if lp > f64::NEG_INFINITY {
                        configs.push(Config {
                            mask,
                            log_potential: lp,
                        });
                    }
                }
                Factor::Enumeration { vars, configs }
            }
        }
    }

    fn validate(&self, n_vars: usize) -> Result<()> {
        let vars = self.vars();
        for v in &vars {
            if v.index() >= n_vars {
                return Err(Error::InvalidGraph(format!("factor references unknown {v}")));
            }
        }
        let mut sorted = vars.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph("factor repeats a variable".into()));
        }
        match self {
            Factor::Enumeration { vars, configs } => {
                if vars.is_empty() || vars.len() >= 64 {
                    return Err(Error::InvalidGraph("enumeration factor needs 1..=63 variables".into()));
                }
                if !configs.iter().any(|c| c.log_potential > f64::NEG_INFINITY) {
                    return Err(Error::InvalidGraph(
                        "enumeration factor has no valid configuration".into(),
                    ));
                }
                let limit = 1u64 << vars.len();
                if configs.iter().any(|c| c.mask >= limit || c.log_potential.is_nan()) {
                    return Err(Error::InvalidGraph("malformed configuration".into()));
                }
            }
            Factor::LogicalOr { parents, .. } => {
                if parents.is_empty() {
                    return Err(Error::InvalidGraph("OR factor without parents".into()));
                }
            }
            Factor::Pairwise { table, .. } => {
                for row in table {
                    if row.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
                        return Err(Error::InvalidGraph(
                            "pairwise table entry is not an extended real".into(),
                        ));
                    }
                    if row.iter().all(|x| *x == f64::NEG_INFINITY) {
                        return Err(Error::InvalidGraph("pairwise table row without finite entry".into()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Binary variables, their unaries and typed factors, with edge adjacency
/// laid out in compressed rows.
///
/// Edge `e` is one (factor, variable) incidence. Edges of a factor are
/// contiguous and follow [`Factor::vars`] order.
#[derive(Clone, Debug)]
pub struct FactorGraph {
    unaries: Vec<LogUnary>,
    factors: Vec<Factor>,
    factor_start: Vec<usize>,
    edge_var: Vec<u32>,
    var_start: Vec<usize>,
    var_edges: Vec<u32>,
}

impl FactorGraph {
    pub fn builder(n_vars: usize) -> FactorGraphBuilder {
        FactorGraphBuilder::new(n_vars)
    }

    pub fn n_vars(&self) -> usize {
        self.unaries.len()
    }

    pub fn n_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn unaries(&self) -> &[LogUnary] {
        &self.unaries
    }

    pub fn unary(&self, v: VarId) -> LogUnary {
        self.unaries[v.index()]
    }

    pub fn set_unary(&mut self, v: VarId, u: LogUnary) {
        self.unaries[v.index()] = u;
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, f: FactorId) -> &Factor {
        &self.factors[f.index()]
    }

    /// Replaces a pairwise factor's table in place, keeping the structure.
    pub fn set_pairwise_table(&mut self, f: FactorId, new_table: [LogPair; 2]) {
        match &mut self.factors[f.index()] {
            Factor::Pairwise { table, .. } => *table = new_table,
            other => panic!("factor {f:?} is not pairwise: {other:?}"),
        }
    }

    /// Edge range of a factor.
    #[inline]
    pub fn factor_edges(&self, f: usize) -> std::ops::Range<usize> {
        self.factor_start[f]..self.factor_start[f + 1]
    }

    /// Edges incident to a variable.
    #[inline]
    pub fn var_edges(&self, v: usize) -> &[u32] {
        &self.var_edges[self.var_start[v]..self.var_start[v + 1]]
    }

    #[inline]
    pub fn edge_var(&self, e: usize) -> usize {
        self.edge_var[e] as usize
    }

    /// Factors incident to a variable.
    pub fn neighbors(&self, v: VarId) -> Vec<FactorId> {
        self.var_edges(v.index())
            .iter()
            .map(|&e| {
                let f = self.factor_start.partition_point(|&s| s <= e as usize) - 1;
                FactorId(f as u32)
            })
            .collect()
    }

    pub(crate) fn check_unaries(&self, unaries: &[LogUnary]) -> Result<()> {
        if unaries.len() != self.n_vars() {
            return Err(Error::DimensionMismatch {
                expected: self.n_vars(),
                got: unaries.len(),
            });
        }
        for (var, u) in unaries.iter().enumerate() {
            if u.is_contradictory() {
                return Err(Error::ContradictoryClamp { var });
            }
            if u.0.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
                return Err(Error::InvalidGraph(format!("unary of v{var} is not an extended real")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FactorGraphBuilder {
    unaries: Vec<LogUnary>,
    factors: Vec<Factor>,
}

impl FactorGraphBuilder {
    pub fn new(n_vars: usize) -> Self {
        FactorGraphBuilder {
            unaries: vec![LogUnary::UNIFORM; n_vars],
            factors: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.unaries.len()
    }

    pub fn add_var(&mut self, unary: LogUnary) -> VarId {
        self.unaries.push(unary);
        VarId(self.unaries.len() as u32 - 1)
    }

    pub fn set_unary(&mut self, v: VarId, u: LogUnary) -> &mut Self {
        self.unaries[v.index()] = u;
        self
    }

    pub fn add_factor(&mut self, factor: Factor) -> Result<FactorId> {
        factor.validate(self.unaries.len())?;
        self.factors.push(factor);
        Ok(FactorId(self.factors.len() as u32 - 1))
    }

    pub fn build(self) -> FactorGraph {
        let n_vars = self.unaries.len();
        let mut factor_start = Vec::with_capacity(self.factors.len() + 1);
        let mut edge_var = Vec::new();
        factor_start.push(0);
        for f in &self.factors {
            edge_var.extend(f.vars().into_iter().map(|v| v.0));
            factor_start.push(edge_var.len());
        }
        let mut degree = vec![0usize; n_vars];
        for &v in &edge_var {
            degree[v as usize] += 1;
        }
        let mut var_start = Vec::with_capacity(n_vars + 1);
        var_start.push(0);
        for d in &degree {
            var_start.push(var_start.last().unwrap() + d);
        }
        let mut fill = var_start.clone();
        let mut var_edges = vec![0u32; edge_var.len()];
        for (e, &v) in edge_var.iter().enumerate() {
            var_edges[fill[v as usize]] = e as u32;
            fill[v as usize] += 1;
        }
        FactorGraph {
            unaries: self.unaries,
            factors: self.factors,
            factor_start,
            edge_var,
            var_start,
            var_edges,
        }
    }
}
