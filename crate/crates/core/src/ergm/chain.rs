use rand::Rng;
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use super::terms::{resolve_all, ResolvedTerm};
use super::ErgmModel;
use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, NodeAttributes};
use crate::rng::{rng_from_seed, SimRng};

/// Metropolis run lengths, in single-dyad proposals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulationControl {
    pub burn_in: u64,
    pub thin: u64,
    pub rng_seed: u64,
}

impl SimulationControl {
    pub fn new(burn_in: u64, thin: u64, rng_seed: u64) -> Result<Self> {
        let c = SimulationControl {
            burn_in,
            thin,
            rng_seed,
        };
        c.validate()?;
        Ok(c)
    }

    /// Burn-in of ten sweeps and thinning of one sweep over all C(n, 2) dyads.
    pub fn for_nodes(n: usize, rng_seed: u64) -> Self {
        let dyads = dyad_count(n).max(1);
        SimulationControl {
            burn_in: 10 * dyads,
            thin: dyads,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::input("thin must be at least 1"));
        }
        Ok(())
    }
}

pub(crate) fn dyad_count(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Above this many nodes the dense adjacency bitmap would exceed ~50 MB.
const DENSE_LIMIT: usize = 20_000;

enum EdgeStore {
    Dense { n: usize, bits: Vec<u64> },
    Sparse(FxHashSet<u64>),
}

impl EdgeStore {
    fn new(n: usize) -> Self {
        if n <= DENSE_LIMIT {
            EdgeStore::Dense {
                n,
                bits: vec![0; (n * n).div_ceil(64)],
            }
        } else {
            EdgeStore::Sparse(FxHashSet::default())
        }
    }

    #[inline]
    fn key(n: usize, i: usize, j: usize) -> usize {
        i * n + j
    }

    /// Requires i < j.
    #[inline]
    fn contains(&self, i: usize, j: usize) -> bool {
        match self {
            EdgeStore::Dense { n, bits } => {
                let k = Self::key(*n, i, j);
                bits[k >> 6] >> (k & 63) & 1 == 1
            }
            EdgeStore::Sparse(set) => set.contains(&((i as u64) << 32 | j as u64)),
        }
    }

    #[inline]
    fn toggle(&mut self, i: usize, j: usize) {
        match self {
            EdgeStore::Dense { n, bits } => {
                let k = Self::key(*n, i, j);
                bits[k >> 6] ^= 1 << (k & 63);
            }
            EdgeStore::Sparse(set) => {
                let key = (i as u64) << 32 | j as u64;
                if !set.remove(&key) {
                    set.insert(key);
                }
            }
        }
    }

    fn sorted_edges(&self) -> Vec<(u32, u32)> {
        match self {
            EdgeStore::Dense { n, bits } => {
                let mut out = Vec::new();
                for (w, &word) in bits.iter().enumerate() {
                    let mut word = word;
                    while word != 0 {
                        let b = word.trailing_zeros() as usize;
                        let k = w * 64 + b;
                        out.push(((k / n) as u32, (k % n) as u32));
                        word &= word - 1;
                    }
                }
                out
            }
            EdgeStore::Sparse(set) => {
                let mut out: Vec<(u32, u32)> = set.iter().map(|&k| ((k >> 32) as u32, k as u32)).collect();
                out.sort_unstable();
                out
            }
        }
    }
}

/// The Metropolis chain state: current graph, its statistics, and the RNG.
///
/// Starts from the empty graph. Each proposal picks a dyad uniformly and
/// toggles it with probability min(1, exp(±θᵀΔs)).
pub struct Chain<'a> {
    attrs: &'a NodeAttributes,
    n: usize,
    resolved: Vec<ResolvedTerm>,
    theta: Vec<f64>,
    edge_theta: f64,
    node_weight: Vec<f64>,
    match_terms: Vec<(usize, f64)>,
    /// θ-weighted change in the degree terms when a node of degree d gains an edge.
    deg_gain: Vec<f64>,
    degrees: Vec<u32>,
    store: EdgeStore,
    stats: Vec<f64>,
    rng: SimRng,
    proposals: u64,
    accepted: u64,
}

impl<'a> Chain<'a> {
    pub fn new(model: &ErgmModel, attrs: &'a NodeAttributes, rng_seed: u64) -> Result<Self> {
        model.validate()?;
        if let Some(x) = model.theta.iter().find(|x| !x.is_finite()) {
            return Err(Error::input(format!("coefficient {x} is not finite")));
        }
        let n = attrs.len();
        if n < 2 {
            return Err(Error::input("simulation needs at least two nodes"));
        }
        let resolved = resolve_all(&model.terms, attrs.schema())?;
        let mut chain = Chain {
            attrs,
            n,
            stats: vec![0.0; resolved.len()],
            resolved,
            theta: Vec::new(),
            edge_theta: 0.0,
            node_weight: Vec::new(),
            match_terms: Vec::new(),
            deg_gain: Vec::new(),
            degrees: vec![0; n],
            store: EdgeStore::new(n),
            rng: rng_from_seed(rng_seed),
            proposals: 0,
            accepted: 0,
        };
        chain.set_theta(&model.theta)?;
        Ok(chain)
    }

    /// Replaces the coefficients and recompiles the change-statistic evaluator.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.resolved.len() {
            return Err(Error::input("coefficient vector length does not match terms"));
        }
        self.theta = theta.to_vec();
        self.edge_theta = 0.0;
        self.node_weight = vec![0.0; self.n];
        self.match_terms.clear();
        let max_k = self
            .resolved
            .iter()
            .filter_map(|t| match t {
                ResolvedTerm::Degree(k) => Some(*k as usize),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        self.deg_gain = vec![0.0; max_k + 1];
        for (t, &th) in self.resolved.iter().zip(theta) {
            match *t {
                ResolvedTerm::Edges => self.edge_theta += th,
                ResolvedTerm::Degree(k) => {
                    let k = k as usize;
                    // gaining an edge moves a node from degree k-1 into k, and from k out of k
                    self.deg_gain[k - 1] += th;
                    if k < self.deg_gain.len() {
                        self.deg_gain[k] -= th;
                    }
                }
                ResolvedTerm::NodeFactor(a, l) => {
                    for (w, &c) in self.node_weight.iter_mut().zip(self.attrs.column(a)) {
                        if c == l {
                            *w += th;
                        }
                    }
                }
                ResolvedTerm::NodeMatch(a) => self.match_terms.push((a, th)),
            }
        }
        Ok(())
    }

    #[inline]
    fn gain(&self, d: u32) -> f64 {
        self.deg_gain.get(d as usize).copied().unwrap_or(0.0)
    }

    /// θᵀ(s(g+ij) − s(g−ij)) from the compiled evaluator. Requires i < j.
    #[inline]
    fn add_log_odds(&self, i: usize, j: usize, present: bool) -> f64 {
        let off = present as u32;
        let (di, dj) = (self.degrees[i] - off, self.degrees[j] - off);
        let mut x = self.edge_theta + self.node_weight[i] + self.node_weight[j] + self.gain(di) + self.gain(dj);
        for &(a, th) in &self.match_terms {
            if self.attrs.code(a, i) == self.attrs.code(a, j) {
                x += th;
            }
        }
        x
    }

    /// Log-odds of the edge (i, j) given the rest of the current graph.
    pub fn log_odds(&self, i: usize, j: usize) -> Result<f64> {
        super::terms::check_dyad(self.n, i, j)?;
        let (i, j) = (i.min(j), i.max(j));
        Ok(self.add_log_odds(i, j, self.store.contains(i, j)))
    }

    /// Toggles (i, j) unconditionally and keeps statistics in sync.
    pub fn toggle(&mut self, i: usize, j: usize) -> Result<()> {
        super::terms::check_dyad(self.n, i, j)?;
        let (i, j) = (i.min(j), i.max(j));
        let present = self.store.contains(i, j);
        self.apply(i, j, present);
        Ok(())
    }

    fn apply(&mut self, i: usize, j: usize, present: bool) {
        let off = present as u32;
        let (di, dj) = (self.degrees[i] - off, self.degrees[j] - off);
        let sign = if present { -1.0 } else { 1.0 };
        for (s, t) in self.stats.iter_mut().zip(&self.resolved) {
            *s += sign * t.change(self.attrs, i, j, di, dj);
        }
        self.store.toggle(i, j);
        if present {
            self.degrees[i] -= 1;
            self.degrees[j] -= 1;
        } else {
            self.degrees[i] += 1;
            self.degrees[j] += 1;
        }
        self.accepted += 1;
    }

    #[inline]
    pub fn step(&mut self) {
        let n = self.n;
        let a = self.rng.random_range(0..n);
        let mut b = self.rng.random_range(0..n - 1);
        if b >= a {
            b += 1;
        }
        let (i, j) = (a.min(b), a.max(b));
        let present = self.store.contains(i, j);
        let x = self.add_log_odds(i, j, present);
        let log_ratio = if present { -x } else { x };
        self.proposals += 1;
        if log_ratio >= 0.0 || self.rng.random::<f64>() < log_ratio.exp() {
            self.apply(i, j, present);
        }
    }

    pub fn run(&mut self, proposals: u64) {
        for _ in 0..proposals {
            self.step();
        }
    }

    /// Current sufficient statistics.
    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    pub fn edge_count(&self) -> usize {
        self.degrees.iter().map(|&d| d as usize).sum::<usize>() / 2
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposals == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposals as f64
        }
    }

    pub fn to_network(&self) -> AttributedNetwork {
        AttributedNetwork::from_sorted_unchecked(self.attrs.clone(), self.store.sorted_edges())
    }
}

/// One network drawn after `ctl.burn_in` proposals from the empty graph.
pub fn simulate(model: &ErgmModel, attrs: &NodeAttributes, ctl: &SimulationControl) -> Result<AttributedNetwork> {
    ctl.validate()?;
    let mut chain = Chain::new(model, attrs, ctl.rng_seed)?;
    chain.run(ctl.burn_in);
    Ok(chain.to_network())
}

/// Statistic vectors of `draws` states taken every `ctl.thin` proposals after burn-in.
pub fn simulate_draws(
    model: &ErgmModel,
    attrs: &NodeAttributes,
    ctl: &SimulationControl,
    draws: usize,
) -> Result<Vec<Vec<f64>>> {
    ctl.validate()?;
    let mut chain = Chain::new(model, attrs, ctl.rng_seed)?;
    chain.run(ctl.burn_in);
    let mut out = Vec::with_capacity(draws);
    for _ in 0..draws {
        chain.run(ctl.thin);
        out.push(chain.stats().to_vec());
    }
    Ok(out)
}
