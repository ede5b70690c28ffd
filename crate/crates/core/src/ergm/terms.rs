use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, NodeAttributeSchema, NodeAttributes};

/// One model statistic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ErgmTerm {
    /// Edge count.
    #[serde(rename = "edges")]
    Edges,
    /// Number of nodes with degree exactly `k`.
    #[serde(rename = "degree")]
    Degree { k: u32 },
    /// Number of edge endpoints whose `attr` equals `level`.
    #[serde(rename = "nodefactor")]
    NodeFactor { attr: String, level: String },
    /// Number of edges whose endpoints share the value of `attr`.
    #[serde(rename = "nodematch")]
    NodeMatch { attr: String },
    /// Edge count carrying a fixed, never-fitted coefficient (population-size offset).
    #[serde(rename = "offset_edges")]
    OffsetEdges,
}

impl ErgmTerm {
    pub fn is_offset(&self) -> bool {
        matches!(self, ErgmTerm::OffsetEdges)
    }

    pub fn label(&self) -> String {
        match self {
            ErgmTerm::Edges => "edges".into(),
            ErgmTerm::Degree { k } => format!("degree{k}"),
            ErgmTerm::NodeFactor { attr, level } => format!("nodefactor.{attr}.{level}"),
            ErgmTerm::NodeMatch { attr } => format!("nodematch.{attr}"),
            ErgmTerm::OffsetEdges => "offset(edges)".into(),
        }
    }

    pub(crate) fn resolve(&self, schema: &NodeAttributeSchema) -> Result<ResolvedTerm> {
        Ok(match self {
            ErgmTerm::Edges | ErgmTerm::OffsetEdges => ResolvedTerm::Edges,
            ErgmTerm::Degree { k } => {
                if *k < 1 {
                    return Err(Error::input("degree term requires k >= 1"));
                }
                ResolvedTerm::Degree(*k)
            }
            ErgmTerm::NodeFactor { attr, level } => {
                let (a, l) = schema.resolve(attr, level)?;
                ResolvedTerm::NodeFactor(a, l)
            }
            ErgmTerm::NodeMatch { attr } => ResolvedTerm::NodeMatch(schema.require(attr)?),
        })
    }
}

/// A term bound to attribute indices of a concrete schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ResolvedTerm {
    Edges,
    Degree(u32),
    NodeFactor(usize, u16),
    NodeMatch(usize),
}

impl ResolvedTerm {
    /// s(g + ij) − s(g − ij) given the endpoint degrees in g − ij.
    #[inline]
    pub(crate) fn change(self, attrs: &NodeAttributes, i: usize, j: usize, deg_i: u32, deg_j: u32) -> f64 {
        match self {
            ResolvedTerm::Edges => 1.0,
            ResolvedTerm::Degree(k) => {
                let step = |d: u32| (d + 1 == k) as i32 - (d == k) as i32;
                (step(deg_i) + step(deg_j)) as f64
            }
            ResolvedTerm::NodeFactor(a, l) => ((attrs.code(a, i) == l) as u32 + (attrs.code(a, j) == l) as u32) as f64,
            ResolvedTerm::NodeMatch(a) => (attrs.code(a, i) == attrs.code(a, j)) as u32 as f64,
        }
    }
}

pub(crate) fn resolve_all(terms: &[ErgmTerm], schema: &NodeAttributeSchema) -> Result<Vec<ResolvedTerm>> {
    terms.iter().map(|t| t.resolve(schema)).collect()
}

/// Sufficient statistic vector s(g), one entry per term.
pub fn sufficient_stats(net: &AttributedNetwork, terms: &[ErgmTerm]) -> Result<Vec<f64>> {
    let resolved = resolve_all(terms, net.schema())?;
    let attrs = net.attributes();
    let degrees = net.degrees();
    Ok(resolved
        .iter()
        .map(|t| match *t {
            ResolvedTerm::Edges => net.edge_count() as f64,
            ResolvedTerm::Degree(k) => degrees.iter().filter(|&&d| d == k as usize).count() as f64,
            ResolvedTerm::NodeFactor(a, l) => net
                .edges()
                .iter()
                .map(|&(i, j)| (attrs.code(a, i as usize) == l) as usize + (attrs.code(a, j as usize) == l) as usize)
                .sum::<usize>() as f64,
            ResolvedTerm::NodeMatch(a) => net
                .edges()
                .iter()
                .filter(|&&(i, j)| attrs.code(a, i as usize) == attrs.code(a, j as usize))
                .count() as f64,
        })
        .collect())
}

/// Per-term change statistics for toggling dyad (i, j) on `net`.
pub fn change_stats(net: &AttributedNetwork, terms: &[ErgmTerm], i: usize, j: usize) -> Result<Vec<f64>> {
    check_dyad(net.node_count(), i, j)?;
    let resolved = resolve_all(terms, net.schema())?;
    let present = net.has_edge(i, j) as u32;
    let di = net.degree(i)? as u32 - present;
    let dj = net.degree(j)? as u32 - present;
    Ok(resolved
        .iter()
        .map(|t| t.change(net.attributes(), i, j, di, dj))
        .collect())
}

pub(crate) fn check_dyad(n: usize, i: usize, j: usize) -> Result<()> {
    if i == j {
        return Err(Error::input(format!("dyad ({i}, {j}) is a self-loop")));
    }
    if i >= n || j >= n {
        return Err(Error::input(format!("dyad ({i}, {j}) outside 0..{n}")));
    }
    Ok(())
}
