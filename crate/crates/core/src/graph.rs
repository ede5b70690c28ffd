//! Attributed undirected networks.
//!
//! Nodes are dense ids `0..N`. Every node carries one categorical level per
//! declared attribute; the `group` attribute (unsheltered / sheltered) is always
//! present and always declared first.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GROUP_ATTR: &str = "group";

/// The two sub-populations of the two-group estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    /// Unsheltered: the group whose size is unknown.
    #[serde(rename = "unsheltered")]
    A,
    /// Sheltered: the group counted administratively.
    #[serde(rename = "sheltered")]
    B,
}

impl Group {
    pub const BOTH: [Group; 2] = [Group::A, Group::B];

    pub fn index(self) -> usize {
        match self {
            Group::A => 0,
            Group::B => 1,
        }
    }

    pub fn from_index(i: usize) -> Group {
        if i == 0 {
            Group::A
        } else {
            Group::B
        }
    }

    pub fn other(self) -> Group {
        match self {
            Group::A => Group::B,
            Group::B => Group::A,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Group::A => "unsheltered",
            Group::B => "sheltered",
        }
    }

    /// Accepts `unsheltered`/`sheltered` as well as the short forms `A`/`B`.
    pub fn parse(s: &str) -> Option<Group> {
        match s.trim() {
            "A" | "a" | "unsheltered" | "Unsheltered" => Some(Group::A),
            "B" | "b" | "sheltered" | "Sheltered" => Some(Group::B),
            _ => None,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub levels: Vec<String>,
    pub reference: usize,
}

/// Attribute name → ordered levels with one reference level.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeAttributeSchema {
    attrs: Vec<AttributeSpec>,
}

impl Default for NodeAttributeSchema {
    fn default() -> Self {
        Self::group_only()
    }
}

impl NodeAttributeSchema {
    /// Schema holding only the mandatory `group` attribute.
    pub fn group_only() -> Self {
        NodeAttributeSchema {
            attrs: vec![AttributeSpec {
                name: GROUP_ATTR.to_string(),
                levels: vec![Group::A.label().into(), Group::B.label().into()],
                reference: Group::A.index(),
            }],
        }
    }

    /// `group` plus the gender, race, age band and season factors with their
    /// conventional reference levels.
    pub fn homelessness() -> Self {
        let mut s = Self::group_only();
        for (name, levels, reference) in default_levels() {
            s.attrs.push(AttributeSpec {
                name: name.to_string(),
                levels: levels.iter().map(|l| l.to_string()).collect(),
                reference,
            });
        }
        s
    }

    pub fn with_attribute(mut self, name: &str, levels: &[&str], reference: &str) -> Result<Self> {
        self.push_attribute(name, levels.iter().map(|l| l.to_string()).collect(), reference)?;
        Ok(self)
    }

    pub fn push_attribute(&mut self, name: &str, levels: Vec<String>, reference: &str) -> Result<()> {
        if self.index_of(name).is_some() {
            return Err(Error::input(format!("attribute `{name}` declared twice")));
        }
        let uniq: FxHashSet<&String> = levels.iter().collect();
        if uniq.len() != levels.len() {
            return Err(Error::input(format!("attribute `{name}` has duplicate levels")));
        }
        if levels.len() > u16::MAX as usize {
            return Err(Error::input(format!("attribute `{name}` has too many levels")));
        }
        let reference = levels
            .iter()
            .position(|l| l == reference)
            .ok_or_else(|| Error::input(format!("reference level `{reference}` not among levels of `{name}`")))?;
        self.attrs.push(AttributeSpec {
            name: name.to_string(),
            levels,
            reference,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attrs
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attrs.iter().position(|a| a.name == name)
    }

    pub fn spec(&self, attr: usize) -> &AttributeSpec {
        &self.attrs[attr]
    }

    pub fn level_index(&self, attr: usize, level: &str) -> Option<u16> {
        self.attrs[attr]
            .levels
            .iter()
            .position(|l| l == level)
            .map(|i| i as u16)
    }

    /// Attribute index and level code, or an input error naming what is missing.
    pub fn resolve(&self, name: &str, level: &str) -> Result<(usize, u16)> {
        let a = self.require(name)?;
        let l = self
            .level_index(a, level)
            .ok_or_else(|| Error::input(format!("unknown level `{level}` for attribute `{name}`")))?;
        Ok((a, l))
    }

    pub fn require(&self, name: &str) -> Result<usize> {
        self.index_of(name)
            .ok_or_else(|| Error::input(format!("unknown attribute `{name}`")))
    }

    /// Adds an attribute whose levels are discovered from data; the first one seen is the reference.
    pub(crate) fn push_open_attribute(&mut self, name: &str) {
        self.attrs.push(AttributeSpec {
            name: name.to_string(),
            levels: Vec::new(),
            reference: 0,
        });
    }

    pub(crate) fn level_or_push(&mut self, attr: usize, level: &str) -> u16 {
        match self.level_index(attr, level) {
            Some(i) => i,
            None => {
                self.attrs[attr].levels.push(level.to_string());
                (self.attrs[attr].levels.len() - 1) as u16
            }
        }
    }
}

fn default_levels() -> [(&'static str, &'static [&'static str], usize); 4] {
    [
        ("gender", &["Female", "Male"], 0),
        ("race", &["White", "Black", "LatinX", "Asian", "AIAN", "NHPI"], 0),
        ("age_band", &["over24", "18-24"], 0),
        ("season", &["Summer", "Fall", "Winter", "Spring"], 0),
    ]
}

/// Per-node level codes for every attribute in a schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeAttributes {
    schema: NodeAttributeSchema,
    /// `codes[attr][node]`
    codes: Vec<Vec<u16>>,
}

impl NodeAttributes {
    pub fn new(schema: NodeAttributeSchema, codes: Vec<Vec<u16>>) -> Result<Self> {
        if schema.index_of(GROUP_ATTR) != Some(0) {
            return Err(Error::input("schema must declare `group` as its first attribute"));
        }
        if codes.len() != schema.len() {
            return Err(Error::input(format!(
                "{} attribute columns for {} declared attributes",
                codes.len(),
                schema.len()
            )));
        }
        let n = codes[0].len();
        for (a, col) in codes.iter().enumerate() {
            let spec = schema.spec(a);
            if col.len() != n {
                return Err(Error::input(format!(
                    "attribute `{}` has {} values, expected {n}",
                    spec.name,
                    col.len()
                )));
            }
            if let Some(bad) = col.iter().find(|&&c| c as usize >= spec.levels.len()) {
                return Err(Error::input(format!(
                    "attribute `{}` has out-of-range code {bad}",
                    spec.name
                )));
            }
        }
        Ok(NodeAttributes { schema, codes })
    }

    /// All `n` nodes assigned from a group vector; other attributes at their reference level.
    pub fn from_groups(schema: NodeAttributeSchema, groups: &[Group]) -> Result<Self> {
        let mut codes: Vec<Vec<u16>> = schema
            .attributes()
            .iter()
            .map(|s| vec![s.reference as u16; groups.len()])
            .collect();
        if codes.is_empty() {
            return Err(Error::input("schema must declare `group`"));
        }
        codes[0] = groups.iter().map(|g| g.index() as u16).collect();
        Self::new(schema, codes)
    }

    pub fn len(&self) -> usize {
        self.codes[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn schema(&self) -> &NodeAttributeSchema {
        &self.schema
    }

    pub fn group(&self, node: usize) -> Group {
        Group::from_index(self.codes[0][node] as usize)
    }

    pub fn code(&self, attr: usize, node: usize) -> u16 {
        self.codes[attr][node]
    }

    pub fn column(&self, attr: usize) -> &[u16] {
        &self.codes[attr]
    }

    pub fn level(&self, attr: usize, node: usize) -> &str {
        &self.schema.spec(attr).levels[self.codes[attr][node] as usize]
    }

    /// All codes of one node, in schema order.
    pub fn row(&self, node: usize) -> Vec<u16> {
        self.codes.iter().map(|c| c[node]).collect()
    }

    pub fn set_code(&mut self, attr: usize, node: usize, code: u16) -> Result<()> {
        if code as usize >= self.schema.spec(attr).levels.len() {
            return Err(Error::input("level code out of range"));
        }
        self.codes[attr][node] = code;
        Ok(())
    }
}

/// Immutable undirected simple graph with node attributes and a degree cache.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttributedNetwork {
    attrs: NodeAttributes,
    /// Sorted, each pair stored as `(lo, hi)` with `lo < hi`.
    edges: Vec<(u32, u32)>,
    adjacency: Vec<Vec<u32>>,
}

impl AttributedNetwork {
    pub fn new(attrs: NodeAttributes, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let n = attrs.len();
        if n == 0 {
            return Err(Error::input("network must have at least one node"));
        }
        if n > u32::MAX as usize {
            return Err(Error::input("too many nodes"));
        }
        let mut list = Vec::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::input(format!("edge ({i}, {j}) has an endpoint outside 0..{n}")));
            }
            if i == j {
                return Err(Error::input(format!("self-loop on node {i}")));
            }
            list.push((i.min(j) as u32, i.max(j) as u32));
        }
        list.sort_unstable();
        if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::input(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self::from_sorted_unchecked(attrs, list))
    }

    pub(crate) fn from_sorted_unchecked(attrs: NodeAttributes, edges: Vec<(u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); attrs.len()];
        for &(i, j) in &edges {
            adjacency[i as usize].push(j);
            adjacency[j as usize].push(i);
        }
        for nb in &mut adjacency {
            nb.sort_unstable();
        }
        AttributedNetwork {
            attrs,
            edges,
            adjacency,
        }
    }

    pub fn node_count(&self) -> usize {
        self.attrs.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn attributes(&self) -> &NodeAttributes {
        &self.attrs
    }

    pub fn schema(&self) -> &NodeAttributeSchema {
        self.attrs.schema()
    }

    pub fn group(&self, node: usize) -> Group {
        self.attrs.group(node)
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adjacency[node]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.node_count() && self.adjacency[i].binary_search(&(j as u32)).is_ok()
    }

    pub fn degree(&self, node: usize) -> Result<usize> {
        self.adjacency
            .get(node)
            .map(Vec::len)
            .ok_or_else(|| Error::input(format!("node {node} out of range 0..{}", self.node_count())))
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// Nodes of degree zero. They are valid members of the population but can
    /// never be reached by link tracing.
    pub fn isolates(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&i| self.adjacency[i].is_empty())
            .collect()
    }

    /// Count of nodes at each level of `attr`, including zero counts.
    pub fn subgroup_counts(&self, attr: &str) -> Result<BTreeMap<String, usize>> {
        let a = self.schema().require(attr)?;
        let spec = self.schema().spec(a);
        let mut counts = vec![0usize; spec.levels.len()];
        for &c in self.attrs.column(a) {
            counts[c as usize] += 1;
        }
        Ok(spec.levels.iter().cloned().zip(counts).collect())
    }

    pub fn group_sizes(&self) -> [usize; 2] {
        let mut out = [0; 2];
        for &c in self.attrs.column(0) {
            out[c as usize] += 1;
        }
        out
    }

    /// Number of edges joining an unsheltered node to a sheltered one.
    pub fn cross_tie_total(&self) -> usize {
        let g = self.attrs.column(0);
        self.edges
            .iter()
            .filter(|&&(i, j)| g[i as usize] != g[j as usize])
            .count()
    }

    /// True when every node can reach every other node.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.adjacency[v] {
                let w = w as usize;
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == n
    }

    pub fn write_csv(&self, edges_path: &Path, nodes_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(edges_path)?;
        w.write_record(["src", "dst"])?;
        for &(i, j) in &self.edges {
            w.write_record([i.to_string(), j.to_string()])?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(nodes_path)?;
        let schema = self.schema();
        let mut header = vec!["id".to_string()];
        header.extend(schema.attributes().iter().map(|a| a.name.clone()));
        w.write_record(&header)?;
        for i in 0..self.node_count() {
            let mut row = vec![i.to_string()];
            row.extend((0..schema.len()).map(|a| self.attrs.level(a, i).to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a node-attribute CSV (`id,group,...`) and an edge-list CSV (`src,dst`).
    ///
    /// Node ids may be any distinct integers; they are mapped to dense ids in file order.
    pub fn read_csv(edges_path: &Path, nodes_path: &Path) -> Result<Self> {
        let attrs_and_ids = read_nodes_csv(nodes_path)?;
        let (attrs, ids) = attrs_and_ids;
        let index: rustc_hash::FxHashMap<i64, usize> = ids.iter().enumerate().map(|(k, &id)| (id, k)).collect();

        let mut rdr = csv::Reader::from_path(edges_path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Schema {
                    path: edges_path.to_path_buf(),
                    row: 1,
                    message: format!("missing `{name}` column"),
                })
        };
        let (cs, cd) = (col("src")?, col("dst")?);
        let mut edges = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 2;
            let parse = |c: usize| -> Result<usize> {
                let raw = rec.get(c).unwrap_or("").trim();
                let id: i64 = raw.parse().map_err(|_| Error::Schema {
                    path: edges_path.to_path_buf(),
                    row,
                    message: format!("`{raw}` is not an integer node id"),
                })?;
                index.get(&id).copied().ok_or_else(|| Error::Schema {
                    path: edges_path.to_path_buf(),
                    row,
                    message: format!("node id {id} not present in the node file"),
                })
            };
            edges.push((parse(cs)?, parse(cd)?));
        }
        AttributedNetwork::new(attrs, edges).map_err(|e| Error::Config {
            path: edges_path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

fn read_nodes_csv(path: &Path) -> Result<(NodeAttributes, Vec<i64>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let schema_err = |row: usize, message: String| Error::Schema {
        path: path.to_path_buf(),
        row,
        message,
    };
    let id_col = headers
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| schema_err(1, "missing `id` column".into()))?;
    let group_col = headers
        .iter()
        .position(|h| h == GROUP_ATTR)
        .ok_or_else(|| schema_err(1, "missing `group` column".into()))?;

    let mut schema = NodeAttributeSchema::group_only();
    let defaults = NodeAttributeSchema::homelessness();
    let mut attr_cols = Vec::new();
    for (c, h) in headers.iter().enumerate() {
        if c == id_col || c == group_col || h.is_empty() {
            continue;
        }
        match defaults.index_of(h) {
            Some(a) => {
                let spec = defaults.spec(a);
                schema.push_attribute(h, spec.levels.clone(), &spec.levels[spec.reference])?;
            }
            None => schema.push_open_attribute(h),
        }
        attr_cols.push(c);
    }

    let mut ids = Vec::new();
    let mut codes: Vec<Vec<u16>> = vec![Vec::new(); schema.len()];
    let mut seen = FxHashSet::default();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = k + 2;
        let raw_id = rec.get(id_col).unwrap_or("").trim();
        let id: i64 = raw_id
            .parse()
            .map_err(|_| schema_err(row, format!("`{raw_id}` is not an integer id")))?;
        if !seen.insert(id) {
            return Err(schema_err(row, format!("duplicate node id {id}")));
        }
        ids.push(id);
        let raw_g = rec.get(group_col).unwrap_or("");
        let g = Group::parse(raw_g)
            .ok_or_else(|| schema_err(row, format!("group `{raw_g}` is not unsheltered/sheltered")))?;
        codes[0].push(g.index() as u16);
        for (a, &c) in attr_cols.iter().enumerate() {
            let v = rec.get(c).unwrap_or("").trim();
            if v.is_empty() {
                return Err(schema_err(row, format!("missing value for `{}`", headers[c])));
            }
            codes[a + 1].push(schema.level_or_push(a + 1, v));
        }
    }
    if ids.is_empty() {
        return Err(schema_err(1, "node file has no rows".into()));
    }
    Ok((NodeAttributes::new(schema, codes)?, ids))
}
