//! Reference scenario: the Nashville network model, its attribute margins, and
//! the population counts used for calibration runs.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::ergm::{ErgmModel, ErgmTerm, SimulationControl};
use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, Group, NodeAttributeSchema, NodeAttributes};
use crate::rng::task_rng;

/// Unsheltered nodes in the reference simulated network.
pub const REFERENCE_UNSHELTERED: usize = 597;
/// Sheltered nodes in the reference simulated network.
pub const REFERENCE_SHELTERED: usize = 1438;
/// Administrative sheltered count plugged into the Nashville total.
pub const NASHVILLE_SHELTER_COUNT: u64 = 1225;
/// Visual unsheltered count for the same year.
pub const NASHVILLE_PIT_UNSHELTERED: u64 = 584;

/// Model fit to the Nashville egocentric survey: population offset, edges,
/// degree 2–6, node factors for season, race and gender, gender homophily.
pub fn nashville_model() -> ErgmModel {
    let nf = |attr: &str, level: &str| ErgmTerm::NodeFactor {
        attr: attr.into(),
        level: level.into(),
    };
    let mut terms = vec![ErgmTerm::OffsetEdges, ErgmTerm::Edges];
    let mut theta = vec![-6.342, 2.037];
    for (k, th) in [(2, 0.338), (3, 0.117), (4, 0.854), (5, 1.300), (6, 1.239)] {
        terms.push(ErgmTerm::Degree { k });
        theta.push(th);
    }
    for (attr, level, th) in [
        ("season", "Fall", -0.881),
        ("season", "Winter", -0.867),
        ("season", "Spring", -0.804),
        ("race", "Black", -0.016),
        ("race", "LatinX", -0.731),
        ("race", "Asian", 0.308),
        ("race", "AIAN", -0.202),
        ("race", "NHPI", -0.552),
        ("gender", "Male", 0.277),
    ] {
        terms.push(nf(attr, level));
        theta.push(th);
    }
    terms.push(ErgmTerm::NodeMatch { attr: "gender".into() });
    theta.push(-0.423);
    ErgmModel::new(terms, theta).expect("reference model is well formed")
}

/// Level proportions of one attribute within each group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeMargin {
    pub attr: String,
    pub levels: Vec<String>,
    /// `by_group[g][l]`: share of group g at level l.
    pub by_group: [Vec<f64>; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub attributes: Vec<AttributeMargin>,
}

impl Margins {
    /// Gender and age splits of the 2020 Nashville count by shelter status;
    /// season and race uniform across their levels.
    pub fn nashville() -> Self {
        let uniform = |attr: &str, levels: &[&str]| {
            let p = vec![1.0 / levels.len() as f64; levels.len()];
            AttributeMargin {
                attr: attr.into(),
                levels: levels.iter().map(|s| s.to_string()).collect(),
                by_group: [p.clone(), p],
            }
        };
        Margins {
            attributes: vec![
                AttributeMargin {
                    attr: "gender".into(),
                    levels: vec!["Female".into(), "Male".into()],
                    by_group: [vec![0.233, 0.767], vec![0.275, 0.725]],
                },
                uniform("race", &["White", "Black", "LatinX", "Asian", "AIAN", "NHPI"]),
                AttributeMargin {
                    attr: "age_band".into(),
                    levels: vec!["over24".into(), "18-24".into()],
                    by_group: [vec![0.971, 0.029], vec![0.924, 0.076]],
                },
                uniform("season", &["Summer", "Fall", "Winter", "Spring"]),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.attributes {
            for g in &m.by_group {
                if g.len() != m.levels.len() {
                    return Err(Error::input(format!("margin `{}` has mismatched level count", m.attr)));
                }
                if g.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(Error::input(format!(
                        "margin `{}` has a proportion outside [0, 1]",
                        m.attr
                    )));
                }
                let s: f64 = g.iter().sum();
                if (s - 1.0).abs() > 1e-6 {
                    return Err(Error::input(format!("margin `{}` sums to {s}, not 1", m.attr)));
                }
            }
        }
        Ok(())
    }

    /// `attribute,level,unsheltered,sheltered`, one row per level.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let mut attributes: Vec<AttributeMargin> = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let row = k + 2;
            let err = |message: String| Error::Schema {
                path: path.to_path_buf(),
                row,
                message,
            };
            if rec.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", rec.len())));
            }
            let p = |c: usize| -> Result<f64> {
                rec[c]
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("`{}` is not a proportion", &rec[c])))
            };
            let (pu, ps) = (p(2)?, p(3)?);
            let attr = rec[0].trim();
            let pos = match attributes.iter().position(|m| m.attr == attr) {
                Some(pos) => pos,
                None => {
                    attributes.push(AttributeMargin {
                        attr: attr.to_string(),
                        levels: Vec::new(),
                        by_group: [Vec::new(), Vec::new()],
                    });
                    attributes.len() - 1
                }
            };
            let m = &mut attributes[pos];
            m.levels.push(rec[1].trim().to_string());
            m.by_group[0].push(pu);
            m.by_group[1].push(ps);
        }
        let out = Margins { attributes };
        out.validate().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Ok(out)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["attribute", "level", "unsheltered", "sheltered"])?;
        for m in &self.attributes {
            for (l, level) in m.levels.iter().enumerate() {
                w.write_record([
                    m.attr.clone(),
                    level.clone(),
                    m.by_group[0][l].to_string(),
                    m.by_group[1][l].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Largest-remainder allocation of `n` items to shares `p`.
fn allocate(n: usize, p: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = p.iter().map(|x| x * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - counts.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| {
        (raw[b] - raw[b].floor())
            .total_cmp(&(raw[a] - raw[a].floor()))
            .then(a.cmp(&b))
    });
    for &k in order.iter().cycle().take(p.len() * 2) {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Node attributes with exactly `counts[g]` nodes per group and, within each
/// group, level counts allocated from the margins; node order is shuffled.
pub fn nashville_attributes(margins: &Margins, counts: [usize; 2], seed: u64) -> Result<NodeAttributes> {
    margins.validate()?;
    let n = counts[0] + counts[1];
    if n == 0 {
        return Err(Error::input("population must have at least one node"));
    }
    let mut schema = NodeAttributeSchema::group_only();
    let defaults = NodeAttributeSchema::homelessness();
    for m in &margins.attributes {
        match defaults.index_of(&m.attr) {
            Some(a) => {
                let spec = defaults.spec(a);
                let mut levels = spec.levels.clone();
                for l in &m.levels {
                    if !levels.contains(l) {
                        levels.push(l.clone());
                    }
                }
                schema.push_attribute(&m.attr, levels, &spec.levels[spec.reference])?;
            }
            None => schema.push_attribute(&m.attr, m.levels.clone(), &m.levels[0])?,
        }
    }

    let mut rng = task_rng(seed, &[0xA77]);
    let mut codes: Vec<Vec<u16>> = vec![Vec::with_capacity(n); schema.len()];
    for g in Group::BOTH {
        let ng = counts[g.index()];
        codes[0].extend(std::iter::repeat_n(g.index() as u16, ng));
        for (a, m) in margins.attributes.iter().enumerate() {
            let alloc = allocate(ng, &m.by_group[g.index()]);
            let mut col = Vec::with_capacity(ng);
            for (l, &c) in alloc.iter().enumerate() {
                let code = schema.level_index(a + 1, &m.levels[l]).expect("level registered");
                col.extend(std::iter::repeat_n(code, c));
            }
            col.shuffle(&mut rng);
            codes[a + 1].extend(col);
        }
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let codes = codes.iter().map(|col| perm.iter().map(|&p| col[p]).collect()).collect();
    NodeAttributes::new(schema, codes)
}

/// Simulation control used for reference networks: ten sweeps of burn-in.
pub fn reference_control(n: usize, seed: u64) -> SimulationControl {
    SimulationControl::for_nodes(n, seed)
}

/// One reference network (597 unsheltered, 1,438 sheltered) from the Nashville model.
pub fn reference_network(seed: u64) -> Result<AttributedNetwork> {
    let attrs = nashville_attributes(
        &Margins::nashville(),
        [REFERENCE_UNSHELTERED, REFERENCE_SHELTERED],
        seed,
    )?;
    let ctl = reference_control(attrs.len(), crate::rng::derive_seed(seed, &[0xE96]));
    crate::ergm::simulate(&nashville_model(), &attrs, &ctl)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn allocation_is_exact() {
        assert_eq!(allocate(10, &[0.5, 0.5]), vec![5, 5]);
        assert_eq!(allocate(597, &[0.233, 0.767]).iter().sum::<usize>(), 597);
        assert_eq!(allocate(7, &[1.0 / 3.0; 3]).iter().sum::<usize>(), 7);
        assert_eq!(allocate(0, &[0.2, 0.8]), vec![0, 0]);
    }

    #[test]
    fn attributes_follow_margins() {
        let attrs = nashville_attributes(&Margins::nashville(), [597, 1438], 11).unwrap();
        assert_eq!(attrs.len(), 2035);
        let g = attrs.schema().require("gender").unwrap();
        let female_unsheltered = (0..attrs.len())
            .filter(|&i| attrs.group(i) == Group::A && attrs.code(g, i) == 0)
            .count();
        assert_eq!(female_unsheltered, 139); // round(0.233 * 597)
        let groups = (0..attrs.len()).filter(|&i| attrs.group(i) == Group::A).count();
        assert_eq!(groups, 597);
    }

    #[test]
    fn nashville_model_has_expected_terms() {
        let m = nashville_model();
        assert_eq!(m.terms.len(), 17);
        assert_eq!(m.free_indices().len(), 16);
        assert_eq!(m.theta[0], -6.342);
        assert!(m.check_schema(&NodeAttributeSchema::homelessness()).is_ok());
    }

    #[test]
    fn margins_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        Margins::nashville().write_csv(&p).unwrap();
        assert_eq!(Margins::read_csv(&p).unwrap(), Margins::nashville());
        std::fs::write(
            &p,
            "attribute,level,unsheltered,sheltered\ngender,Female,0.5,0.2\ngender,Male,0.5,0.2\n",
        )
        .unwrap();
        assert!(Margins::read_csv(&p).is_err());
    }
}
