//! Respondent-driven sampling: recruitment simulation and sample records.

use std::path::Path;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::{IndexedRandom, SliceRandom};
use rand_distr::LogNormal;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AttributedNetwork, Group, NodeAttributeSchema};
use crate::rng::rng_from_seed;

/// One interviewed person.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RdsRespondent {
    pub id: u64,
    /// `None` for seeds.
    pub recruiter: Option<u64>,
    pub wave: u32,
    pub reported_degree: u32,
    /// Level codes in the sample schema's order; index 0 is `group`.
    pub attrs: Arc<[u16]>,
}

impl RdsRespondent {
    pub fn group(&self) -> Group {
        Group::from_index(self.attrs[0] as usize)
    }

    pub fn is_seed(&self) -> bool {
        self.recruiter.is_none()
    }
}

/// An ordered recruitment forest. Recruiters always precede their recruits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RdsSample {
    respondents: Vec<RdsRespondent>,
    schema: Arc<NodeAttributeSchema>,
    coupon_limit: u32,
    /// `parent[k]`: position of respondent k's recruiter.
    parent: Vec<Option<usize>>,
    shortfall: bool,
}

impl RdsSample {
    /// Validates and builds a sample. Checks unique ids, recruiter ordering,
    /// wave consistency, the coupon limit, degrees ≥ 1 and attribute codes.
    pub fn new(respondents: Vec<RdsRespondent>, schema: Arc<NodeAttributeSchema>, coupon_limit: u32) -> Result<Self> {
        if respondents.is_empty() {
            return Err(Error::input("empty sample"));
        }
        if coupon_limit == 0 {
            return Err(Error::input("coupon limit must be at least 1"));
        }
        if schema.index_of(crate::graph::GROUP_ATTR) != Some(0) {
            return Err(Error::input("sample schema must declare `group` first"));
        }
        let mut pos: FxHashMap<u64, usize> = FxHashMap::default();
        let mut parent = Vec::with_capacity(respondents.len());
        let mut recruits = vec![0u32; respondents.len()];
        for (k, r) in respondents.iter().enumerate() {
            if pos.insert(r.id, k).is_some() {
                return Err(Error::input(format!("respondent id {} appears twice", r.id)));
            }
            if r.reported_degree == 0 {
                return Err(Error::input(format!("respondent {} reports degree 0", r.id)));
            }
            if r.attrs.len() != schema.len() {
                return Err(Error::input(format!(
                    "respondent {} has {} attributes, expected {}",
                    r.id,
                    r.attrs.len(),
                    schema.len()
                )));
            }
            for (a, &c) in r.attrs.iter().enumerate() {
                if c as usize >= schema.spec(a).levels.len() {
                    return Err(Error::input(format!(
                        "respondent {} has an invalid `{}` code",
                        r.id,
                        schema.spec(a).name
                    )));
                }
            }
            match r.recruiter {
                None => {
                    if r.wave != 0 {
                        return Err(Error::input(format!("seed {} has wave {}", r.id, r.wave)));
                    }
                    parent.push(None);
                }
                Some(rid) => {
                    let p = *pos.get(&rid).filter(|&&p| p < k).ok_or_else(|| {
                        Error::input(format!("recruiter {rid} of respondent {} does not precede it", r.id))
                    })?;
                    if respondents[p].wave + 1 != r.wave {
                        return Err(Error::input(format!(
                            "respondent {} has wave {} but its recruiter has wave {}",
                            r.id, r.wave, respondents[p].wave
                        )));
                    }
                    recruits[p] += 1;
                    if recruits[p] > coupon_limit {
                        return Err(Error::input(format!(
                            "respondent {rid} recruited more than {coupon_limit}"
                        )));
                    }
                    parent.push(Some(p));
                }
            }
        }
        Ok(RdsSample {
            respondents,
            schema,
            coupon_limit,
            parent,
            shortfall: false,
        })
    }

    /// Builder for internally generated samples that satisfy the invariants by construction.
    pub(crate) fn from_parts_unchecked(
        respondents: Vec<RdsRespondent>,
        schema: Arc<NodeAttributeSchema>,
        coupon_limit: u32,
        parent: Vec<Option<usize>>,
    ) -> Self {
        debug_assert_eq!(respondents.len(), parent.len());
        RdsSample {
            respondents,
            schema,
            coupon_limit,
            parent,
            shortfall: false,
        }
    }

    pub fn respondents(&self) -> &[RdsRespondent] {
        &self.respondents
    }

    pub fn len(&self) -> usize {
        self.respondents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.respondents.is_empty()
    }

    pub fn schema(&self) -> &NodeAttributeSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<NodeAttributeSchema> {
        &self.schema
    }

    pub fn coupon_limit(&self) -> u32 {
        self.coupon_limit
    }

    /// Positions of each respondent's recruiter.
    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    /// True when recruitment died out before reaching the target size.
    pub fn shortfall(&self) -> bool {
        self.shortfall
    }

    pub fn seed_ids(&self) -> Vec<u64> {
        self.respondents.iter().filter(|r| r.is_seed()).map(|r| r.id).collect()
    }

    pub fn max_wave(&self) -> u32 {
        self.respondents.iter().map(|r| r.wave).max().unwrap_or(0)
    }

    /// Positions of each respondent's recruits, in sample order.
    pub fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.len()];
        for (k, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                out[p].push(k);
            }
        }
        out
    }

    /// Overwrites the group of every respondent. Structure is unchanged.
    pub fn relabel_groups(&mut self, mut group_of: impl FnMut(usize, &RdsRespondent) -> Group) {
        for k in 0..self.respondents.len() {
            let g = group_of(k, &self.respondents[k]);
            let r = &mut self.respondents[k];
            if r.group() != g {
                let mut row = r.attrs.to_vec();
                row[0] = g.index() as u16;
                r.attrs = row.into();
            }
        }
    }

    /// A stationary "edge census" of `net`: for every directed tie i→j, one
    /// seed record of i recruiting one record of j.
    ///
    /// Each node appears 2·degree times and each directed tie is traversed
    /// exactly once, which is the equilibrium of the degree-proportional
    /// random walk. Estimators fed this sample see exact population mean
    /// degrees and cross-tie shares.
    pub fn edge_census(net: &AttributedNetwork) -> Result<Self> {
        if net.edge_count() == 0 {
            return Err(Error::input("network has no ties"));
        }
        let schema = Arc::new(net.schema().clone());
        let rows: Vec<Arc<[u16]>> = (0..net.node_count()).map(|i| net.attributes().row(i).into()).collect();
        let mut respondents = Vec::with_capacity(4 * net.edge_count());
        let mut parent = Vec::with_capacity(4 * net.edge_count());
        for &(a, b) in net.edges() {
            for (from, to) in [(a as usize, b as usize), (b as usize, a as usize)] {
                let id = respondents.len() as u64;
                respondents.push(RdsRespondent {
                    id,
                    recruiter: None,
                    wave: 0,
                    reported_degree: net.neighbors(from).len() as u32,
                    attrs: rows[from].clone(),
                });
                parent.push(None);
                respondents.push(RdsRespondent {
                    id: id + 1,
                    recruiter: Some(id),
                    wave: 1,
                    reported_degree: net.neighbors(to).len() as u32,
                    attrs: rows[to].clone(),
                });
                parent.push(Some(id as usize));
            }
        }
        Ok(Self::from_parts_unchecked(respondents, schema, 1, parent))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = ["id", "recruiter_id", "wave", "degree"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(self.schema.attributes().iter().map(|a| a.name.clone()));
        w.write_record(&header)?;
        for r in &self.respondents {
            let mut row = vec![
                r.id.to_string(),
                r.recruiter.map(|x| x.to_string()).unwrap_or_default(),
                r.wave.to_string(),
                r.reported_degree.to_string(),
            ];
            row.extend(
                r.attrs
                    .iter()
                    .enumerate()
                    .map(|(a, &c)| self.schema.spec(a).levels[c as usize].clone()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `id,recruiter_id,wave,degree,group,...` with an empty
    /// `recruiter_id` for seeds. Extra columns become categorical attributes.
    /// Rows may come in any order; they are ordered by wave before validation.
    /// Every invalid row is reported.
    pub fn read_csv(path: &Path, coupon_limit: u32) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let mut missing = Vec::new();
        let mut req = |name: &str| {
            let c = find(name);
            if c.is_none() {
                missing.push((1, format!("missing `{name}` column")));
            }
            c.unwrap_or(0)
        };
        let (c_id, c_rec, c_wave, c_deg, c_group) =
            (req("id"), req("recruiter_id"), req("wave"), req("degree"), req("group"));
        if !missing.is_empty() {
            return Err(Error::Rows {
                path: path.to_path_buf(),
                problems: missing,
            });
        }

        let mut schema = NodeAttributeSchema::group_only();
        let defaults = NodeAttributeSchema::homelessness();
        let mut attr_cols = Vec::new();
        for (c, h) in headers.iter().enumerate() {
            if [c_id, c_rec, c_wave, c_deg, c_group].contains(&c) || h.is_empty() {
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

        let mut problems = Vec::new();
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let row = k + 2;
            let rec = match rec {
                Ok(r) => r,
                Err(e) => {
                    problems.push((row, e.to_string()));
                    continue;
                }
            };
            let field = |c: usize| rec.get(c).unwrap_or("").trim();
            let mut bad = |msg: String| problems.push((row, msg));
            let id = field(c_id).parse::<u64>();
            let recruiter = match field(c_rec) {
                "" | "NA" => Ok(None),
                s => s.parse::<u64>().map(Some),
            };
            let wave = field(c_wave).parse::<u32>();
            let degree = field(c_deg).parse::<u32>();
            let group = Group::parse(field(c_group));
            let (Ok(id), Ok(recruiter), Ok(wave), Ok(degree), Some(group)) = (&id, &recruiter, &wave, &degree, group)
            else {
                if id.is_err() {
                    bad(format!("`{}` is not a respondent id", field(c_id)));
                }
                if recruiter.is_err() {
                    bad(format!("`{}` is not a recruiter id", field(c_rec)));
                }
                if wave.is_err() {
                    bad(format!("`{}` is not a wave number", field(c_wave)));
                }
                if degree.is_err() {
                    bad(format!("`{}` is not a degree", field(c_deg)));
                }
                if group.is_none() {
                    bad(format!("group `{}` is not unsheltered/sheltered", field(c_group)));
                }
                continue;
            };
            if *degree == 0 {
                bad("degree must be at least 1".into());
                continue;
            }
            let mut codes = vec![group.index() as u16];
            let mut ok = true;
            for (a, &c) in attr_cols.iter().enumerate() {
                let v = field(c);
                if v.is_empty() {
                    bad(format!("missing value for `{}`", headers[c]));
                    ok = false;
                } else {
                    codes.push(schema.level_or_push(a + 1, v));
                }
            }
            if ok {
                rows.push((
                    row,
                    RdsRespondent {
                        id: *id,
                        recruiter: *recruiter,
                        wave: *wave,
                        reported_degree: *degree,
                        attrs: codes.into(),
                    },
                ));
            }
        }

        let ids: FxHashSet<u64> = rows.iter().map(|(_, r)| r.id).collect();
        let mut seen = FxHashSet::default();
        for (row, r) in &rows {
            if !seen.insert(r.id) {
                problems.push((*row, format!("duplicate respondent id {}", r.id)));
            }
            match r.recruiter {
                Some(rid) if !ids.contains(&rid) => {
                    problems.push((*row, format!("recruiter {rid} is not in the sample")))
                }
                None if r.wave != 0 => problems.push((*row, format!("seed has wave {}", r.wave))),
                _ => {}
            }
        }
        if !problems.is_empty() {
            problems.sort();
            return Err(Error::Rows {
                path: path.to_path_buf(),
                problems,
            });
        }
        rows.sort_by_key(|(_, r)| r.wave);
        let respondents: Vec<RdsRespondent> = rows.into_iter().map(|(_, r)| r).collect();
        RdsSample::new(respondents, Arc::new(schema), coupon_limit).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// How the initial respondents are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedRule {
    /// Probability proportional to network degree, without replacement.
    DegreeProportional,
    Uniform,
    FixedList(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdsDesign {
    pub n_seeds: usize,
    pub seed_rule: SeedRule,
    pub coupon_limit: u32,
    pub target_n: usize,
    pub rng_seed: u64,
    /// σ of multiplicative log-normal error on reported degree (mean-preserving); `None` reports true degree.
    #[serde(default)]
    pub degree_noise_sd: Option<f64>,
}

impl RdsDesign {
    pub fn new(n_seeds: usize, target_n: usize, rng_seed: u64) -> Self {
        RdsDesign {
            n_seeds,
            seed_rule: SeedRule::DegreeProportional,
            coupon_limit: 3,
            target_n,
            rng_seed,
            degree_noise_sd: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_seeds == 0 {
            return Err(Error::input("at least one seed is required"));
        }
        if self.target_n < self.n_seeds {
            return Err(Error::input("target sample size is smaller than the number of seeds"));
        }
        if self.coupon_limit == 0 {
            return Err(Error::input("coupon limit must be at least 1"));
        }
        if let SeedRule::FixedList(ids) = &self.seed_rule {
            if ids.len() != self.n_seeds {
                return Err(Error::input("fixed seed list length must equal n_seeds"));
            }
        }
        if let Some(sd) = self.degree_noise_sd {
            if !(sd.is_finite() && sd >= 0.0) {
                return Err(Error::input("degree noise sd must be finite and non-negative"));
            }
        }
        Ok(())
    }
}

/// Simulates coupon-limited recruitment over `net`.
///
/// Respondents are processed first-in first-out; each recruits up to
/// `coupon_limit` distinct not-yet-sampled neighbours chosen uniformly.
/// Stops at `target_n`, or earlier with the shortfall flag set when every
/// chain has died out.
pub fn simulate_rds(net: &AttributedNetwork, design: &RdsDesign) -> Result<RdsSample> {
    design.validate()?;
    let n = net.node_count();
    let recruitable: Vec<usize> = (0..n).filter(|&i| !net.neighbors(i).is_empty()).collect();
    if recruitable.is_empty() {
        return Err(Error::input("network has no recruitable nodes"));
    }
    if recruitable.len() < design.n_seeds {
        return Err(Error::input(format!(
            "{} seeds requested but only {} nodes have ties",
            design.n_seeds,
            recruitable.len()
        )));
    }
    let mut rng = rng_from_seed(design.rng_seed);
    let seeds: Vec<usize> = match &design.seed_rule {
        SeedRule::FixedList(ids) => {
            let uniq: FxHashSet<usize> = ids.iter().copied().collect();
            if uniq.len() != ids.len() {
                return Err(Error::input("fixed seed list has duplicates"));
            }
            for &s in ids {
                if s >= n || net.neighbors(s).is_empty() {
                    return Err(Error::input(format!("seed {s} is out of range or isolated")));
                }
            }
            ids.clone()
        }
        SeedRule::Uniform => recruitable.choose_multiple(&mut rng, design.n_seeds).copied().collect(),
        SeedRule::DegreeProportional => {
            let mut weights: Vec<f64> = recruitable.iter().map(|&i| net.neighbors(i).len() as f64).collect();
            let mut out = Vec::with_capacity(design.n_seeds);
            for _ in 0..design.n_seeds {
                let k = WeightedIndex::new(&weights).expect("positive weights").sample(&mut rng);
                out.push(recruitable[k]);
                weights[k] = 0.0;
            }
            out
        }
    };

    let noise = match design.degree_noise_sd {
        Some(sd) if sd > 0.0 => Some(LogNormal::new(-sd * sd / 2.0, sd).expect("valid log-normal")),
        _ => None,
    };
    let schema = Arc::new(net.schema().clone());
    let mut sampled = vec![false; n];
    let mut respondents: Vec<RdsRespondent> = Vec::with_capacity(design.target_n);
    let mut parent = Vec::with_capacity(design.target_n);
    let mut node_of = Vec::with_capacity(design.target_n);
    let mut push =
        |node: usize, recruiter: Option<usize>, rng: &mut crate::rng::SimRng, respondents: &mut Vec<RdsRespondent>| {
            let d = net.neighbors(node).len() as u32;
            let reported = match &noise {
                Some(ln) => ((d as f64 * ln.sample(rng)).round() as u32).max(1),
                None => d,
            };
            let wave = recruiter.map_or(0, |p: usize| respondents[p].wave + 1);
            respondents.push(RdsRespondent {
                id: node as u64,
                recruiter: recruiter.map(|p| respondents[p].id),
                wave,
                reported_degree: reported,
                attrs: net.attributes().row(node).into(),
            });
            parent.push(recruiter);
        };
    for &s in &seeds {
        sampled[s] = true;
        push(s, None, &mut rng, &mut respondents);
        node_of.push(s);
    }

    let mut head = 0;
    let mut candidates = Vec::new();
    while respondents.len() < design.target_n && head < respondents.len() {
        let v = node_of[head];
        candidates.clear();
        candidates.extend(net.neighbors(v).iter().map(|&w| w as usize).filter(|&w| !sampled[w]));
        let k = (design.coupon_limit as usize).min(candidates.len());
        let (chosen, _) = candidates.partial_shuffle(&mut rng, k);
        for &w in chosen.iter() {
            if respondents.len() >= design.target_n {
                break;
            }
            sampled[w] = true;
            push(w, Some(head), &mut rng, &mut respondents);
            node_of.push(w);
        }
        head += 1;
    }
    let mut sample = RdsSample::from_parts_unchecked(respondents, schema, design.coupon_limit, parent);
    sample.shortfall = sample.len() < design.target_n;
    Ok(sample)
}

/// `r[x][y]`: recruitments from a group-x recruiter to a group-y recruit.
pub fn cross_recruit_counts(sample: &RdsSample) -> [[u64; 2]; 2] {
    let mut r = [[0u64; 2]; 2];
    let resp = sample.respondents();
    for (k, p) in sample.parents().iter().enumerate() {
        if let Some(p) = *p {
            r[resp[p].group().index()][resp[k].group().index()] += 1;
        }
    }
    r
}

/// Removes respondents with wave < `w`. Survivors whose recruiter was removed
/// become seeds and all waves shift down by `w`.
pub fn drop_early_waves(sample: &RdsSample, w: u32) -> Result<RdsSample> {
    if w == 0 {
        return Ok(sample.clone());
    }
    let mut new_pos = vec![None; sample.len()];
    let mut respondents = Vec::new();
    let mut parent = Vec::new();
    for (k, r) in sample.respondents().iter().enumerate() {
        if r.wave < w {
            continue;
        }
        let p = sample.parents()[k].and_then(|p| new_pos[p]);
        new_pos[k] = Some(respondents.len());
        respondents.push(RdsRespondent {
            recruiter: p.and(r.recruiter),
            wave: r.wave - w,
            ..r.clone()
        });
        parent.push(p);
    }
    if respondents.is_empty() {
        return Err(Error::input("empty sample"));
    }
    Ok(RdsSample::from_parts_unchecked(
        respondents,
        sample.schema_arc().clone(),
        sample.coupon_limit(),
        parent,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeAttributes;
    use Group::*;

    fn net(groups: &[Group], edges: &[(usize, usize)]) -> AttributedNetwork {
        AttributedNetwork::new(
            NodeAttributes::from_groups(NodeAttributeSchema::group_only(), groups).unwrap(),
            edges.iter().copied(),
        )
        .unwrap()
    }

    fn fixed(seeds: Vec<usize>, target: usize) -> RdsDesign {
        RdsDesign {
            n_seeds: seeds.len(),
            seed_rule: SeedRule::FixedList(seeds),
            ..RdsDesign::new(1, target, 7)
        }
    }

    #[test]
    fn star_from_hub() {
        let g = net(&[A; 4], &[(0, 1), (0, 2), (0, 3)]);
        let s = simulate_rds(&g, &fixed(vec![0], 4)).unwrap();
        assert_eq!(s.len(), 4);
        assert!(!s.shortfall());
        assert!(s.respondents()[1..]
            .iter()
            .all(|r| r.wave == 1 && r.recruiter == Some(0)));
    }

    #[test]
    fn path_is_a_single_chain() {
        let g = net(&[A; 5], &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let s = simulate_rds(&g, &fixed(vec![0], 5)).unwrap();
        let waves: Vec<u32> = s.respondents().iter().map(|r| r.wave).collect();
        assert_eq!(waves, vec![0, 1, 2, 3, 4]);
        let ids: Vec<u64> = s.respondents().iter().map(|r| r.id).collect();
        assert_eq!(ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn shortfall_and_isolates() {
        let g = net(&[A; 4], &[(0, 1)]);
        let s = simulate_rds(&g, &fixed(vec![0], 4)).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.shortfall());
        let empty = net(&[A; 3], &[]);
        let err = simulate_rds(&empty, &RdsDesign::new(1, 2, 1)).unwrap_err();
        assert!(err.to_string().contains("no recruitable nodes"));
        assert!(simulate_rds(&g, &fixed(vec![2], 3)).is_err());
    }

    #[test]
    fn design_validation() {
        assert!(RdsDesign::new(0, 5, 1).validate().is_err());
        assert!(RdsDesign::new(3, 2, 1).validate().is_err());
        let mut d = RdsDesign::new(1, 5, 1);
        d.coupon_limit = 0;
        assert!(d.validate().is_err());
    }

    #[test]
    fn cross_recruits() {
        let g = net(&[A, B, B], &[(0, 1), (0, 2)]);
        let s = simulate_rds(&g, &fixed(vec![0], 3)).unwrap();
        assert_eq!(cross_recruit_counts(&s), [[0, 2], [0, 0]]);
        let seeds_only = simulate_rds(&g, &fixed(vec![0], 1)).unwrap();
        assert_eq!(cross_recruit_counts(&seeds_only), [[0, 0], [0, 0]]);
    }

    #[test]
    fn dropping_waves() {
        let g = net(&[A; 5], &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let s = simulate_rds(&g, &fixed(vec![0], 5)).unwrap();
        assert_eq!(drop_early_waves(&s, 0).unwrap(), s);
        let d = drop_early_waves(&s, 1).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.seed_ids(), vec![1]);
        assert_eq!(d.respondents()[0].wave, 0);
        assert_eq!(d.respondents()[3].wave, 3);
        // survivors still satisfy every invariant
        RdsSample::new(d.respondents().to_vec(), d.schema_arc().clone(), 3).unwrap();
        assert!(drop_early_waves(&s, 5)
            .unwrap_err()
            .to_string()
            .contains("empty sample"));
    }

    #[test]
    fn validation_catches_broken_forests() {
        let schema = Arc::new(NodeAttributeSchema::group_only());
        let r = |id, recruiter, wave| RdsRespondent {
            id,
            recruiter,
            wave,
            reported_degree: 2,
            attrs: vec![0u16].into(),
        };
        assert!(RdsSample::new(vec![r(1, None, 0), r(2, Some(1), 1)], schema.clone(), 3).is_ok());
        assert!(RdsSample::new(vec![r(1, None, 0), r(1, Some(1), 1)], schema.clone(), 3).is_err());
        assert!(RdsSample::new(vec![r(2, Some(1), 1), r(1, None, 0)], schema.clone(), 3).is_err());
        assert!(RdsSample::new(vec![r(1, None, 0), r(2, Some(1), 2)], schema.clone(), 3).is_err());
        assert!(RdsSample::new(vec![r(1, None, 1)], schema.clone(), 3).is_err());
        let many = vec![r(1, None, 0), r(2, Some(1), 1), r(3, Some(1), 1)];
        assert!(RdsSample::new(many, schema.clone(), 1).is_err());
        assert!(RdsSample::new(vec![], schema, 3).is_err());
    }

    #[test]
    fn edge_census_shape() {
        let g = net(&[A, B, B], &[(0, 1), (1, 2)]);
        let s = RdsSample::edge_census(&g).unwrap();
        assert_eq!(s.len(), 8);
        // node 1 has degree 2 and appears 2·2 times
        assert_eq!(s.respondents().iter().filter(|r| r.reported_degree == 2).count(), 4);
        assert_eq!(cross_recruit_counts(&s), [[0, 1], [1, 2]]);
        RdsSample::new(s.respondents().to_vec(), s.schema_arc().clone(), 1).unwrap();
    }

    #[test]
    fn csv_round_trip_and_row_errors() {
        let g = net(&[A, B, B, A], &[(0, 1), (1, 2), (2, 3)]);
        let s = simulate_rds(&g, &fixed(vec![0], 4)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        s.write_csv(&p).unwrap();
        assert_eq!(RdsSample::read_csv(&p, 3).unwrap(), s);

        std::fs::write(
            &p,
            "id,recruiter_id,wave,degree,group,gender\n1,,0,3,A,Male\n2,1,1,x,B,Female\n3,9,1,2,Q,Male\n4,1,1,2,B,\n",
        )
        .unwrap();
        match RdsSample::read_csv(&p, 3) {
            Err(Error::Rows { problems, .. }) => {
                let rows: Vec<usize> = problems.iter().map(|p| p.0).collect();
                assert_eq!(rows, vec![3, 4, 5]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unordered_field_rows_are_sorted_by_wave() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        std::fs::write(
            &p,
            "id,recruiter_id,wave,degree,group,hub\n20,10,1,4,B,north\n10,,0,3,A,south\n",
        )
        .unwrap();
        let s = RdsSample::read_csv(&p, 3).unwrap();
        assert_eq!(s.respondents()[0].id, 10);
        assert_eq!(
            s.schema().spec(1).levels,
            vec!["north".to_string(), "south".to_string()]
        );
    }
}
