//! Tree and respondent-level bootstrap for RDS estimators.

use std::path::Path;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{CiMethod, EstimateWithCi, SampleView};
use crate::rds::{RdsRespondent, RdsSample};
use crate::rng::{task_rng, SimRng};

/// Attempts allowed per replicate before it is dropped.
const ATTEMPTS_PER_REPLICATE: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Resample seeds, then each included respondent's recruits, with replacement.
    Tree,
    /// Resample respondents independently, ignoring chains.
    RespondentIid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapPlan {
    pub replicates: usize,
    pub level: f64,
    pub rng_seed: u64,
    pub scheme: Scheme,
}

impl BootstrapPlan {
    pub fn new(rng_seed: u64) -> Self {
        BootstrapPlan {
            replicates: 1000,
            level: 0.95,
            rng_seed,
            scheme: Scheme::Tree,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates < 100 {
            return Err(Error::input("bootstrap needs at least 100 replicates"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::input(format!(
                "confidence level {} is not in (0, 1)",
                self.level
            )));
        }
        Ok(())
    }
}

/// Positions of recruits per respondent and of the seeds, computed once per sample.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    seeds: Vec<u32>,
    children: Vec<Vec<u32>>,
}

impl TreeIndex {
    pub fn new(sample: &RdsSample) -> Self {
        let mut seeds = Vec::new();
        let mut children = vec![Vec::new(); sample.len()];
        for (k, p) in sample.parents().iter().enumerate() {
            match p {
                Some(p) => children[*p].push(k as u32),
                None => seeds.push(k as u32),
            }
        }
        TreeIndex { seeds, children }
    }

    /// One tree resample as (original position, position of resampled recruiter) pairs,
    /// recruiters first.
    pub fn draw(&self, rng: &mut SimRng) -> (Vec<u32>, Vec<Option<usize>>) {
        let mut members = Vec::with_capacity(self.children.len());
        let mut parent = Vec::with_capacity(self.children.len());
        for _ in 0..self.seeds.len() {
            members.push(self.seeds[rng.random_range(0..self.seeds.len())]);
            parent.push(None);
        }
        let mut head = 0;
        while head < members.len() {
            let kids = &self.children[members[head] as usize];
            for _ in 0..kids.len() {
                members.push(kids[rng.random_range(0..kids.len())]);
                parent.push(Some(head));
            }
            head += 1;
        }
        (members, parent)
    }
}

/// Tree bootstrap resample with respondents re-keyed 0, 1, 2, …
pub fn resample_tree(sample: &RdsSample, rng: &mut SimRng) -> RdsSample {
    let (members, parent) = TreeIndex::new(sample).draw(rng);
    let resp = sample.respondents();
    let respondents = members
        .iter()
        .zip(&parent)
        .enumerate()
        .map(|(k, (&m, p))| RdsRespondent {
            id: k as u64,
            recruiter: p.map(|p| p as u64),
            ..resp[m as usize].clone()
        })
        .collect();
    RdsSample::from_parts_unchecked(
        respondents,
        Arc::clone(sample.schema_arc()),
        sample.coupon_limit(),
        parent,
    )
}

/// n respondents drawn uniformly with replacement, as sample positions.
pub fn resample_iid(sample: &RdsSample, rng: &mut SimRng) -> Vec<u32> {
    let n = sample.len();
    (0..n).map(|_| rng.random_range(0..n) as u32).collect()
}

/// Replicate values of a vector statistic and the bookkeeping behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Replicates {
    pub point: Vec<f64>,
    /// `values[r]` is replicate r; dropped replicates are omitted.
    pub values: Vec<Vec<f64>>,
    pub failed_attempts: u64,
    pub total_attempts: u64,
    pub dropped: usize,
}

/// Runs the bootstrap for a statistic returning `k` values.
///
/// A replicate whose statistic fails is redrawn from a fresh stream, up to ten
/// attempts (10·B overall). Replicate r, attempt a uses stream
/// (rng_seed, r, a), so results do not depend on the worker count.
pub fn bootstrap_replicates<F>(sample: &RdsSample, plan: &BootstrapPlan, k: usize, statistic: F) -> Result<Replicates>
where
    F: Fn(&SampleView) -> Result<Vec<f64>> + Sync,
{
    plan.validate()?;
    let point = statistic(&SampleView::full(sample))?;
    if point.len() != k {
        return Err(Error::input(format!(
            "statistic returned {} values, expected {k}",
            point.len()
        )));
    }
    let tree = TreeIndex::new(sample);
    let runs: Vec<(Option<Vec<f64>>, u64)> = (0..plan.replicates as u64)
        .into_par_iter()
        .map(|r| {
            for a in 0..ATTEMPTS_PER_REPLICATE {
                let mut rng = task_rng(plan.rng_seed, &[r, a]);
                let members = match plan.scheme {
                    Scheme::Tree => tree.draw(&mut rng).0,
                    Scheme::RespondentIid => resample_iid(sample, &mut rng),
                };
                let view = SampleView::from_members(sample, members).expect("members drawn from the sample");
                if let Ok(v) = statistic(&view) {
                    if v.len() == k && v.iter().all(|x| x.is_finite()) {
                        return (Some(v), a + 1);
                    }
                }
            }
            (None, ATTEMPTS_PER_REPLICATE)
        })
        .collect();
    let total_attempts: u64 = runs.iter().map(|r| r.1).sum();
    let values: Vec<Vec<f64>> = runs.into_iter().filter_map(|r| r.0).collect();
    let failed_attempts = total_attempts - values.len() as u64;
    if failed_attempts as f64 > 0.9 * total_attempts as f64 || values.len() < 2 {
        return Err(Error::undefined("statistic undefined on resamples"));
    }
    Ok(Replicates {
        point,
        dropped: plan.replicates - values.len(),
        values,
        failed_attempts,
        total_attempts,
    })
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile interval and replicate SD for component `j`. The interval is
/// widened to contain the point estimate if needed.
pub fn percentile_ci(reps: &Replicates, j: usize, level: f64) -> EstimateWithCi {
    let mut v: Vec<f64> = reps.values.iter().map(|r| r[j]).collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let se = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    v.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    let point = reps.point[j];
    EstimateWithCi {
        point,
        se,
        ci_low: quantile_sorted(&v, alpha).min(point),
        ci_high: quantile_sorted(&v, 1.0 - alpha).max(point),
        level,
        method: CiMethod::Bootstrap,
    }
}

pub fn bootstrap_ci<F>(sample: &RdsSample, plan: &BootstrapPlan, statistic: F) -> Result<EstimateWithCi>
where
    F: Fn(&SampleView) -> Result<f64> + Sync,
{
    let reps = bootstrap_replicates(sample, plan, 1, |v| statistic(v).map(|x| vec![x]))?;
    Ok(percentile_ci(&reps, 0, plan.level))
}

pub fn bootstrap_ci_vec<F>(
    sample: &RdsSample,
    plan: &BootstrapPlan,
    k: usize,
    statistic: F,
) -> Result<Vec<EstimateWithCi>>
where
    F: Fn(&SampleView) -> Result<Vec<f64>> + Sync,
{
    let reps = bootstrap_replicates(sample, plan, k, statistic)?;
    Ok((0..k).map(|j| percentile_ci(&reps, j, plan.level)).collect())
}

/// `replicate,value` for component `j`.
pub fn write_replicates_csv(path: &Path, reps: &Replicates, j: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["replicate", "value"])?;
    for (r, v) in reps.values.iter().enumerate() {
        w.write_record([r.to_string(), v[j].to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeAttributeSchema;
    use crate::rng::rng_from_seed;

    fn sample(rows: &[(u64, Option<u64>, u32, u16)]) -> RdsSample {
        let resp = rows
            .iter()
            .map(|&(id, rec, wave, g)| RdsRespondent {
                id,
                recruiter: rec,
                wave,
                reported_degree: 2,
                attrs: vec![g].into(),
            })
            .collect();
        RdsSample::new(resp, Arc::new(NodeAttributeSchema::group_only()), 3).unwrap()
    }

    #[test]
    fn lone_seed_resamples_to_itself() {
        let s = sample(&[(5, None, 0, 0)]);
        let mut rng = rng_from_seed(1);
        for _ in 0..5 {
            let r = resample_tree(&s, &mut rng);
            assert_eq!(r.len(), 1);
            assert_eq!(r.respondents()[0].attrs, s.respondents()[0].attrs);
        }
    }

    #[test]
    fn two_recruit_multiset_frequency() {
        let s = sample(&[(1, None, 0, 0), (2, Some(1), 1, 0), (3, Some(1), 1, 1)]);
        let tree = TreeIndex::new(&s);
        let mut rng = rng_from_seed(9);
        let n = 40_000;
        let both_x = (0..n)
            .filter(|_| {
                let (m, _) = tree.draw(&mut rng);
                m[1] == 1 && m[2] == 1
            })
            .count();
        let p = both_x as f64 / n as f64;
        // exact 1/4, binomial SE ≈ 0.0022
        assert!((p - 0.25).abs() < 0.01, "{p}");
    }

    #[test]
    fn constant_statistic_is_degenerate() {
        let s = sample(&[(1, None, 0, 0), (2, Some(1), 1, 0), (3, Some(1), 1, 1)]);
        let e = bootstrap_ci(&s, &BootstrapPlan::new(3), |_| Ok(7.0)).unwrap();
        assert_eq!((e.point, e.se, e.ci_low, e.ci_high), (7.0, 0.0, 7.0, 7.0));
    }

    #[test]
    fn failure_policy() {
        let seeds = sample(&[(1, None, 0, 0), (2, None, 0, 1), (3, None, 0, 0), (4, None, 0, 1)]);
        let plan = BootstrapPlan::new(3);
        assert!(bootstrap_ci(&seeds, &plan, |_| Err(Error::undefined("x"))).is_err());

        // defined only on the identity draw (probability 1/256): almost every attempt fails
        let identity = |v: &SampleView| {
            if v.members() == [0, 1, 2, 3] {
                Ok(1.0)
            } else {
                Err(Error::undefined("x"))
            }
        };
        let err = bootstrap_ci(&seeds, &plan, identity).unwrap_err();
        assert_eq!(err.to_string(), "estimator undefined: statistic undefined on resamples");

        // defined on draws where the first member is not 0 (probability 3/4): redraws rescue replicates
        let reps = bootstrap_replicates(&seeds, &plan, 1, |v| {
            if v.members()[0] != 0 || v.len() == 4 && v.members() == [0, 1, 2, 3] {
                Ok(vec![1.0])
            } else {
                Err(Error::undefined("x"))
            }
        })
        .unwrap();
        assert!(reps.failed_attempts > 0);
        assert_eq!(reps.dropped, 0);
        assert_eq!(reps.values.len(), 1000);

        let mut small = plan;
        small.replicates = 10;
        assert!(bootstrap_ci(&seeds, &small, |_| Ok(0.0)).is_err());
    }

    #[test]
    fn deterministic_and_ordered() {
        let s = sample(&[
            (1, None, 0, 0),
            (2, Some(1), 1, 1),
            (3, Some(1), 1, 0),
            (4, Some(2), 2, 1),
            (5, None, 0, 1),
            (6, Some(5), 1, 0),
        ]);
        let stat = |v: &SampleView| {
            Ok(v.respondents().filter(|r| r.group() == crate::Group::A).count() as f64 / v.len() as f64)
        };
        let plan = BootstrapPlan::new(11);
        let a = bootstrap_replicates(&s, &plan, 1, |v| stat(v).map(|x| vec![x])).unwrap();
        let b = bootstrap_replicates(&s, &plan, 1, |v| stat(v).map(|x| vec![x])).unwrap();
        assert_eq!(a, b);
        let e = percentile_ci(&a, 0, 0.95);
        let mut v: Vec<f64> = a.values.iter().map(|r| r[0]).collect();
        v.sort_by(f64::total_cmp);
        let med = quantile_sorted(&v, 0.5);
        assert!(e.ci_low <= med && med <= e.ci_high);
    }

    #[test]
    fn resampled_trees_are_valid_samples() {
        let s = sample(&[
            (1, None, 0, 0),
            (2, Some(1), 1, 1),
            (3, Some(1), 1, 0),
            (4, Some(3), 2, 1),
        ]);
        let mut rng = rng_from_seed(4);
        for _ in 0..50 {
            let r = resample_tree(&s, &mut rng);
            RdsSample::new(r.respondents().to_vec(), Arc::clone(r.schema_arc()), 3).unwrap();
        }
    }
}
