//! End-to-end estimation on one sample: proportion, total, intervals and breakdowns.

use serde::{Deserialize, Serialize};

use crate::bootstrap::{bootstrap_replicates, percentile_ci, BootstrapPlan};
use crate::error::Result;
use crate::estimators::{
    delta_ci_total, level_shares, sh_summary, total_from_known, EstimateWithCi, EstimationSettings, GroupSummary,
    ResultRecord, SampleView,
};
use crate::graph::Group;
use crate::rds::RdsSample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TotalEstimate {
    pub summary: GroupSummary,
    /// Bootstrap interval for μ_A.
    pub mu: EstimateWithCi,
    /// Bootstrap percentile interval for N_A.
    pub total: EstimateWithCi,
    /// Delta-method interval for N_A from the bootstrap SE of μ_A.
    pub total_delta: EstimateWithCi,
    /// Respondents after applying the settings.
    pub n: usize,
    pub max_wave: u32,
    pub dropped_replicates: usize,
    pub settings: EstimationSettings,
}

impl TotalEstimate {
    pub fn records(&self) -> Vec<ResultRecord> {
        vec![
            ResultRecord::new("mu_unsheltered", &self.mu, self.n, self.settings),
            ResultRecord::new("total_unsheltered", &self.total, self.n, self.settings),
            ResultRecord::new("total_unsheltered", &self.total_delta, self.n, self.settings),
        ]
    }
}

/// Salganik-Heckathorn proportion, total given `n_b` sheltered, and both intervals.
pub fn estimate_total(
    sample: &RdsSample,
    n_b: u64,
    plan: &BootstrapPlan,
    settings: EstimationSettings,
) -> Result<TotalEstimate> {
    let prepared = settings.prepare(sample)?;
    let summary = sh_summary(&SampleView::full(&prepared), settings.exclude_seeds)?;
    total_from_known(summary.mu_a, n_b)?;
    let reps = bootstrap_replicates(&prepared, plan, 2, |v| {
        let mu = sh_summary(v, settings.exclude_seeds)?.mu_a;
        Ok(vec![mu, total_from_known(mu, n_b)?])
    })?;
    let mu = percentile_ci(&reps, 0, plan.level);
    let total = percentile_ci(&reps, 1, plan.level);
    let total_delta = delta_ci_total(&mu, n_b)?;
    Ok(TotalEstimate {
        summary,
        mu,
        total,
        total_delta,
        n: prepared.len(),
        max_wave: prepared.max_wave(),
        dropped_replicates: reps.dropped,
        settings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelEstimate {
    pub attribute: String,
    pub group: Group,
    pub level: String,
    pub estimate: EstimateWithCi,
    /// Level not observed in this group: the estimate and interval are a structural zero.
    pub absent: bool,
}

/// Within-group proportions of every level of `attr` with bootstrap intervals.
pub fn demographics(
    sample: &RdsSample,
    attr: &str,
    plan: &BootstrapPlan,
    settings: EstimationSettings,
) -> Result<Vec<LevelEstimate>> {
    let prepared = settings.prepare(sample)?;
    let a = prepared.schema().require(attr)?;
    let levels = prepared.schema().spec(a).levels.clone();
    let k = 2 * levels.len();
    let reps = bootstrap_replicates(&prepared, plan, k, |v| level_shares(v, a, settings.exclude_seeds))?;
    let mut out = Vec::with_capacity(k);
    for g in Group::BOTH {
        for (l, level) in levels.iter().enumerate() {
            let j = g.index() * levels.len() + l;
            let estimate = percentile_ci(&reps, j, plan.level);
            out.push(LevelEstimate {
                attribute: attr.to_string(),
                group: g,
                level: level.clone(),
                absent: reps.point[j] == 0.0,
                estimate,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{AttributedNetwork, NodeAttributeSchema, NodeAttributes};
    use crate::rds::{simulate_rds, RdsDesign};
    use approx::assert_relative_eq;

    fn banded_ring() -> AttributedNetwork {
        // circulant ring, groups alternating in blocks of four
        let n = 40;
        let groups: Vec<Group> = (0..n)
            .map(|i| if (i / 4) % 2 == 0 { Group::A } else { Group::B })
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i, (i + 1) % n));
            edges.push((i, (i + 3) % n));
        }
        let attrs = NodeAttributes::from_groups(NodeAttributeSchema::group_only(), &groups).unwrap();
        AttributedNetwork::new(attrs, edges).unwrap()
    }

    #[test]
    fn total_pipeline_is_consistent() {
        let net = banded_ring();
        let s = simulate_rds(&net, &RdsDesign::new(3, 30, 5)).unwrap();
        let plan = BootstrapPlan::new(8);
        let e = estimate_total(&s, 100, &plan, EstimationSettings::default()).unwrap();
        assert_relative_eq!(e.total.point, total_from_known(e.summary.mu_a, 100).unwrap());
        assert_relative_eq!(e.mu.point, e.summary.mu_a);
        assert!(e.total.covers(e.total.point) && e.total_delta.covers(e.total.point));
        assert_eq!(e.records().len(), 3);
        assert_eq!(
            estimate_total(&s, 100, &plan, EstimationSettings::default()).unwrap(),
            e
        );
    }

    #[test]
    fn demographics_shape() {
        let net = banded_ring();
        let s = simulate_rds(&net, &RdsDesign::new(3, 30, 5)).unwrap();
        let d = demographics(&s, "group", &BootstrapPlan::new(2), EstimationSettings::default()).unwrap();
        assert_eq!(d.len(), 4);
        assert_relative_eq!(d[0].estimate.point, 1.0);
        assert!(d[1].absent && d[2].absent);
        assert_eq!((d[1].estimate.ci_low, d[1].estimate.ci_high), (0.0, 0.0));
    }
}
