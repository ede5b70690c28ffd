//! Point estimators for RDS samples: Hajek means, the two-group
//! Salganik-Heckathorn proportion, totals from a known subgroup size,
//! demographic breakdowns, and delta-method intervals.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::graph::Group;
use crate::rds::{drop_early_waves, RdsRespondent, RdsSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    Bootstrap,
    Delta,
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithCi {
    pub point: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub level: f64,
    pub method: CiMethod,
}

impl EstimateWithCi {
    /// Normal interval point ± z·se.
    pub fn normal(point: f64, se: f64, level: f64, method: CiMethod) -> Result<Self> {
        let z = z_quantile(level)?;
        Ok(EstimateWithCi {
            point,
            se,
            ci_low: point - z * se,
            ci_high: point + z * se,
            level,
            method,
        })
    }

    pub fn width(&self) -> f64 {
        self.ci_high - self.ci_low
    }

    pub fn covers(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Two-sided standard-normal quantile: 1.959964 at level 0.95.
pub fn z_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::input(format!("confidence level {level} is not in (0, 1)")));
    }
    let n = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(n.inverse_cdf(0.5 + level / 2.0))
}

/// A multiset of respondents of one sample. The full sample is one view;
/// bootstrap replicates are others. A copy of respondent k keeps k's group,
/// degree, wave and recruiter group.
#[derive(Debug, Clone)]
pub struct SampleView<'a> {
    sample: &'a RdsSample,
    members: Vec<u32>,
}

impl<'a> SampleView<'a> {
    pub fn full(sample: &'a RdsSample) -> Self {
        SampleView {
            sample,
            members: (0..sample.len() as u32).collect(),
        }
    }

    /// `members` are positions in `sample`; repeats are allowed.
    pub fn from_members(sample: &'a RdsSample, members: Vec<u32>) -> Result<Self> {
        if members.iter().any(|&m| m as usize >= sample.len()) {
            return Err(Error::input("view member out of range"));
        }
        Ok(SampleView { sample, members })
    }

    pub fn sample(&self) -> &'a RdsSample {
        self.sample
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn respondents(&self) -> impl Iterator<Item = &'a RdsRespondent> + '_ {
        let resp = self.sample.respondents();
        self.members.iter().map(move |&m| &resp[m as usize])
    }

    /// Group of the recruiter of each member, `None` for seeds.
    fn recruiter_groups(&self) -> impl Iterator<Item = Option<Group>> + '_ {
        let resp = self.sample.respondents();
        let parents = self.sample.parents();
        self.members
            .iter()
            .map(move |&m| parents[m as usize].map(|p| resp[p].group()))
    }
}

impl<'a> From<&'a RdsSample> for SampleView<'a> {
    fn from(s: &'a RdsSample) -> Self {
        SampleView::full(s)
    }
}

/// (Σ zᵢ/dᵢ) / (Σ 1/dᵢ).
pub fn hajek_mean(z: &[f64], d: &[f64]) -> Result<f64> {
    if z.len() != d.len() {
        return Err(Error::input("values and degrees differ in length"));
    }
    if z.is_empty() {
        return Err(Error::input("Hajek mean of an empty sample"));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (&zi, &di) in z.iter().zip(d) {
        if !(di.is_finite() && di > 0.0) {
            return Err(Error::input(format!("degree {di} is not positive")));
        }
        num += zi / di;
        den += 1.0 / di;
    }
    Ok(num / den)
}

/// Which respondents enter the estimators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimationSettings {
    /// Leave seeds out of degree and composition means; their recruitments still count.
    #[serde(default)]
    pub exclude_seeds: bool,
    /// Drop waves below this before estimating (see [`drop_early_waves`]).
    #[serde(default)]
    pub drop_waves: u32,
}

impl EstimationSettings {
    pub fn prepare(&self, sample: &RdsSample) -> Result<RdsSample> {
        drop_early_waves(sample, self.drop_waves)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    /// Hajek mean degree n_X / Σ_{i∈X} 1/dᵢ.
    pub mean_degree_a: f64,
    pub mean_degree_b: f64,
    /// Share of A-recruiters' recruits that are in B.
    pub c_ab: f64,
    pub c_ba: f64,
    pub mu_a: f64,
    /// Respondents per group entering the degree means.
    pub n: [usize; 2],
    pub recruitments: [[u64; 2]; 2],
}

impl GroupSummary {
    pub fn mu_b(&self) -> f64 {
        1.0 - self.mu_a
    }
}

/// μ_A = d̄_B c_BA / (d̄_A c_AB + d̄_B c_BA) from group mean degrees and cross-recruitment shares.
pub fn sh_formula(mean_degree_a: f64, mean_degree_b: f64, c_ab: f64, c_ba: f64) -> f64 {
    let den = mean_degree_a * c_ab + mean_degree_b * c_ba;
    mean_degree_b * c_ba / den
}

pub fn sh_proportion(sample: &RdsSample) -> Result<GroupSummary> {
    sh_summary(&SampleView::full(sample), false)
}

/// Salganik-Heckathorn proportion of group A on a view.
pub fn sh_summary(view: &SampleView, exclude_seeds: bool) -> Result<GroupSummary> {
    let mut inv = [0.0f64; 2];
    let mut n = [0usize; 2];
    let mut r = [[0u64; 2]; 2];
    for (resp, rg) in view.respondents().zip(view.recruiter_groups()) {
        let g = resp.group().index();
        if let Some(rg) = rg {
            r[rg.index()][g] += 1;
        }
        if exclude_seeds && rg.is_none() {
            continue;
        }
        inv[g] += 1.0 / resp.reported_degree as f64;
        n[g] += 1;
    }
    for g in Group::BOTH {
        if n[g.index()] == 0 {
            return Err(Error::undefined(format!("no {} respondents", g.label())));
        }
    }
    let out_a = r[0][0] + r[0][1];
    let out_b = r[1][0] + r[1][1];
    if r[0][1] == 0 || r[1][0] == 0 || out_a == 0 || out_b == 0 {
        return Err(Error::undefined("no cross-ties observed"));
    }
    let mean_degree_a = n[0] as f64 / inv[0];
    let mean_degree_b = n[1] as f64 / inv[1];
    let c_ab = r[0][1] as f64 / out_a as f64;
    let c_ba = r[1][0] as f64 / out_b as f64;
    Ok(GroupSummary {
        mean_degree_a,
        mean_degree_b,
        c_ab,
        c_ba,
        mu_a: sh_formula(mean_degree_a, mean_degree_b, c_ab, c_ba),
        n,
        recruitments: r,
    })
}

/// N_A = N_B μ_A / (1 − μ_A).
pub fn total_from_known(mu_a: f64, n_b: u64) -> Result<f64> {
    if n_b == 0 {
        return Err(Error::input("known group size must be at least 1"));
    }
    if !(mu_a > 0.0 && mu_a < 1.0) {
        return Err(Error::undefined(format!("total undefined at boundary (mu = {mu_a})")));
    }
    Ok(n_b as f64 * mu_a / (1.0 - mu_a))
}

/// Delta-method interval for N_B μ/(1−μ): se = N_B se_μ / (1−μ)².
pub fn delta_ci_total(mu: &EstimateWithCi, n_b: u64) -> Result<EstimateWithCi> {
    if !(mu.se.is_finite() && mu.se >= 0.0) {
        return Err(Error::input("standard error must be finite and non-negative"));
    }
    let point = total_from_known(mu.point, n_b)?;
    let se = n_b as f64 * mu.se / (1.0 - mu.point).powi(2);
    EstimateWithCi::normal(point, se, mu.level, CiMethod::Delta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelShare {
    pub group: Group,
    pub level: String,
    pub point: f64,
    /// No respondent of this group has this level; the estimate is a structural zero.
    pub absent: bool,
}

/// Within-group Hajek proportions of each level of `attr`, in group then level order.
pub fn demographic_breakdown(sample: &RdsSample, attr: &str) -> Result<Vec<LevelShare>> {
    let a = sample.schema().require(attr)?;
    let points = level_shares(&SampleView::full(sample), a, false)?;
    let levels = &sample.schema().spec(a).levels;
    let mut out = Vec::with_capacity(points.len());
    for g in Group::BOTH {
        for (l, level) in levels.iter().enumerate() {
            let p = points[g.index() * levels.len() + l];
            out.push(LevelShare {
                group: g,
                level: level.clone(),
                point: p,
                absent: p == 0.0,
            });
        }
    }
    Ok(out)
}

/// Flattened `[group][level]` Hajek proportions of attribute `a` on a view.
pub fn level_shares(view: &SampleView, a: usize, exclude_seeds: bool) -> Result<Vec<f64>> {
    let nl = view.sample().schema().spec(a).levels.len();
    let mut num = vec![0.0; 2 * nl];
    let mut den = [0.0; 2];
    for (resp, rg) in view.respondents().zip(view.recruiter_groups()) {
        if exclude_seeds && rg.is_none() {
            continue;
        }
        let g = resp.group().index();
        let w = 1.0 / resp.reported_degree as f64;
        num[g * nl + resp.attrs[a] as usize] += w;
        den[g] += w;
    }
    for g in Group::BOTH {
        if den[g.index()] == 0.0 {
            return Err(Error::undefined(format!("no {} respondents", g.label())));
        }
    }
    for (k, x) in num.iter_mut().enumerate() {
        *x /= den[k / nl];
    }
    Ok(num)
}

/// One line of a results document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub estimator: String,
    pub point: f64,
    pub se: f64,
    pub ci: [f64; 2],
    pub level: f64,
    pub method: CiMethod,
    pub n: usize,
    pub settings: EstimationSettings,
}

impl ResultRecord {
    pub fn new(estimator: impl Into<String>, e: &EstimateWithCi, n: usize, settings: EstimationSettings) -> Self {
        ResultRecord {
            estimator: estimator.into(),
            point: e.point,
            se: e.se,
            ci: [e.ci_low, e.ci_high],
            level: e.level,
            method: e.method,
            n,
            settings,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeAttributeSchema;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    #[test]
    fn hajek_examples() {
        assert_relative_eq!(hajek_mean(&[10.0, 20.0], &[1.0, 3.0]).unwrap(), 12.5);
        assert_relative_eq!(hajek_mean(&[1.0, 2.0, 6.0], &[4.0; 3]).unwrap(), 3.0);
        assert!(hajek_mean(&[], &[]).is_err());
        assert!(hajek_mean(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn sh_formula_examples() {
        assert_relative_eq!(sh_formula(3.0, 3.0, 0.4, 0.4), 0.5);
        assert_relative_eq!(sh_formula(2.0, 4.0, 0.5, 0.25), 0.5);
    }

    #[test]
    fn totals() {
        assert_relative_eq!(total_from_known(0.5, 1000).unwrap(), 1000.0);
        let n = total_from_known(0.304, 1225).unwrap();
        assert!((n - 535.06).abs() < 0.01, "{n}");
        assert!(total_from_known(1.0, 10)
            .unwrap_err()
            .to_string()
            .contains("total undefined at boundary"));
        assert!(total_from_known(0.0, 10).is_err());
        assert!(total_from_known(0.5, 0).is_err());
    }

    #[test]
    fn delta_interval() {
        let mu = EstimateWithCi::normal(0.5, 0.01, 0.95, CiMethod::Analytic).unwrap();
        let t = delta_ci_total(&mu, 1000).unwrap();
        assert_relative_eq!(t.se, 40.0, epsilon = 1e-9);
        assert_relative_eq!(t.ci_high - t.point, 1.959964 * 40.0, epsilon = 1e-3);
        let exact = EstimateWithCi { se: 0.0, ..mu };
        let t = delta_ci_total(&exact, 1000).unwrap();
        assert_eq!((t.ci_low, t.ci_high), (t.point, t.point));
    }

    #[test]
    fn z_value() {
        assert!((z_quantile(0.95).unwrap() - 1.959964).abs() < 1e-6);
        assert!(z_quantile(1.0).is_err());
    }

    fn sample(rows: &[(u64, Option<u64>, u32, u32, u16)]) -> RdsSample {
        let resp = rows
            .iter()
            .map(|&(id, rec, wave, d, g)| RdsRespondent {
                id,
                recruiter: rec,
                wave,
                reported_degree: d,
                attrs: vec![g].into(),
            })
            .collect();
        RdsSample::new(resp, Arc::new(NodeAttributeSchema::group_only()), 3).unwrap()
    }

    #[test]
    fn sh_on_small_tree() {
        // A-seed (d=2) recruits B (d=4) and A (d=2); B recruits A (d=2)
        let s = sample(&[
            (1, None, 0, 2, 0),
            (2, Some(1), 1, 4, 1),
            (3, Some(1), 1, 2, 0),
            (4, Some(2), 2, 2, 0),
        ]);
        let g = sh_proportion(&s).unwrap();
        assert_eq!(g.recruitments, [[1, 1], [1, 0]]);
        assert_relative_eq!(g.mean_degree_a, 2.0);
        assert_relative_eq!(g.mean_degree_b, 4.0);
        assert_relative_eq!(g.c_ab, 0.5);
        assert_relative_eq!(g.c_ba, 1.0);
        assert_relative_eq!(g.mu_a, 4.0 / 5.0);
        assert_relative_eq!(g.mu_a + g.mu_b(), 1.0);

        let no_cross = sample(&[(1, None, 0, 2, 0), (2, Some(1), 1, 4, 0), (3, None, 0, 3, 1)]);
        let err = sh_proportion(&no_cross).unwrap_err();
        assert_eq!(err.to_string(), "estimator undefined: no cross-ties observed");
    }

    #[test]
    fn excluding_seeds_changes_only_means() {
        let s = sample(&[
            (1, None, 0, 9, 0),
            (2, Some(1), 1, 4, 1),
            (3, Some(1), 1, 2, 0),
            (4, Some(2), 2, 2, 0),
        ]);
        let all = sh_summary(&SampleView::full(&s), false).unwrap();
        let ex = sh_summary(&SampleView::full(&s), true).unwrap();
        assert_eq!(all.recruitments, ex.recruitments);
        assert_eq!(ex.n, [2, 1]);
        assert_relative_eq!(ex.mean_degree_a, 2.0);
        assert!(all.mean_degree_a > 2.0);
    }

    #[test]
    fn breakdown_flags_absent_levels() {
        let schema = NodeAttributeSchema::group_only()
            .with_attribute("gender", &["Female", "Male"], "Female")
            .unwrap();
        let resp = vec![
            RdsRespondent {
                id: 1,
                recruiter: None,
                wave: 0,
                reported_degree: 1,
                attrs: vec![0, 0].into(),
            },
            RdsRespondent {
                id: 2,
                recruiter: Some(1),
                wave: 1,
                reported_degree: 3,
                attrs: vec![0, 1].into(),
            },
            RdsRespondent {
                id: 3,
                recruiter: Some(1),
                wave: 1,
                reported_degree: 2,
                attrs: vec![1, 0].into(),
            },
        ];
        let s = RdsSample::new(resp, Arc::new(schema), 3).unwrap();
        let b = demographic_breakdown(&s, "gender").unwrap();
        assert_eq!(b.len(), 4);
        assert_relative_eq!(b[0].point, 0.75);
        assert_relative_eq!(b[1].point, 0.25);
        assert_relative_eq!(b[2].point, 1.0);
        assert!(b[3].absent && b[3].point == 0.0);
        assert!(demographic_breakdown(&s, "race").is_err());
    }

    #[test]
    fn record_key_order_is_stable() {
        let e = EstimateWithCi::normal(1.0, 0.5, 0.95, CiMethod::Delta).unwrap();
        let json = serde_json::to_string(&ResultRecord::new("total", &e, 10, EstimationSettings::default())).unwrap();
        assert!(json.starts_with(r#"{"estimator":"total","point":1.0,"se":0.5,"ci":["#));
        assert!(json.contains(r#""method":"delta","n":10,"settings":{"exclude_seeds":false,"drop_waves":0}"#));
    }
}
