//! Monte Carlo power analysis: estimator bias and interval width against
//! sample fraction, and sensitivity of estimates to seeds and early waves.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::BootstrapPlan;
use crate::error::{Error, Result};
use crate::estimators::{EstimateWithCi, EstimationSettings};
use crate::graph::AttributedNetwork;
use crate::pipeline::estimate_total;
use crate::rds::{simulate_rds, RdsDesign, RdsSample, SeedRule};
use crate::rng::derive_seed;

pub const DEFAULT_FRACTIONS: [f64; 6] = [0.02, 0.05, 0.10, 0.20, 0.30, 0.50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSweepConfig {
    /// Sampled share of the population, strictly increasing in (0, 1].
    pub fractions: Vec<f64>,
    pub replicates: usize,
    /// Template; `target_n` and `rng_seed` are set per replicate.
    pub design: RdsDesign,
    /// Template; `rng_seed` is set per replicate.
    pub bootstrap: BootstrapPlan,
    /// Known size of group B plugged into the total.
    pub known_b: u64,
    /// True size of group A that estimates are scored against.
    pub truth_a: f64,
    pub rng_seed: u64,
}

impl PowerSweepConfig {
    /// Default grid, 100 replicates, 10 degree-proportional seeds, truth from the network's group sizes.
    pub fn for_network(net: &AttributedNetwork, rng_seed: u64) -> Self {
        let [a, b] = net.group_sizes();
        let mut bootstrap = BootstrapPlan::new(0);
        bootstrap.replicates = 500;
        PowerSweepConfig {
            fractions: DEFAULT_FRACTIONS.to_vec(),
            replicates: 100,
            design: RdsDesign::new(10, 10, 0),
            bootstrap,
            known_b: b as u64,
            truth_a: a as f64,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fractions.is_empty() {
            return Err(Error::input("no sample fractions given"));
        }
        if self.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
            return Err(Error::input("sample fractions must lie in (0, 1]"));
        }
        if self.fractions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::input("sample fractions must be strictly increasing"));
        }
        if self.replicates < 30 {
            return Err(Error::input("power sweeps need at least 30 replicates per fraction"));
        }
        if self.known_b == 0 {
            return Err(Error::input("known group size must be at least 1"));
        }
        self.bootstrap.validate()
    }
}

/// One replicate of the sweep, scored against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub max_wave: u32,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerCurvePoint {
    pub fraction: f64,
    pub target_n: usize,
    pub mean_estimate: f64,
    pub mean_bias: f64,
    pub ci_low_mean: f64,
    pub ci_high_mean: f64,
    pub coverage: f64,
    pub mean_max_wave: f64,
    /// Replicates with an undefined estimate or interval.
    pub failures: usize,
    /// More than half of the replicates failed.
    pub flagged: bool,
}

impl PowerCurvePoint {
    pub fn mean_ci_width(&self) -> f64 {
        self.ci_high_mean - self.ci_low_mean
    }
}

/// Runs every (fraction, replicate) pipeline. Replicate r of fraction i uses
/// streams derived from (rng_seed, i, r), so the sweep is deterministic for
/// any worker count.
pub fn run_power_sweep(net: &AttributedNetwork, cfg: &PowerSweepConfig) -> Result<Vec<PowerCurvePoint>> {
    cfg.validate()?;
    let [a, b] = net.group_sizes();
    if a == 0 || b == 0 {
        return Err(Error::input("network must contain both groups"));
    }
    let n = net.node_count();
    let mut out = Vec::with_capacity(cfg.fractions.len());
    for (i, &f) in cfg.fractions.iter().enumerate() {
        let target_n = ((f * n as f64).round() as usize).max(cfg.design.n_seeds);
        let outcomes: Vec<Option<ReplicateOutcome>> = (0..cfg.replicates as u64)
            .into_par_iter()
            .map(|r| replicate(net, cfg, target_n, &[i as u64, r]).ok())
            .collect();
        out.push(aggregate(f, target_n, &outcomes, cfg.truth_a));
    }
    Ok(out)
}

fn replicate(
    net: &AttributedNetwork,
    cfg: &PowerSweepConfig,
    target_n: usize,
    path: &[u64],
) -> Result<ReplicateOutcome> {
    let design = RdsDesign {
        target_n,
        rng_seed: derive_seed(cfg.rng_seed, &[path[0], path[1], 0]),
        ..cfg.design.clone()
    };
    let plan = BootstrapPlan {
        rng_seed: derive_seed(cfg.rng_seed, &[path[0], path[1], 1]),
        ..cfg.bootstrap
    };
    let sample = simulate_rds(net, &design)?;
    let e = estimate_total(&sample, cfg.known_b, &plan, EstimationSettings::default())?;
    Ok(ReplicateOutcome {
        estimate: e.total.point,
        ci_low: e.total.ci_low,
        ci_high: e.total.ci_high,
        max_wave: e.max_wave,
        n: e.n,
    })
}

fn aggregate(fraction: f64, target_n: usize, outcomes: &[Option<ReplicateOutcome>], truth: f64) -> PowerCurvePoint {
    let ok: Vec<&ReplicateOutcome> = outcomes.iter().flatten().collect();
    let failures = outcomes.len() - ok.len();
    let m = ok.len() as f64;
    let mean = |f: &dyn Fn(&ReplicateOutcome) -> f64| {
        if ok.is_empty() {
            f64::NAN
        } else {
            ok.iter().map(|o| f(o)).sum::<f64>() / m
        }
    };
    let mean_estimate = mean(&|o| o.estimate);
    PowerCurvePoint {
        fraction,
        target_n,
        mean_estimate,
        mean_bias: mean_estimate - truth,
        ci_low_mean: mean(&|o| o.ci_low),
        ci_high_mean: mean(&|o| o.ci_high),
        coverage: mean(&|o| f64::from(u8::from(o.ci_low <= truth && truth <= o.ci_high))),
        mean_max_wave: mean(&|o| o.max_wave as f64),
        failures,
        flagged: 2 * failures > outcomes.len(),
    }
}

pub fn write_power_csv(path: &Path, points: &[PowerCurvePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "fraction",
        "mean_estimate",
        "mean_bias",
        "ci_low_mean",
        "ci_high_mean",
        "coverage",
        "mean_max_wave",
        "failures",
    ])?;
    for p in points {
        w.write_record([
            p.fraction.to_string(),
            p.mean_estimate.to_string(),
            p.mean_bias.to_string(),
            p.ci_low_mean.to_string(),
            p.ci_high_mean.to_string(),
            p.coverage.to_string(),
            p.mean_max_wave.to_string(),
            p.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Perturbations applied to one field sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SensitivityProtocol {
    pub drop_seeds: bool,
    /// Each entry w re-estimates after removing waves below w.
    pub drop_waves: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub label: String,
    pub settings: Option<EstimationSettings>,
    /// `None` when the perturbation leaves nothing to estimate from.
    pub estimate: Option<EstimateWithCi>,
    pub n: usize,
    /// |estimate − baseline| in baseline bootstrap SEs.
    pub shift_in_se: Option<f64>,
    pub flagged: bool,
    pub note: Option<String>,
}

fn row(
    label: String,
    settings: Option<EstimationSettings>,
    res: Result<(EstimateWithCi, usize)>,
    base: Option<&EstimateWithCi>,
) -> SensitivityRow {
    match res {
        Ok((e, n)) => {
            let shift = base.map(|b| (e.point - b.point).abs() / b.se);
            SensitivityRow {
                label,
                settings,
                estimate: Some(e),
                n,
                shift_in_se: shift,
                flagged: shift.is_some_and(|s| s > 1.0),
                note: None,
            }
        }
        Err(err) => SensitivityRow {
            label,
            settings,
            estimate: None,
            n: 0,
            shift_in_se: None,
            flagged: false,
            note: Some(err.to_string()),
        },
    }
}

/// Re-estimates the total under each perturbation. The first row is the
/// unperturbed baseline; later rows are flagged when they move more than one
/// baseline SE. Perturbations that empty the sample give NA rows.
pub fn seed_sensitivity(
    sample: &RdsSample,
    known_b: u64,
    plan: &BootstrapPlan,
    protocol: &SensitivityProtocol,
) -> Result<Vec<SensitivityRow>> {
    let run = |s: EstimationSettings| estimate_total(sample, known_b, plan, s).map(|e| (e.total, e.n));
    let base = run(EstimationSettings::default())?;
    let mut rows = vec![row(
        "baseline".into(),
        Some(EstimationSettings::default()),
        Ok(base),
        None,
    )];
    let mut variants = Vec::new();
    if protocol.drop_seeds {
        variants.push(EstimationSettings {
            exclude_seeds: true,
            drop_waves: 0,
        });
    }
    for &w in &protocol.drop_waves {
        variants.push(EstimationSettings {
            exclude_seeds: false,
            drop_waves: w,
        });
    }
    for s in variants {
        let label = match (s.exclude_seeds, s.drop_waves) {
            (true, _) => "exclude_seeds".to_string(),
            (false, w) => format!("drop_waves={w}"),
        };
        rows.push(row(label, Some(s), run(s), Some(&base.0)));
    }
    Ok(rows)
}

/// Simulates one sample per seed rule from the same network and estimates each;
/// rows are compared with the first rule.
pub fn seed_rule_sensitivity(
    net: &AttributedNetwork,
    design: &RdsDesign,
    known_b: u64,
    plan: &BootstrapPlan,
    rules: &[SeedRule],
) -> Result<Vec<SensitivityRow>> {
    let mut rows: Vec<SensitivityRow> = Vec::new();
    let mut base: Option<EstimateWithCi> = None;
    for rule in rules {
        let d = RdsDesign {
            seed_rule: rule.clone(),
            ..design.clone()
        };
        let res = simulate_rds(net, &d)
            .and_then(|s| estimate_total(&s, known_b, plan, EstimationSettings::default()))
            .map(|e| (e.total, e.n));
        let label = format!(
            "seed_rule={}",
            serde_json::to_string(rule).expect("rule serializes").trim_matches('"')
        );
        let r = row(label, None, res, base.as_ref());
        if base.is_none() {
            base = r.estimate;
        }
        rows.push(r);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Group, NodeAttributeSchema, NodeAttributes};

    fn ring(n: usize) -> AttributedNetwork {
        let groups: Vec<Group> = (0..n).map(|i| if i % 3 == 0 { Group::A } else { Group::B }).collect();
        let attrs = NodeAttributes::from_groups(NodeAttributeSchema::group_only(), &groups).unwrap();
        let edges = (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 5) % n)]);
        AttributedNetwork::new(attrs, edges).unwrap()
    }

    fn small_cfg(net: &AttributedNetwork) -> PowerSweepConfig {
        let mut cfg = PowerSweepConfig::for_network(net, 3);
        cfg.fractions = vec![0.2, 0.6];
        cfg.replicates = 30;
        cfg.design.n_seeds = 3;
        cfg.bootstrap.replicates = 100;
        cfg
    }

    #[test]
    fn config_validation() {
        let net = ring(60);
        let mut cfg = small_cfg(&net);
        assert!(cfg.validate().is_ok());
        cfg.fractions = vec![0.3, 0.2];
        assert!(cfg.validate().is_err());
        cfg.fractions = vec![0.0];
        assert!(cfg.validate().is_err());
        cfg.fractions = vec![0.5];
        cfg.replicates = 10;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sweep_rows_in_order_and_deterministic() {
        let net = ring(60);
        let cfg = small_cfg(&net);
        let a = run_power_sweep(&net, &cfg).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(a[0].target_n, 12);
        assert_eq!(a[1].target_n, 36);
        assert!(a
            .iter()
            .all(|p| (0.0..=1.0).contains(&p.coverage) || p.coverage.is_nan()));
        assert_eq!(run_power_sweep(&net, &cfg).unwrap(), a);
    }

    #[test]
    fn sensitivity_rows() {
        let net = ring(60);
        let s = simulate_rds(&net, &RdsDesign::new(3, 40, 2)).unwrap();
        let plan = BootstrapPlan {
            replicates: 100,
            ..BootstrapPlan::new(1)
        };
        let protocol = SensitivityProtocol {
            drop_seeds: true,
            drop_waves: vec![0, 1, 50],
        };
        let rows = seed_sensitivity(&s, 40, &plan, &protocol).unwrap();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[2].label, "drop_waves=0");
        assert_eq!(rows[2].estimate, rows[0].estimate);
        assert_eq!(rows[2].shift_in_se, Some(0.0));
        assert!(rows[4].estimate.is_none() && rows[4].note.as_deref().unwrap().contains("empty sample"));

        let rules = [SeedRule::DegreeProportional, SeedRule::Uniform];
        let rows = seed_rule_sensitivity(&net, &RdsDesign::new(3, 40, 2), 40, &plan, &rules).unwrap();
        assert_eq!(rows[1].label, "seed_rule=uniform");
        assert!(rows[0].shift_in_se.is_none());
    }
}
