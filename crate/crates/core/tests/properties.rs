use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use proptest::prelude::*;
use rand::Rng;

use rdsnet::bootstrap::{bootstrap_replicates, percentile_ci, resample_tree, BootstrapPlan, Scheme};
use rdsnet::estimators::{hajek_mean, sh_proportion, total_from_known};
use rdsnet::rds::{cross_recruit_counts, drop_early_waves, simulate_rds, RdsDesign, RdsSample, SeedRule};
use rdsnet::rng::{rng_from_seed, task_rng};
use rdsnet::timeseries::{fit_differences, VarianceDivisor};
use rdsnet::{AttributedNetwork, Group, NodeAttributeSchema, NodeAttributes};

/// Erdős–Rényi graph with random groups; `ring` adds a Hamiltonian cycle so the graph is connected.
fn random_net(n: usize, p: f64, ring: bool, seed: u64) -> AttributedNetwork {
    let mut rng = task_rng(seed, &[]);
    let groups: Vec<Group> = (0..n)
        .map(|_| if rng.random_bool(0.4) { Group::A } else { Group::B })
        .collect();
    let attrs = NodeAttributes::from_groups(NodeAttributeSchema::group_only(), &groups).unwrap();
    let mut edges = HashSet::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random_bool(p) {
                edges.insert((i, j));
            }
        }
    }
    if ring {
        for i in 0..n {
            let j = (i + 1) % n;
            edges.insert((i.min(j), i.max(j)));
        }
    }
    AttributedNetwork::new(attrs, edges).unwrap()
}

fn net_strategy() -> impl Strategy<Value = AttributedNetwork> {
    (8usize..60, 0.02f64..0.3, any::<u64>()).prop_map(|(n, p, s)| random_net(n, p, true, s))
}

fn rss(dy: &[f64], dx: &[f64], a: f64, b: f64) -> f64 {
    dy.iter().zip(dx).map(|(y, x)| (y - a - b * x).powi(2)).sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hajek_is_degree_scale_invariant(
        rows in prop::collection::vec((0.0f64..1.0, 1u32..50), 1..40),
        c in 0.01f64..100.0,
    ) {
        let z: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let d: Vec<f64> = rows.iter().map(|r| r.1 as f64).collect();
        let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
        let a = hajek_mean(&z, &d).unwrap();
        let b = hajek_mean(&z, &scaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= lo - 1e-12 && a <= hi + 1e-12);
    }

    #[test]
    fn swapping_labels_mirrors_the_proportion(net in net_strategy(), seed in any::<u64>()) {
        let mut design = RdsDesign::new(3, net.node_count(), seed);
        design.seed_rule = SeedRule::Uniform;
        let sample = simulate_rds(&net, &design).unwrap();
        if let Ok(s) = sh_proportion(&sample) {
            let mut swapped = sample.clone();
            swapped.relabel_groups(|_, r| r.group().other());
            let t = sh_proportion(&swapped).unwrap();
            prop_assert!((s.mu_a + t.mu_a - 1.0).abs() < 1e-12);
            prop_assert!((s.mu_a + s.mu_b() - 1.0).abs() < 1e-12);
            prop_assert!(s.mu_a > 0.0 && s.mu_a < 1.0);
        }
    }

    #[test]
    fn total_increases_with_share_and_known_count(
        mu in 0.001f64..0.99,
        dmu in 0.0001f64..0.009,
        n_b in 1u64..100_000,
    ) {
        let lo = total_from_known(mu, n_b).unwrap();
        let hi = total_from_known(mu + dmu, n_b).unwrap();
        prop_assert!(hi > lo);
        prop_assert!(total_from_known(mu, n_b + 1).unwrap() > lo);
    }

    #[test]
    fn recruitment_respects_the_design(net in net_strategy(), seeds in 1usize..5, coupons in 1u32..4, frac in 0.1f64..1.0, seed in any::<u64>()) {
        let target = ((net.node_count() as f64 * frac) as usize).max(seeds);
        let mut design = RdsDesign::new(seeds, target, seed);
        design.coupon_limit = coupons;
        let sample = simulate_rds(&net, &design).unwrap();
        prop_assert!(sample.len() <= target);
        prop_assert_eq!(sample.shortfall(), sample.len() < target);
        let resp = sample.respondents();
        let ids: HashSet<u64> = resp.iter().map(|r| r.id).collect();
        prop_assert_eq!(ids.len(), resp.len());
        for (k, p) in sample.parents().iter().enumerate() {
            match p {
                None => prop_assert_eq!(resp[k].wave, 0),
                Some(p) => {
                    prop_assert!(*p < k);
                    prop_assert_eq!(resp[k].wave, resp[*p].wave + 1);
                    prop_assert!(net.has_edge(resp[*p].id as usize, resp[k].id as usize));
                }
            }
            prop_assert_eq!(resp[k].reported_degree as usize, net.neighbors(resp[k].id as usize).len());
        }
        for kids in sample.children() {
            prop_assert!(kids.len() <= coupons as usize);
        }
        // the public constructor accepts what the simulator produced
        let rebuilt = RdsSample::new(resp.to_vec(), Arc::new(sample.schema().clone()), coupons);
        prop_assert!(rebuilt.is_ok());
    }

    #[test]
    fn unlimited_coupons_reach_every_node(net in net_strategy(), seed in any::<u64>()) {
        let n = net.node_count();
        let mut design = RdsDesign::new(1, n, seed);
        design.coupon_limit = n as u32;
        let sample = simulate_rds(&net, &design).unwrap();
        prop_assert_eq!(sample.len(), n);
        prop_assert!(!sample.shortfall());
    }

    #[test]
    fn cross_recruit_counts_match_a_recount(net in net_strategy(), seed in any::<u64>()) {
        let sample = simulate_rds(&net, &RdsDesign::new(2, net.node_count() / 2 + 2, seed)).unwrap();
        let group_of: HashMap<u64, Group> = sample.respondents().iter().map(|r| (r.id, r.group())).collect();
        let mut want = [[0u64; 2]; 2];
        for r in sample.respondents() {
            if let Some(p) = r.recruiter {
                want[group_of[&p].index()][r.group().index()] += 1;
            }
        }
        prop_assert_eq!(cross_recruit_counts(&sample), want);
    }

    #[test]
    fn tree_resamples_are_valid_samples(net in net_strategy(), seed in any::<u64>()) {
        let sample = simulate_rds(&net, &RdsDesign::new(3, net.node_count(), seed)).unwrap();
        let mut rng = rng_from_seed(seed ^ 0x5EED);
        let r = resample_tree(&sample, &mut rng);
        prop_assert_eq!(r.seed_ids().len(), sample.seed_ids().len());
        let rebuilt = RdsSample::new(r.respondents().to_vec(), Arc::new(r.schema().clone()), sample.coupon_limit());
        prop_assert!(rebuilt.is_ok(), "{:?}", rebuilt.err());
        // every copy is a copy of some original respondent
        let originals: HashSet<(u32, u32, Group)> = sample
            .respondents()
            .iter()
            .map(|x| (x.wave, x.reported_degree, x.group()))
            .collect();
        for x in r.respondents() {
            prop_assert!(originals.contains(&(x.wave, x.reported_degree, x.group())));
        }
    }

    #[test]
    fn dropping_waves_keeps_a_valid_sample(net in net_strategy(), w in 0u32..3, seed in any::<u64>()) {
        let sample = simulate_rds(&net, &RdsDesign::new(2, net.node_count(), seed)).unwrap();
        if let Ok(d) = drop_early_waves(&sample, w) {
            prop_assert_eq!(d.len(), sample.respondents().iter().filter(|r| r.wave >= w).count());
            prop_assert!(RdsSample::new(d.respondents().to_vec(), Arc::new(d.schema().clone()), d.coupon_limit()).is_ok());
            prop_assert_eq!(d.max_wave() + w, sample.max_wave());
        }
    }

    #[test]
    fn percentile_interval_contains_the_point(net in net_strategy(), seed in any::<u64>(), iid in any::<bool>()) {
        let sample = simulate_rds(&net, &RdsDesign::new(3, net.node_count(), seed)).unwrap();
        let mut plan = BootstrapPlan::new(seed);
        plan.replicates = 100;
        plan.scheme = if iid { Scheme::RespondentIid } else { Scheme::Tree };
        if let Ok(reps) = bootstrap_replicates(&sample, &plan, 1, |v| {
            Ok(vec![v.respondents().map(|r| r.reported_degree as f64).sum::<f64>() / v.len() as f64])
        }) {
            let ci = percentile_ci(&reps, 0, 0.95);
            prop_assert!(ci.ci_low <= ci.point && ci.point <= ci.ci_high);
            prop_assert!(ci.se >= 0.0);
        }
    }

    #[test]
    fn arima_fit_is_least_squares(
        rows in prop::collection::vec((-500.0f64..500.0, -0.2f64..0.2), 4..20),
        shift in -1000.0f64..1000.0,
        da in -10.0f64..10.0,
        db in -100.0f64..100.0,
    ) {
        let dy: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let dx: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let Ok(fit) = fit_differences(&dy, &dx, VarianceDivisor::Unbiased) else {
            return Ok(());
        };
        let best = rss(&dy, &dx, fit.drift, fit.beta_log_shelter);
        prop_assert!((best - fit.rss).abs() <= 1e-6 * best.max(1.0));
        prop_assert!(rss(&dy, &dx, fit.drift + da, fit.beta_log_shelter + db) >= best - 1e-6 * best.max(1.0));
        // a constant added to every difference moves only the drift
        let shifted: Vec<f64> = dy.iter().map(|y| y + shift).collect();
        let g = fit_differences(&shifted, &dx, VarianceDivisor::Unbiased).unwrap();
        prop_assert!((g.drift - fit.drift - shift).abs() <= 1e-6 * (1.0 + shift.abs()));
        prop_assert!((g.beta_log_shelter - fit.beta_log_shelter).abs() <= 1e-6 * (1.0 + fit.beta_log_shelter.abs()));
        prop_assert!((g.rss - fit.rss).abs() <= 1e-6 * fit.rss.max(1.0));
        prop_assert!((fit.sigma2_unbiased * (dy.len() - 2) as f64 - fit.sigma2_ml * dy.len() as f64).abs() <= 1e-6 * fit.rss.max(1.0));
    }

    #[test]
    fn sample_csv_round_trips(net in net_strategy(), seed in any::<u64>()) {
        let sample = simulate_rds(&net, &RdsDesign::new(2, net.node_count(), seed)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        sample.write_csv(&path).unwrap();
        let back = RdsSample::read_csv(&path, sample.coupon_limit()).unwrap();
        prop_assert_eq!(back.respondents(), sample.respondents());
        prop_assert_eq!(back.parents(), sample.parents());
    }
}
