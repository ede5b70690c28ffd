use serde::{Deserialize, Serialize};

use super::chain::{dyad_count, Chain, SimulationControl};
use super::{ErgmModel, ErgmTerm};
use crate::error::{Error, Result};
use crate::graph::NodeAttributes;
use crate::linalg::{mean_cov, solve};

/// Robbins-Monro schedule and stopping rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitControl {
    pub max_iter: usize,
    /// Statistic draws per iteration used to estimate E_θ[s].
    pub draws_per_iter: usize,
    /// Step size a_t = a0 / (1 + t / tau).
    pub a0: f64,
    pub tau: f64,
    /// Converged when every |mean − target| ≤ tol_se · (standard error of the mean).
    pub tol_se: f64,
    /// Per-iteration cap on |Δθ_k|.
    pub max_step: f64,
    /// Start a free `edges` coefficient at the logit of the target density.
    pub init_edges_from_density: bool,
}

impl Default for FitControl {
    fn default() -> Self {
        FitControl {
            max_iter: 200,
            draws_per_iter: 20,
            a0: 0.1,
            tau: 20.0,
            tol_se: 0.5,
            max_step: 1.0,
            init_edges_from_density: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ErgmModel,
    pub converged: bool,
    pub iterations: usize,
    /// Simulated mean of the free statistics at the last iteration.
    pub mean_stats: Vec<f64>,
}

/// Moment-matching fit of the free coefficients of `init` to `target`.
///
/// `target` has one entry per non-fixed term, in term order. Each iteration
/// draws statistics from a warm-started chain and moves θ by
/// a_t · Σ⁻¹ (target − mean), where Σ is the simulated statistic covariance.
/// By default a free `edges` coefficient starts at the dyad-independent logit
/// of the target density. Non-convergence is reported through the flag; in that case
/// the returned coefficients are the average over the second half of the run.
pub fn fit_moment_matching(
    target: &[f64],
    init: &ErgmModel,
    attrs: &NodeAttributes,
    ctl: &SimulationControl,
    fit: &FitControl,
) -> Result<FitResult> {
    init.validate()?;
    ctl.validate()?;
    let free = init.free_indices();
    if target.len() != free.len() {
        return Err(Error::input(format!(
            "{} target statistics for {} free terms",
            target.len(),
            free.len()
        )));
    }
    if fit.draws_per_iter < 2 || fit.max_iter == 0 {
        return Err(Error::input("fit needs max_iter >= 1 and draws_per_iter >= 2"));
    }
    let mut theta = init.theta.clone();
    let dyads = dyad_count(attrs.len()).max(1) as f64;
    let fixed_edges: f64 = init
        .terms
        .iter()
        .zip(&init.theta)
        .filter(|(t, _)| t.is_offset())
        .map(|(_, th)| th)
        .sum();
    for (slot, &k) in free.iter().enumerate() {
        if fit.init_edges_from_density && init.terms[k] == ErgmTerm::Edges {
            let p = (target[slot] / dyads).clamp(0.1 / dyads, 1.0 - 0.1 / dyads);
            theta[k] = (p / (1.0 - p)).ln() - fixed_edges;
        }
    }

    let mut model = init.clone();
    model.theta = theta.clone();
    let mut chain = Chain::new(&model, attrs, ctl.rng_seed)?;
    chain.run(ctl.burn_in);

    let m = fit.draws_per_iter;
    let mut history: Vec<Vec<f64>> = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut mean = vec![0.0; free.len()];
    for t in 0..fit.max_iter {
        iterations = t + 1;
        let draws: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                chain.run(ctl.thin);
                free.iter().map(|&k| chain.stats()[k]).collect()
            })
            .collect();
        let (mu, cov) = mean_cov(&draws);
        mean = mu;
        let gap: Vec<f64> = target.iter().zip(&mean).map(|(a, b)| a - b).collect();
        let within = gap
            .iter()
            .enumerate()
            .all(|(k, g)| g.abs() <= fit.tol_se * (cov[k][k] / m as f64).sqrt());
        if within {
            converged = true;
            break;
        }

        let mut precond = cov.clone();
        for (k, row) in precond.iter_mut().enumerate() {
            row[k] += 1e-3 * (1.0 + cov[k][k]);
        }
        let dir = solve(precond, gap.clone()).unwrap_or(gap);
        let a_t = fit.a0 / (1.0 + t as f64 / fit.tau);
        for (slot, &k) in free.iter().enumerate() {
            theta[k] += (a_t * dir[slot]).clamp(-fit.max_step, fit.max_step);
        }
        chain.set_theta(&theta)?;
        history.push(theta.clone());
    }

    if !converged && history.len() >= 2 {
        let tail = &history[history.len() / 2..];
        for &k in &free {
            theta[k] = tail.iter().map(|th| th[k]).sum::<f64>() / tail.len() as f64;
        }
    }
    model.theta = theta;
    Ok(FitResult {
        model,
        converged,
        iterations,
        mean_stats: mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Group, NodeAttributeSchema};

    #[test]
    fn zero_edge_target_drives_theta_negative() {
        let attrs = NodeAttributes::from_groups(NodeAttributeSchema::group_only(), &[Group::A; 60]).unwrap();
        let ctl = SimulationControl::for_nodes(60, 4);
        let r = fit_moment_matching(
            &[0.0],
            &ErgmModel::edges_only(0.0),
            &attrs,
            &ctl,
            &FitControl::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.model.theta[0] < -7.0, "{:?}", r.model.theta);
        assert!(r.mean_stats[0] < 0.5);
    }

    #[test]
    fn target_length_checked() {
        let attrs = NodeAttributes::from_groups(NodeAttributeSchema::group_only(), &[Group::A; 10]).unwrap();
        let ctl = SimulationControl::for_nodes(10, 4);
        assert!(fit_moment_matching(
            &[1.0, 2.0],
            &ErgmModel::edges_only(0.0),
            &attrs,
            &ctl,
            &FitControl::default()
        )
        .is_err());
    }
}
