//! Out-of-sample evaluation: freeze the switching decision, recompute
//! flows, turn the ambiguity bounds into per-line failure probabilities,
//! sample Bernoulli outage scenarios, and report loss-of-load statistics.
//!
//! Sampling uses ChaCha8 seeded explicitly, drawing one uniform per line
//! per scenario in line order, so corpora are bit-reproducible across
//! platforms and releases. Scenarios deliberately live in the full
//! hypercube: the out-of-sample test does not restrict simultaneous
//! failures to the optimization support.

use crate::ambiguity::DduConfig;
use crate::grid::{GridInstance, LineId};
use crate::milp::{ModelBuilder, SolverParams};
use crate::pre_contingency::{build_first_stage, extract_first_stage, FirstStageError, FirstStageSolution};
use crate::recourse::{ContingencyScenario, RecourseError, RecourseTemplate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MonteCarloError {
    #[error(transparent)]
    FirstStage(#[from] FirstStageError),
    #[error(transparent)]
    Recourse(#[from] RecourseError),
    #[error(transparent)]
    Model(#[from] crate::milp::ModelError),
    #[error("switching vector violates forbidden pattern {0:?}")]
    ForbiddenPattern(Vec<LineId>),
    #[error("switching vector length {got}, expected {expected}")]
    BadSwitchVector { got: usize, expected: usize },
    #[error("sample count must be at least 1")]
    NoSamples,
}

/// Per-scenario losses and their summary statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutOfSampleReport {
    /// Sampling probability per line.
    pub probabilities: BTreeMap<LineId, f64>,
    pub samples: usize,
    /// Active loss of load per scenario, % of total active demand,
    /// in scenario order.
    pub loss_of_load_pct: Vec<f64>,
    /// Reactive shed per scenario, % of total reactive demand (zero when
    /// the instance carries no reactive demand).
    pub reactive_loss_pct: Vec<f64>,
    pub mean_pct: f64,
    /// Mean over the worst 5% of scenarios.
    pub cvar95_pct: f64,
    /// `(probability, loss%)` pairs: the k-th largest loss against k/n.
    pub inverse_cdf: Vec<(f64, f64)>,
    pub mean_cost: f64,
}

/// Re-dispatches with the switching decision pinned (no worst-case term),
/// yielding the flows that set the sampling probabilities.
pub fn frozen_flow_solve(
    g: &GridInstance,
    z: &[bool],
) -> Result<FirstStageSolution, MonteCarloError> {
    let sw = g.switchable_positions();
    if z.len() != sw.len() {
        return Err(MonteCarloError::BadSwitchVector { got: z.len(), expected: sw.len() });
    }
    for pattern in &g.forbidden_patterns {
        let all_closed = pattern.iter().all(|lid| {
            let pos = g.line_index(*lid).unwrap();
            let k = sw.iter().position(|&p| p == pos).unwrap();
            z[k]
        });
        if all_closed {
            return Err(MonteCarloError::ForbiddenPattern(pattern.clone()));
        }
    }
    let mut m = ModelBuilder::minimize();
    let handles = build_first_stage(g, &mut m, Some(z))?;
    let res = m.solve(&SolverParams::default())?;
    Ok(extract_first_stage(g, &handles, &res)?)
}

/// Sampling probability per line: the ambiguity upper bound taken as the
/// true probability, clipped into [0, 1].
pub fn line_failure_probabilities(cfg: &DduConfig, f_p: &[f64]) -> Vec<f64> {
    cfg.gamma
        .iter()
        .zip(cfg.beta.iter())
        .zip(f_p.iter())
        .map(|((g, b), f)| (g + b * f.abs()).clamp(0.0, 1.0))
        .collect()
}

/// Draws `n` Bernoulli outage scenarios and evaluates the recourse on
/// each. Deterministic for a given `(instance, z, seed, n)`.
pub fn simulate(
    g: &GridInstance,
    cfg: &DduConfig,
    z: &[bool],
    n: usize,
    seed: u64,
) -> Result<OutOfSampleReport, MonteCarloError> {
    if n == 0 {
        return Err(MonteCarloError::NoSamples);
    }
    let frozen = frozen_flow_solve(g, z)?;
    let flows = frozen.flow_vector(g);
    let probs = line_failure_probabilities(cfg, &flows);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_lines = g.num_lines();
    let scenarios: Vec<ContingencyScenario> = (0..n)
        .map(|_| {
            let mut s = ContingencyScenario::all_available(num_lines);
            for (l, &p) in probs.iter().enumerate() {
                if rng.random::<f64>() < p {
                    s.set_failed(l);
                }
            }
            s
        })
        .collect();

    let template = RecourseTemplate::new(g);
    let params = SolverParams::default();
    let evals = scenarios
        .par_iter()
        .map(|s| template.evaluate(z, s, &params))
        .collect::<Result<Vec<_>, _>>()?;

    let total_p = g.total_demand_p();
    let total_q: f64 = g.buses.iter().map(|b| b.demand_q()).sum();
    let loss_of_load_pct: Vec<f64> = evals
        .iter()
        .map(|ev| 100.0 * ev.shed_p / total_p.max(f64::MIN_POSITIVE))
        .collect();
    let reactive_loss_pct: Vec<f64> = evals
        .iter()
        .map(|ev| if total_q > 0.0 { 100.0 * ev.shed_q / total_q } else { 0.0 })
        .collect();
    let mean_cost = evals.iter().map(|ev| ev.cost).sum::<f64>() / n as f64;
    let mean_pct = loss_of_load_pct.iter().sum::<f64>() / n as f64;

    let mut sorted = loss_of_load_pct.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let tail = (0.05 * n as f64).ceil().max(1.0) as usize;
    let cvar95_pct = sorted.iter().take(tail).sum::<f64>() / tail as f64;
    let inverse_cdf: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(k, &loss)| ((k + 1) as f64 / n as f64, loss))
        .collect();

    let probabilities = g
        .lines
        .iter()
        .zip(probs.iter())
        .map(|(line, &p)| (line.id, p))
        .collect();

    Ok(OutOfSampleReport {
        probabilities,
        samples: n,
        loss_of_load_pct,
        reactive_loss_pct,
        mean_pct,
        cvar95_pct,
        inverse_cdf,
        mean_cost,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ambiguity::DduConfig;
    use crate::synth;

    #[test]
    fn frozen_solve_matches_definition() {
        let g = synth::ring_instance();
        let z = g.initial_switch_state();
        let sol = frozen_flow_solve(&g, &z).unwrap();
        assert_eq!(sol.switch_vector(&g), z);
        assert!(sol.cost_switch.abs() < 1e-12);

        let g2 = synth::two_bus_instance(2.0);
        let sol2 = frozen_flow_solve(&g2, &[]).unwrap();
        assert!((sol2.f_p[&LineId(1)] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn forbidden_pattern_rejected() {
        let g = synth::ring_instance();
        let sw = g.switchable_positions().len();
        let all_closed = vec![true; sw];
        match frozen_flow_solve(&g, &all_closed) {
            Err(MonteCarloError::ForbiddenPattern(_)) => {}
            other => panic!("expected pattern violation, got {other:?}"),
        }
    }

    #[test]
    fn probability_computation_clips() {
        let g = synth::two_bus_instance(2.0);
        let mut cfg = DduConfig::uniform(&g, 0.0011, 0.0, 1);
        assert_eq!(line_failure_probabilities(&cfg, &[0.9])[0], 0.0011);
        cfg.beta[0] = 3.0;
        let p = line_failure_probabilities(&cfg, &[0.5]);
        assert_eq!(p[0], 1.0);
        assert_eq!(line_failure_probabilities(&cfg, &[0.0])[0], 0.0011);
    }

    #[test]
    fn zero_probability_means_zero_loss() {
        let g = synth::ring_instance();
        let cfg = DduConfig::uniform(&g, 0.0, 0.0, 1);
        let z = g.initial_switch_state();
        let rep = simulate(&g, &cfg, &z, 50, 7).unwrap();
        assert_eq!(rep.mean_pct, 0.0);
        assert_eq!(rep.cvar95_pct, 0.0);
        assert!(rep.loss_of_load_pct.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn certain_failure_sheds_the_whole_load() {
        let g = synth::two_bus_instance(2.0);
        let cfg = DduConfig::uniform(&g, 1.0, 0.0, 1);
        let rep = simulate(&g, &cfg, &[], 20, 123).unwrap();
        assert!(rep.loss_of_load_pct.iter().all(|&x| (x - 100.0).abs() < 1e-9));
        assert!((rep.mean_pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn reproducible_and_seed_sensitive() {
        let g = synth::ring_instance();
        let cfg = DduConfig::uniform(&g, 0.05, 0.1, 1);
        let z = g.initial_switch_state();
        let a = simulate(&g, &cfg, &z, 100, 42).unwrap();
        let b = simulate(&g, &cfg, &z, 100, 42).unwrap();
        assert_eq!(a.loss_of_load_pct, b.loss_of_load_pct);
        assert_eq!(a.mean_cost.to_bits(), b.mean_cost.to_bits());
        let c = simulate(&g, &cfg, &z, 100, 43).unwrap();
        assert_ne!(a.loss_of_load_pct, c.loss_of_load_pct);
    }

    #[test]
    fn cvar_dominates_mean_and_matches_sort_oracle() {
        let g = synth::ring_instance();
        let cfg = DduConfig::uniform(&g, 0.08, 0.2, 2);
        let z = g.initial_switch_state();
        let rep = simulate(&g, &cfg, &z, 400, 1).unwrap();
        assert!(rep.cvar95_pct >= rep.mean_pct - 1e-12);
        let mut sorted = rep.loss_of_load_pct.clone();
        sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let tail = 20; // ceil(0.05 * 400)
        let oracle = sorted.iter().take(tail).sum::<f64>() / tail as f64;
        assert!((rep.cvar95_pct - oracle).abs() < 1e-12);
        // Inverse CDF is nonincreasing in loss as probability grows.
        for w in rep.inverse_cdf.windows(2) {
            assert!(w[0].0 < w[1].0);
            assert!(w[0].1 >= w[1].1);
        }
    }

    #[test]
    fn empirical_frequencies_within_binomial_bounds() {
        let g = synth::ring_instance();
        let cfg = DduConfig::uniform(&g, 0.15, 0.0, 1);
        let z = g.initial_switch_state();
        let n = 2000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let flows = frozen_flow_solve(&g, &z).unwrap().flow_vector(&g);
        let probs = line_failure_probabilities(&cfg, &flows);
        // Re-draw with the documented order and count failures per line.
        let mut counts = vec![0usize; g.num_lines()];
        for _ in 0..n {
            for (l, &p) in probs.iter().enumerate() {
                if rng.random::<f64>() < p {
                    counts[l] += 1;
                }
            }
        }
        for (l, &p) in probs.iter().enumerate() {
            let freq = counts[l] as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "line {l}: freq {freq} vs p {p} (3s = {})",
                3.0 * sigma
            );
        }
    }
}
