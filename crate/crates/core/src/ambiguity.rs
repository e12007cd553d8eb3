//! Flow-dependent ambiguity set: per-line failure-probability bounds
//! `gamma + beta * |f|`, the bounded-cardinality contingency support,
//! and the exact worst-case-expectation oracle used for verification.

use crate::grid::{GridInstance, LineId};
use crate::milp::{ModelBuilder, ModelError, Sense, SolverParams, VarId};
use crate::recourse::{ContingencyScenario, RecourseError, RecourseTemplate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AmbiguityError {
    #[error("{0}")]
    Config(String),
    #[error("support has {size} scenarios, above the cap of {cap}; use the decomposition path")]
    SupportTooLarge { size: u128, cap: u128 },
    #[error(transparent)]
    Recourse(#[from] RecourseError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Solver-facing configuration: ambiguity parameters, binary-expansion
/// geometry, tolerances, and big-M constants. Per-line vectors are
/// parallel to `GridInstance::lines`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DduConfig {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub k_budget: usize,
    /// Binary-expansion step `s` shared by all lines.
    pub expansion_step: f64,
    /// Digits per line; `s * (2^E - 1)` must cover the line's flow limit.
    pub expansion_digits: Vec<u32>,
    /// Relative convergence gap for the outer loop.
    pub epsilon: f64,
    /// Big-M for the weight-digit product linearization in the master.
    pub psi_big_m: f64,
    /// Big-M bounding availability-multiplied recourse duals in the
    /// subproblem.
    pub dual_big_m: f64,
    /// Maximum enumerable support size for the oracle path.
    pub support_cap: u128,
    /// Pins the vacuous lower-moment weights to zero in the master.
    pub fix_psi_lower: bool,
    pub max_iterations: usize,
}

/// Either one value for every line or a default with per-line overrides,
/// keyed by line id.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(untagged)]
pub enum PerLine {
    Uniform(f64),
    WithOverrides {
        default: f64,
        #[serde(default)]
        overrides: BTreeMap<String, f64>,
    },
}

impl PerLine {
    fn resolve(&self, g: &GridInstance, what: &str) -> Result<Vec<f64>, AmbiguityError> {
        match self {
            PerLine::Uniform(v) => Ok(vec![*v; g.num_lines()]),
            PerLine::WithOverrides { default, overrides } => {
                let mut out = vec![*default; g.num_lines()];
                for (key, v) in overrides {
                    let id: u32 = key.parse().map_err(|_| {
                        AmbiguityError::Config(format!("{what} override key '{key}' is not a line id"))
                    })?;
                    let pos = g.line_index(LineId(id)).ok_or_else(|| {
                        AmbiguityError::Config(format!("{what} override references unknown line {id}"))
                    })?;
                    out[pos] = *v;
                }
                Ok(out)
            }
        }
    }
}

/// On-disk form of [`DduConfig`] with instance-derived defaults.
#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct DduFile {
    pub gamma: PerLine,
    pub beta: PerLine,
    pub k_budget: usize,
    #[serde(default)]
    pub expansion_step: Option<f64>,
    #[serde(default)]
    pub expansion_digits: Option<u32>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub psi_big_m: Option<f64>,
    #[serde(default)]
    pub dual_big_m: Option<f64>,
    #[serde(default)]
    pub support_cap: Option<u128>,
    #[serde(default)]
    pub fix_psi_lower: Option<bool>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
}

pub const DEFAULT_EPSILON: f64 = 1e-4;
pub const DEFAULT_SUPPORT_CAP: u128 = 2_000_000;
pub const DEFAULT_MAX_ITERATIONS: usize = 500;

/// Upper bound on any recourse cost: shedding every demand plus buying
/// every injection at its cap.
pub fn recourse_cost_upper_bound(g: &GridInstance) -> f64 {
    let shed: f64 = g
        .buses
        .iter()
        .map(|b| b.demand_p + b.demand_q())
        .sum::<f64>()
        * g.loss_cost;
    let energy: f64 = g.substations.iter().map(|s| s.energy_cost * s.p_max).sum();
    shed + energy
}

impl DduConfig {
    pub fn from_file(g: &GridInstance, f: &DduFile) -> Result<Self, AmbiguityError> {
        let gamma = f.gamma.resolve(g, "gamma")?;
        let beta = f.beta.resolve(g, "beta")?;
        let f_max_max = g.lines.iter().fold(0.0f64, |m, l| m.max(l.f_max));
        let step = f.expansion_step.unwrap_or(f_max_max / 127.0);
        let digits = match f.expansion_digits {
            Some(e) => vec![e; g.num_lines()],
            None => g
                .lines
                .iter()
                .map(|l| {
                    let mut e = 7u32;
                    while step * (((1u64 << e) - 1) as f64) < l.f_max && e < 40 {
                        e += 1;
                    }
                    e
                })
                .collect(),
        };
        let cfg = DduConfig {
            gamma,
            beta,
            k_budget: f.k_budget,
            expansion_step: step,
            expansion_digits: digits,
            epsilon: f.epsilon.unwrap_or(DEFAULT_EPSILON),
            psi_big_m: f.psi_big_m.unwrap_or_else(|| recourse_cost_upper_bound(g)),
            dual_big_m: f
                .dual_big_m
                .unwrap_or_else(|| 10.0 * recourse_cost_upper_bound(g).max(1.0)),
            support_cap: f.support_cap.unwrap_or(DEFAULT_SUPPORT_CAP),
            fix_psi_lower: f.fix_psi_lower.unwrap_or(false),
            max_iterations: f.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS),
        };
        cfg.validate(g)?;
        Ok(cfg)
    }

    /// Uniform-parameter configuration with instance-derived big-Ms.
    pub fn uniform(g: &GridInstance, gamma: f64, beta: f64, k_budget: usize) -> Self {
        let file = DduFile {
            gamma: PerLine::Uniform(gamma),
            beta: PerLine::Uniform(beta),
            k_budget,
            expansion_step: None,
            expansion_digits: None,
            epsilon: None,
            psi_big_m: None,
            dual_big_m: None,
            support_cap: None,
            fix_psi_lower: None,
            max_iterations: None,
        };
        Self::from_file(g, &file).expect("uniform config is always valid")
    }

    pub fn validate(&self, g: &GridInstance) -> Result<(), AmbiguityError> {
        let n = g.num_lines();
        let err = |s: String| Err(AmbiguityError::Config(s));
        if self.gamma.len() != n || self.beta.len() != n || self.expansion_digits.len() != n {
            return err("per-line vectors do not match the instance's line count".into());
        }
        for (i, l) in g.lines.iter().enumerate() {
            if !(0.0..=1.0).contains(&self.gamma[i]) {
                return err(format!("gamma for {} outside [0, 1]", l.id));
            }
            if self.beta[i] < 0.0 {
                return err(format!("beta for {} negative", l.id));
            }
            let span = self.expansion_step * ((1u64 << self.expansion_digits[i]) - 1) as f64;
            if span + 1e-12 < l.f_max {
                return err(format!(
                    "expansion for {} spans {span:.4} < flow limit {}; raise digits or step",
                    l.id, l.f_max
                ));
            }
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return err(format!("epsilon {} outside (0, 1)", self.epsilon));
        }
        if self.k_budget > n {
            return err(format!("k_budget {} above line count {n}", self.k_budget));
        }
        Ok(())
    }

    /// A copy with every beta scaled, as used by warm starts and the
    /// monotonicity checks.
    pub fn with_beta_scale(&self, scale: f64) -> Self {
        let mut c = self.clone();
        for b in &mut c.beta {
            *b *= scale;
        }
        c
    }
}

/// Upper moment bounds `mu_l = gamma_l + beta_l * |f_l|`; the lower rows
/// of the stacked bound are identically zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentBound {
    pub mu_upper: Vec<f64>,
}

pub fn mean_bound(cfg: &DduConfig, f_p: &[f64]) -> MomentBound {
    let mu_upper = cfg
        .gamma
        .iter()
        .zip(cfg.beta.iter())
        .zip(f_p.iter())
        .map(|((g, b), f)| g + b * f.abs())
        .collect();
    MomentBound { mu_upper }
}

/// Number of availability vectors with at most `k` failures.
pub fn support_size(num_lines: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    for j in 0..=k.min(num_lines) {
        total = total.saturating_add(binomial(num_lines as u128, j as u128));
    }
    total
}

fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Enumerates every availability vector with at most `k` simultaneous
/// failures, ordered by failure count then lexicographic failed set.
pub fn enumerate_support(
    num_lines: usize,
    k: usize,
    cap: u128,
) -> Result<Vec<ContingencyScenario>, AmbiguityError> {
    let size = support_size(num_lines, k);
    if size > cap {
        return Err(AmbiguityError::SupportTooLarge { size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    out.push(ContingencyScenario::all_available(num_lines));
    let mut combo: Vec<usize> = Vec::new();
    for j in 1..=k.min(num_lines) {
        combo.clear();
        combo.extend(0..j);
        loop {
            let mut s = ContingencyScenario::all_available(num_lines);
            for &idx in combo.iter() {
                s.set_failed(idx);
            }
            out.push(s);
            // Next lexicographic combination of size j.
            let mut i = j;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                if combo[i] != i + num_lines - j {
                    combo[i] += 1;
                    for t in (i + 1)..j {
                        combo[t] = combo[t - 1] + 1;
                    }
                    break;
                }
                if i == 0 {
                    combo.clear();
                    break;
                }
            }
            if combo.is_empty() {
                break;
            }
        }
    }
    Ok(out)
}

/// Exact solution of the inner maximization over distributions, with its
/// dual certificate.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub value: f64,
    /// Optimal distribution, scenarios with nonzero mass only.
    pub worst_q: Vec<(ContingencyScenario, f64)>,
    /// Dual weights of the stacked moment rows (upper then lower).
    pub psi: Vec<f64>,
    /// Dual of the normalization row.
    pub phi: f64,
}

impl OracleOutcome {
    /// Strong-duality residual `psi' mu_full + phi - value`; zero for an
    /// exact solve.
    pub fn duality_residual(&self, bound: &MomentBound) -> f64 {
        let n = bound.mu_upper.len();
        let dual: f64 = self
            .psi
            .iter()
            .take(n)
            .zip(bound.mu_upper.iter())
            .map(|(p, mu)| p * mu)
            .sum::<f64>()
            + self.phi;
        dual - self.value
    }
}

/// Solves `max sum_a H(z, a) q(a)` over the ambiguity set by full support
/// enumeration: every recourse value is computed exactly, then one LP
/// finds the worst distribution. Intended for verification on small
/// instances; refuses above `cfg.support_cap`.
pub fn worst_case_expectation_oracle(
    g: &GridInstance,
    cfg: &DduConfig,
    template: &RecourseTemplate,
    z: &[bool],
    f_p: &[f64],
) -> Result<OracleOutcome, AmbiguityError> {
    let scenarios = enumerate_support(g.num_lines(), cfg.k_budget, cfg.support_cap)?;
    let bound = mean_bound(cfg, f_p);
    let params = SolverParams::default();
    let values: Vec<f64> = scenarios
        .par_iter()
        .map(|s| template.evaluate(z, s, &params).map(|ev| ev.cost))
        .collect::<Result<Vec<_>, _>>()?;

    let mut m = ModelBuilder::maximize();
    let qs: Vec<VarId> = (0..scenarios.len())
        .map(|i| m.add_var(format!("q[{i}]"), 0.0, f64::INFINITY, values[i]))
        .collect::<Result<Vec<_>, _>>()?;
    let n = g.num_lines();
    let mut psi_rows = Vec::with_capacity(2 * n);
    for l in 0..n {
        let terms: Vec<(VarId, f64)> = scenarios
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_failed(l))
            .map(|(i, _)| (qs[i], 1.0))
            .collect();
        psi_rows.push(m.add_row(format!("mu_hi[{l}]"), Sense::Le, bound.mu_upper[l], &terms)?);
    }
    for l in 0..n {
        let terms: Vec<(VarId, f64)> = scenarios
            .iter()
            .enumerate()
            .filter(|(_, s)| s.is_failed(l))
            .map(|(i, _)| (qs[i], -1.0))
            .collect();
        psi_rows.push(m.add_row(format!("mu_lo[{l}]"), Sense::Le, 0.0, &terms)?);
    }
    let all_q: Vec<(VarId, f64)> = qs.iter().map(|&q| (q, 1.0)).collect();
    let norm_row = m.add_row("norm", Sense::Eq, 1.0, &all_q)?;

    let res = m.solve(&params)?;
    if res.status != crate::milp::SolveStatus::Optimal {
        return Err(AmbiguityError::Config(format!(
            "distribution LP ended {:?}, but a point mass is always feasible",
            res.status
        )));
    }
    let worst_q: Vec<(ContingencyScenario, f64)> = scenarios
        .iter()
        .zip(qs.iter())
        .filter(|(_, &q)| res.value(q) > 1e-12)
        .map(|(s, &q)| (s.clone(), res.value(q)))
        .collect();
    let psi: Vec<f64> = psi_rows.iter().map(|&r| res.dual(r)).collect();
    let phi = res.dual(norm_row);
    Ok(OracleOutcome {
        value: res.objective_value,
        worst_q,
        psi,
        phi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_bound_paper_values() {
        let g = crate::synth::ring_instance();
        let mut cfg = DduConfig::uniform(&g, 0.0011, 0.0, 1);
        cfg.beta[0] = 3.0;
        let mut flows = vec![0.0; g.num_lines()];
        flows[0] = 0.02;
        let mu = mean_bound(&cfg, &flows);
        assert!((mu.mu_upper[0] - 0.0611).abs() < 1e-12);
        assert!((mu.mu_upper[1] - 0.0011).abs() < 1e-12);

        let zero = mean_bound(&cfg, &vec![0.0; g.num_lines()]);
        assert_eq!(zero.mu_upper, cfg.gamma);

        cfg.beta[0] = 0.0;
        let any = mean_bound(&cfg, &flows);
        assert!((any.mu_upper[0] - 0.0011).abs() < 1e-15);
    }

    #[test]
    fn support_counts() {
        assert_eq!(enumerate_support(5, 2, 1 << 20).unwrap().len(), 16);
        assert_eq!(enumerate_support(3, 3, 1 << 20).unwrap().len(), 8);
        assert_eq!(enumerate_support(57, 1, 1 << 20).unwrap().len(), 58);
    }

    #[test]
    fn support_cap_refusal() {
        match enumerate_support(57, 5, 1000) {
            Err(AmbiguityError::SupportTooLarge { size, cap }) => {
                assert!(size > cap);
            }
            other => panic!("expected refusal, got {other:?}"),
        }
    }

    #[test]
    fn support_has_no_duplicates_and_respects_budget() {
        let scenarios = enumerate_support(6, 2, 1 << 20).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for s in &scenarios {
            assert!(s.failed_count() <= 2);
            assert!(seen.insert(format!("{s:?}")));
        }
        assert_eq!(scenarios.len(), 1 + 6 + 15);
    }

    #[test]
    fn expansion_span_validated() {
        let g = crate::synth::ring_instance();
        let file = DduFile {
            gamma: PerLine::Uniform(0.001),
            beta: PerLine::Uniform(0.0),
            k_budget: 1,
            expansion_step: Some(1e-4),
            expansion_digits: Some(3),
            epsilon: None,
            psi_big_m: None,
            dual_big_m: None,
            support_cap: None,
            fix_psi_lower: None,
            max_iterations: None,
        };
        assert!(matches!(
            DduConfig::from_file(&g, &file),
            Err(AmbiguityError::Config(_))
        ));
    }

    #[test]
    fn oracle_two_scenario_hand_dual() {
        // Two-bus feeder: H(all up) = 100 (energy), H(line down) = 3000
        // (full shed). With mu = 0.2 the worst distribution pushes all
        // allowed mass onto the failure: value = 0.8*100 + 0.2*3000 = 680,
        // dual certificate psi = 2900, phi = 100.
        let g = crate::synth::two_bus_instance(2.0);
        let tmpl = RecourseTemplate::new(&g);
        let mut cfg = DduConfig::uniform(&g, 0.2, 0.0, 1);
        cfg.support_cap = 1000;
        let out = worst_case_expectation_oracle(&g, &cfg, &tmpl, &[], &[0.0]).unwrap();
        assert!((out.value - 680.0).abs() < 1e-5, "value {}", out.value);
        assert!((out.psi[0] - 2900.0).abs() < 1e-4, "psi {:?}", out.psi);
        assert!((out.phi - 100.0).abs() < 1e-4, "phi {}", out.phi);
        let bound = mean_bound(&cfg, &[0.0]);
        assert!(out.duality_residual(&bound).abs() < 1e-6);
        let mass: f64 = out.worst_q.iter().map(|(_, q)| q).sum();
        assert!((mass - 1.0).abs() < 1e-9);
    }

    #[test]
    fn oracle_mu_zero_is_point_mass() {
        let g = crate::synth::two_bus_instance(2.0);
        let tmpl = RecourseTemplate::new(&g);
        let cfg = DduConfig::uniform(&g, 0.0, 0.0, 1);
        let out = worst_case_expectation_oracle(&g, &cfg, &tmpl, &[], &[0.0]).unwrap();
        assert!((out.value - 100.0).abs() < 1e-6);
        assert!((out.phi - 100.0).abs() < 1e-6);
    }

    #[test]
    fn oracle_k_zero_equals_all_ones_recourse() {
        let g = crate::synth::ring_instance();
        let tmpl = RecourseTemplate::new(&g);
        let cfg = DduConfig::uniform(&g, 0.5, 0.0, 0);
        let z = g.initial_switch_state();
        let out =
            worst_case_expectation_oracle(&g, &cfg, &tmpl, &z, &vec![0.0; g.num_lines()]).unwrap();
        let h1 = tmpl
            .evaluate(
                &z,
                &ContingencyScenario::all_available(g.num_lines()),
                &SolverParams::default(),
            )
            .unwrap();
        assert!((out.value - h1.cost).abs() < 1e-6);
    }

    #[test]
    fn oracle_value_monotone_in_beta_and_above_nominal() {
        let g = crate::synth::ring_instance();
        let tmpl = RecourseTemplate::new(&g);
        let z = g.initial_switch_state();
        let flows = vec![0.3; g.num_lines()];
        let h1 = tmpl
            .evaluate(
                &z,
                &ContingencyScenario::all_available(g.num_lines()),
                &SolverParams::default(),
            )
            .unwrap();
        let mut last = f64::NEG_INFINITY;
        for scale in [0.0, 0.5, 1.0, 2.0] {
            let cfg = DduConfig::uniform(&g, 0.01, 0.05, 2).with_beta_scale(scale);
            let out = worst_case_expectation_oracle(&g, &cfg, &tmpl, &z, &flows).unwrap();
            assert!(out.value >= h1.cost - 1e-8);
            assert!(out.value >= last - 1e-9, "not monotone: {} < {last}", out.value);
            last = out.value;
            let bound = mean_bound(&cfg, &flows);
            assert!(out.duality_residual(&bound).abs() <= 1e-6 * (1.0 + out.value.abs()));
        }
    }

    #[test]
    fn oracle_support_of_worst_q_is_small() {
        // A basic optimal distribution needs at most |L|+1 support points.
        let g = crate::synth::ring_instance();
        let tmpl = RecourseTemplate::new(&g);
        let cfg = DduConfig::uniform(&g, 0.02, 0.0, 2);
        let z = g.initial_switch_state();
        let out =
            worst_case_expectation_oracle(&g, &cfg, &tmpl, &z, &vec![0.1; g.num_lines()]).unwrap();
        assert!(out.worst_q.len() <= g.num_lines() + 1, "{} support points", out.worst_q.len());
    }

    #[test]
    fn per_line_overrides_resolve() {
        let g = crate::synth::ring_instance();
        let some_line = g.lines[1].id.0;
        let file = DduFile {
            gamma: PerLine::WithOverrides {
                default: 0.001,
                overrides: [(some_line.to_string(), 0.05)].into_iter().collect(),
            },
            beta: PerLine::Uniform(0.0),
            k_budget: 0,
            expansion_step: None,
            expansion_digits: None,
            epsilon: None,
            psi_big_m: None,
            dual_big_m: None,
            support_cap: None,
            fix_psi_lower: None,
            max_iterations: None,
        };
        let cfg = DduConfig::from_file(&g, &file).unwrap();
        assert_eq!(cfg.gamma[1], 0.05);
        assert_eq!(cfg.gamma[0], 0.001);
    }
}
