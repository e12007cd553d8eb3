//! Depth-first branch-and-bound over the simplex relaxation.
//!
//! A single [`LpEngine`] serves the whole tree: each node rebinds
//! variable bounds and re-optimizes from the basis left by the previous
//! node (dual simplex restoration), so node relaxations cost a handful
//! of pivots instead of a cold solve.
//!
//! Children are explored nearest-rounded-value first, which amounts to
//! diving for an early incumbent. Branching variables come from the
//! highest caller-assigned priority class among fractional candidates;
//! within a class, pseudocosts learned from observed bound degradations
//! pick the variable (product rule), falling back to fractionality until
//! history exists.

use super::simplex::LpEngine;
use super::{ModelBuilder, ModelError, Objective, SolveResult, SolveStatus, SolverParams};
use std::time::Instant;

struct Node {
    overrides: Vec<(f64, f64)>,
    parent_bound: f64,
    /// (variable, per-unit fractional distance, direction up) of the
    /// branch that created this node, for pseudocost updates.
    branched: Option<(usize, f64, bool)>,
}

#[derive(Clone, Copy, Default)]
struct PseudoCost {
    sum: f64,
    count: usize,
}

impl PseudoCost {
    fn observe(&mut self, degradation_per_unit: f64) {
        self.sum += degradation_per_unit.max(0.0);
        self.count += 1;
    }
    fn estimate(&self, fallback: f64) -> f64 {
        if self.count == 0 {
            fallback
        } else {
            self.sum / self.count as f64
        }
    }
}

pub(crate) fn solve_milp(
    model: &ModelBuilder,
    params: &SolverParams,
) -> Result<SolveResult, ModelError> {
    let n = model.vars.len();
    let maximize = model.objective == Objective::Maximize;
    let sgn = if maximize { -1.0 } else { 1.0 };
    let int_vars: Vec<usize> = (0..n).filter(|&j| model.vars[j].integer).collect();
    let base: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();
    let start = Instant::now();

    let mut engine = LpEngine::new(model)?;
    let mut stack = vec![Node {
        overrides: base,
        parent_bound: f64::NEG_INFINITY,
        branched: None,
    }];
    let mut pc_down = vec![PseudoCost::default(); n];
    let mut pc_up = vec![PseudoCost::default(); n];
    let mut pc_global = PseudoCost::default();
    let mut incumbent: Option<SolveResult> = None;
    let mut incumbent_val = f64::INFINITY;
    let mut nodes = 0usize;
    let mut simplex_iters = 0usize;
    let mut hit_limit = false;

    while let Some(node) = stack.pop() {
        if nodes >= params.node_limit {
            hit_limit = true;
            break;
        }
        if let Some(limit) = params.time_limit {
            if start.elapsed().as_secs_f64() > limit {
                hit_limit = true;
                break;
            }
        }
        let prune_at = incumbent_val - prune_margin(incumbent_val, params);
        if node.parent_bound >= prune_at {
            continue;
        }
        nodes += 1;
        let res = engine.solve(params, &node.overrides)?;
        simplex_iters = res.simplex_iterations;
        match res.status {
            SolveStatus::Infeasible => continue,
            SolveStatus::Unbounded => {
                // Integer restrictions cannot repair an unbounded relaxation
                // in this model family (all integers are bounded).
                return Ok(SolveResult {
                    status: SolveStatus::Unbounded,
                    objective_value: res.objective_value,
                    primal_values: res.primal_values,
                    dual_values: None,
                    reduced_costs: None,
                    gap: 0.0,
                    simplex_iterations: simplex_iters,
                    nodes,
                });
            }
            SolveStatus::Optimal => {
                if std::env::var("GRIDFIRE_BB_CHECK").is_ok() {
                    let viol = model.max_violation_bounded(&res.primal_values, &node.overrides);
                    if viol > 1e-5 {
                        eprintln!("node {nodes}: OPTIMAL but violation {viol:.3e}");
                        std::process::exit(3);
                    }
                }
            }
            SolveStatus::Limit => unreachable!("simplex does not report Limit"),
        }
        let bound = sgn * res.objective_value;
        if let (Some((j, unit, up)), true) = (node.branched, node.parent_bound.is_finite()) {
            let per_unit = (bound - node.parent_bound) / unit.max(1e-6);
            let pc = if up { &mut pc_up[j] } else { &mut pc_down[j] };
            pc.observe(per_unit);
            pc_global.observe(per_unit);
        }
        if bound >= prune_at {
            continue;
        }
        let frac = pick_branch_var(
            model,
            &int_vars,
            &res.primal_values,
            params.integrality_tol,
            &pc_down,
            &pc_up,
            &pc_global,
        );
        match frac {
            None => {
                if bound < incumbent_val {
                    incumbent_val = bound;
                    incumbent = Some(res);
                }
            }
            Some(j) => {
                let x = res.primal_values[j];
                let floor = x.floor();
                let ceil = x.ceil();
                let f = x - floor;
                let mut down = node.overrides.clone();
                down[j].1 = down[j].1.min(floor);
                let mut up = node.overrides;
                up[j].0 = up[j].0.max(ceil);
                let down_node = Node {
                    overrides: down,
                    parent_bound: bound,
                    branched: Some((j, f, false)),
                };
                let up_node = Node {
                    overrides: up,
                    parent_bound: bound,
                    branched: Some((j, 1.0 - f, true)),
                };
                let (near, far) =
                    if f <= 0.5 { (down_node, up_node) } else { (up_node, down_node) };
                stack.push(far);
                stack.push(near);
            }
        }
    }

    match incumbent {
        Some(mut res) => {
            let gap = if hit_limit {
                let open = stack
                    .iter()
                    .map(|nd| nd.parent_bound)
                    .fold(f64::INFINITY, f64::min);
                if open.is_finite() {
                    ((incumbent_val - open) / incumbent_val.abs().max(1.0)).max(0.0)
                } else {
                    0.0
                }
            } else {
                0.0
            };
            res.status = if hit_limit && gap > params.mip_gap {
                SolveStatus::Limit
            } else {
                SolveStatus::Optimal
            };
            res.gap = gap;
            res.dual_values = None;
            res.reduced_costs = None;
            res.nodes = nodes;
            res.simplex_iterations = simplex_iters;
            Ok(res)
        }
        None => Ok(SolveResult {
            status: if hit_limit { SolveStatus::Limit } else { SolveStatus::Infeasible },
            objective_value: f64::NAN,
            primal_values: vec![0.0; n],
            dual_values: None,
            reduced_costs: None,
            gap: f64::INFINITY,
            simplex_iterations: simplex_iters,
            nodes,
        }),
    }
}

fn prune_margin(incumbent_val: f64, params: &SolverParams) -> f64 {
    if !incumbent_val.is_finite() {
        return 0.0;
    }
    let rel = params.mip_gap * incumbent_val.abs();
    rel.max(1e-9 * (1.0 + incumbent_val.abs()))
}

#[allow(clippy::too_many_arguments)]
fn pick_branch_var(
    model: &ModelBuilder,
    int_vars: &[usize],
    x: &[f64],
    int_tol: f64,
    pc_down: &[PseudoCost],
    pc_up: &[PseudoCost],
    pc_global: &PseudoCost,
) -> Option<usize> {
    // Highest priority class among fractional variables.
    let mut top_priority = i32::MIN;
    for &j in int_vars {
        let frac = (x[j] - x[j].round()).abs();
        if frac > int_tol {
            top_priority = top_priority.max(model.vars[j].branch_priority);
        }
    }
    if top_priority == i32::MIN {
        return None;
    }
    let global = pc_global.estimate(1.0).max(1e-9);
    let mut best: Option<(f64, f64, usize)> = None; // (score, frac, index)
    for &j in int_vars {
        if model.vars[j].branch_priority != top_priority {
            continue;
        }
        let f = x[j] - x[j].floor();
        let frac = f.min(1.0 - f);
        if frac <= int_tol {
            continue;
        }
        let down = pc_down[j].estimate(global) * f;
        let up = pc_up[j].estimate(global) * (1.0 - f);
        let score = down.max(1e-9) * up.max(1e-9);
        let candidate = (score, frac, j);
        best = match best {
            None => Some(candidate),
            Some(cur) => {
                let replace = candidate.0 > cur.0 * (1.0 + 1e-9)
                    || ((candidate.0 - cur.0).abs() <= 1e-9 * cur.0.abs()
                        && (candidate.1 > cur.1 + 1e-12
                            || ((candidate.1 - cur.1).abs() <= 1e-12 && candidate.2 < cur.2)));
                Some(if replace { candidate } else { cur })
            }
        };
    }
    best.map(|(_, _, j)| j)
}

#[cfg(test)]
mod tests {
    use super::super::{ModelBuilder, Sense, SolveStatus, SolverParams};

    #[test]
    fn integrality_changes_optimum() {
        let mut m = ModelBuilder::maximize();
        let x = m.add_binary("x", 1.0).unwrap();
        let y = m.add_binary("y", 1.0).unwrap();
        m.add_row("pack", Sense::Le, 1.5, &[(x, 1.0), (y, 1.0)]).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn infeasible_integer_model() {
        let mut m = ModelBuilder::minimize();
        let x = m.add_binary("x", 1.0).unwrap();
        m.add_row("gap", Sense::Eq, 0.5, &[(x, 1.0)]).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn branch_priority_respected() {
        let mut m = ModelBuilder::maximize();
        let x = m.add_binary("x", 1.0).unwrap();
        let y = m.add_binary("y", 1.0).unwrap();
        m.add_row("choose", Sense::Le, 1.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        m.set_branch_priority(y, 5);
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn mixed_continuous_integer() {
        let mut m = ModelBuilder::maximize();
        let z = m.add_binary("z", 3.0).unwrap();
        let w = m.add_var("w", 0.0, f64::INFINITY, 1.0).unwrap();
        m.add_row("cap", Sense::Le, 2.5, &[(w, 1.0), (z, 2.0)]).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 3.5).abs() < 1e-8);
        assert!(res.value(z) > 0.5);
        assert!((res.value(w) - 0.5).abs() < 1e-7);
    }

    #[test]
    fn randomized_milps_match_exhaustive_enumeration() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(0xb0b);
        for trial in 0..80 {
            let nb = rng.random_range(2..=8);
            let nr = rng.random_range(1..=6);
            let mut m = ModelBuilder::minimize();
            let mut vars = Vec::new();
            let mut costs = Vec::new();
            for j in 0..nb {
                let c = rng.random_range(-5.0..5.0);
                vars.push(m.add_binary(format!("b{j}"), c).unwrap());
                costs.push(c);
            }
            let mut rows = Vec::new();
            for i in 0..nr {
                let mut terms = Vec::new();
                let mut coefs = vec![0.0; nb];
                for (j, &v) in vars.iter().enumerate() {
                    if rng.random_bool(0.7) {
                        let a = rng.random_range(-3.0..3.0);
                        terms.push((v, a));
                        coefs[j] = a;
                    }
                }
                let sense = if rng.random_bool(0.5) { Sense::Le } else { Sense::Ge };
                let rhs = rng.random_range(-2.0..3.0);
                m.add_row(format!("r{i}"), sense, rhs, &terms).unwrap();
                rows.push((sense, rhs, coefs));
            }
            let res = m.solve(&SolverParams::default()).unwrap();

            // Exhaustive check over all 2^nb assignments.
            let mut best: Option<f64> = None;
            for mask in 0..(1u32 << nb) {
                let feasible = rows.iter().all(|(sense, rhs, coefs)| {
                    let act: f64 = coefs
                        .iter()
                        .enumerate()
                        .map(|(j, a)| if mask >> j & 1 == 1 { *a } else { 0.0 })
                        .sum();
                    match sense {
                        Sense::Le => act <= rhs + 1e-9,
                        Sense::Ge => act >= rhs - 1e-9,
                        Sense::Eq => (act - rhs).abs() <= 1e-9,
                    }
                });
                if feasible {
                    let val: f64 = costs
                        .iter()
                        .enumerate()
                        .map(|(j, c)| if mask >> j & 1 == 1 { *c } else { 0.0 })
                        .sum();
                    best = Some(best.map_or(val, |b: f64| b.min(val)));
                }
            }
            match best {
                None => assert_eq!(res.status, SolveStatus::Infeasible, "trial {trial}"),
                Some(val) => {
                    assert_eq!(res.status, SolveStatus::Optimal, "trial {trial}");
                    assert!(
                        (res.objective_value - val).abs() <= 1e-7 * (1.0 + val.abs()),
                        "trial {trial}: milp {} vs enumeration {val}",
                        res.objective_value
                    );
                }
            }
        }
    }
}
