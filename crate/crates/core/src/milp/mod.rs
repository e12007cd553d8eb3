//! Declaration and solution of linear and mixed-integer linear programs.
//!
//! Models are declared through [`ModelBuilder`] (named variables with
//! bounds, named linear rows, a linear objective) and solved by the
//! built-in backend: a bounded-variable primal simplex for LPs and
//! depth-first branch-and-bound on top of it for integer models.
//!
//! Dual values are reported for pure LPs only, in the convention that
//! makes `sum(dual_i * rhs_i) + sum(reduced_j * active_bound_j)` equal
//! to the optimal objective. For a minimization problem this means
//! `<=` rows carry nonpositive duals and `>=` rows nonnegative ones;
//! for maximization the signs flip.

mod branch_bound;
mod simplex;

use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VarId(pub(crate) usize);

/// Handle to a declared row (linear constraint).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RowId(pub(crate) usize);

/// Relation of a row's linear form to its right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Sense::Le => write!(f, "<="),
            Sense::Eq => write!(f, "="),
            Sense::Ge => write!(f, ">="),
        }
    }
}

/// Optimization direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone)]
pub(crate) struct VarDef {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub cost: f64,
    pub integer: bool,
    pub branch_priority: i32,
}

#[derive(Debug, Clone)]
pub(crate) struct RowDef {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    /// Sorted by variable index, duplicates merged.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("duplicate variable name '{0}'")]
    DuplicateVar(String),
    #[error("duplicate row name '{0}'")]
    DuplicateRow(String),
    #[error("variable bounds inverted for '{name}': [{lo}, {hi}]")]
    BadBounds { name: String, lo: f64, hi: f64 },
    #[error("non-finite coefficient {value} on '{var}' in row '{row}'")]
    BadCoefficient { row: String, var: String, value: f64 },
    #[error("non-finite right-hand side {rhs} in row '{row}'")]
    BadRhs { row: String, rhs: f64 },
    #[error("numeric failure in {phase}: {detail}")]
    Numeric { phase: String, detail: String },
}

/// Termination status reported by the backend.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    /// Node or time limit hit; the incumbent (if any) is returned.
    Limit,
}

/// Backend tolerances and limits.
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Absolute feasibility tolerance.
    pub feasibility_tol: f64,
    /// Absolute optimality (reduced-cost) tolerance.
    pub optimality_tol: f64,
    /// Integer feasibility tolerance for branch-and-bound.
    pub integrality_tol: f64,
    /// Relative MIP gap at which branch-and-bound stops early.
    pub mip_gap: f64,
    /// Branch-and-bound node limit.
    pub node_limit: usize,
    /// Wall-clock limit in seconds, if any.
    pub time_limit: Option<f64>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            feasibility_tol: 1e-8,
            optimality_tol: 1e-8,
            integrality_tol: 1e-7,
            mip_gap: 0.0,
            node_limit: 20_000_000,
            time_limit: None,
        }
    }
}

/// Outcome of a solve: status, objective, primal values, and (for pure
/// LPs) row duals plus variable reduced costs.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective_value: f64,
    pub primal_values: Vec<f64>,
    /// Row duals; populated only when the model has no integer variables
    /// and the solve was optimal.
    pub dual_values: Option<Vec<f64>>,
    /// Reduced costs (duals of active variable bounds), same condition.
    pub reduced_costs: Option<Vec<f64>>,
    /// Remaining relative gap when status is `Limit`.
    pub gap: f64,
    pub simplex_iterations: usize,
    pub nodes: usize,
}

impl SolveResult {
    pub fn value(&self, v: VarId) -> f64 {
        self.primal_values[v.0]
    }

    pub fn dual(&self, r: RowId) -> f64 {
        self.dual_values
            .as_ref()
            .map(|d| d[r.0])
            .expect("duals only available for optimal pure LPs")
    }
}

/// Incremental declaration of an LP/MILP.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    pub(crate) objective: Objective,
    pub(crate) vars: Vec<VarDef>,
    pub(crate) rows: Vec<RowDef>,
    var_names: HashMap<String, usize>,
    row_names: HashMap<String, usize>,
}

impl ModelBuilder {
    pub fn new(objective: Objective) -> Self {
        ModelBuilder {
            objective,
            vars: Vec::new(),
            rows: Vec::new(),
            var_names: HashMap::new(),
            row_names: HashMap::new(),
        }
    }

    pub fn minimize() -> Self {
        Self::new(Objective::Minimize)
    }

    pub fn maximize() -> Self {
        Self::new(Objective::Maximize)
    }

    /// Declares a continuous variable with bounds (`f64::NEG_INFINITY` /
    /// `f64::INFINITY` for free sides) and objective coefficient.
    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lo: f64,
        hi: f64,
        cost: f64,
    ) -> Result<VarId, ModelError> {
        self.push_var(name.into(), lo, hi, cost, false)
    }

    /// Declares a binary variable.
    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> Result<VarId, ModelError> {
        self.push_var(name.into(), 0.0, 1.0, cost, true)
    }

    fn push_var(
        &mut self,
        name: String,
        lo: f64,
        hi: f64,
        cost: f64,
        integer: bool,
    ) -> Result<VarId, ModelError> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(ModelError::BadBounds { name, lo, hi });
        }
        if self.var_names.contains_key(&name) {
            return Err(ModelError::DuplicateVar(name));
        }
        let id = self.vars.len();
        self.var_names.insert(name.clone(), id);
        self.vars.push(VarDef {
            name,
            lo,
            hi,
            cost,
            integer,
            branch_priority: 0,
        });
        Ok(VarId(id))
    }

    /// Higher priority variables are branched on first.
    pub fn set_branch_priority(&mut self, v: VarId, priority: i32) {
        self.vars[v.0].branch_priority = priority;
    }

    pub fn set_cost(&mut self, v: VarId, cost: f64) {
        self.vars[v.0].cost = cost;
    }

    pub fn set_bounds(&mut self, v: VarId, lo: f64, hi: f64) {
        self.vars[v.0].lo = lo;
        self.vars[v.0].hi = hi;
    }

    /// Adds the row `sum(coef * var) sense rhs`. Coefficients on the same
    /// variable are accumulated.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        sense: Sense,
        rhs: f64,
        terms: &[(VarId, f64)],
    ) -> Result<RowId, ModelError> {
        let name = name.into();
        if self.row_names.contains_key(&name) {
            return Err(ModelError::DuplicateRow(name));
        }
        if !rhs.is_finite() {
            return Err(ModelError::BadRhs { row: name, rhs });
        }
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
        for &(v, c) in terms {
            if !c.is_finite() {
                return Err(ModelError::BadCoefficient {
                    row: name,
                    var: self.vars[v.0].name.clone(),
                    value: c,
                });
            }
            merged.push((v.0, c));
        }
        merged.sort_unstable_by_key(|&(i, _)| i);
        merged.dedup_by(|later, earlier| {
            if later.0 == earlier.0 {
                earlier.1 += later.1;
                true
            } else {
                false
            }
        });
        merged.retain(|&(_, c)| c != 0.0);
        let id = self.rows.len();
        self.row_names.insert(name.clone(), id);
        self.rows.push(RowDef {
            name,
            sense,
            rhs,
            terms: merged,
        });
        Ok(RowId(id))
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v.0].name
    }

    pub fn row_name(&self, r: RowId) -> &str {
        &self.rows[r.0].name
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    /// Solves the model. Pure LPs go straight to the simplex and report
    /// duals; models with integer variables run branch-and-bound.
    pub fn solve(&self, params: &SolverParams) -> Result<SolveResult, ModelError> {
        if self.has_integers() {
            branch_bound::solve_milp(self, params)
        } else {
            simplex::solve_lp(self, params)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> SolverParams {
        SolverParams::default()
    }

    #[test]
    fn one_variable_lp_with_dual() {
        let mut m = ModelBuilder::maximize();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
        let r = m.add_row("cap", Sense::Le, 3.0, &[(x, 1.0)]).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 3.0).abs() < 1e-9);
        assert!((res.value(x) - 3.0).abs() < 1e-9);
        assert!((res.dual(r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn empty_objective_is_zero() {
        let mut m = ModelBuilder::minimize();
        m.add_var("x", 0.0, 1.0, 0.0).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert_eq!(res.objective_value, 0.0);
    }

    #[test]
    fn binary_cap_rounds_down() {
        let mut m = ModelBuilder::maximize();
        let x = m.add_binary("x", 1.0).unwrap();
        m.add_row("cap", Sense::Le, 0.5, &[(x, 1.0)]).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!(res.objective_value.abs() < 1e-9);
        assert!(res.value(x).abs() < 1e-7);
    }

    #[test]
    fn infeasible_detected() {
        let mut m = ModelBuilder::minimize();
        let x = m.add_var("x", 0.0, 1.0, 1.0).unwrap();
        m.add_row("lo", Sense::Ge, 2.0, &[(x, 1.0)]).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Infeasible);
    }

    #[test]
    fn unbounded_detected() {
        let mut m = ModelBuilder::minimize();
        m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Unbounded);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = ModelBuilder::minimize();
        m.add_var("x", 0.0, 1.0, 0.0).unwrap();
        assert!(matches!(
            m.add_var("x", 0.0, 1.0, 0.0),
            Err(ModelError::DuplicateVar(_))
        ));
    }

    #[test]
    fn strong_duality_small_lp() {
        // min 2x + 3y  s.t. x + y >= 4, x - y <= 1, x,y >= 0
        let mut m = ModelBuilder::minimize();
        let x = m.add_var("x", 0.0, f64::INFINITY, 2.0).unwrap();
        let y = m.add_var("y", 0.0, f64::INFINITY, 3.0).unwrap();
        m.add_row("cover", Sense::Ge, 4.0, &[(x, 1.0), (y, 1.0)]).unwrap();
        m.add_row("skew", Sense::Le, 1.0, &[(x, 1.0), (y, -1.0)]).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        let duals = res.dual_values.as_ref().unwrap();
        let dual_obj: f64 = duals
            .iter()
            .zip(m.rows.iter())
            .map(|(d, r)| d * r.rhs)
            .sum();
        assert!(
            (dual_obj - res.objective_value).abs() <= 1e-6 * (1.0 + res.objective_value.abs())
        );
    }

    #[test]
    fn equality_rows_and_free_vars() {
        // min x + y s.t. x + 2y = 3, x - y = 0 -> x = y = 1
        let mut m = ModelBuilder::minimize();
        let x = m.add_var("x", f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
        let y = m.add_var("y", f64::NEG_INFINITY, f64::INFINITY, 1.0).unwrap();
        m.add_row("sum", Sense::Eq, 3.0, &[(x, 1.0), (y, 2.0)]).unwrap();
        m.add_row("tie", Sense::Eq, 0.0, &[(x, 1.0), (y, -1.0)]).unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.value(x) - 1.0).abs() < 1e-8);
        assert!((res.value(y) - 1.0).abs() < 1e-8);
    }

    /// Certifies an optimal LP result through duality: primal feasibility,
    /// plus objective == y'b + sum of reduced costs times active bounds.
    fn certify_lp(m: &ModelBuilder, res: &SolveResult) {
        let tol = 1e-6;
        for row in &m.rows {
            let act: f64 = row
                .terms
                .iter()
                .map(|&(j, a)| a * res.primal_values[j])
                .sum();
            let scale = 1.0 + row.rhs.abs();
            match row.sense {
                Sense::Le => assert!(act <= row.rhs + tol * scale, "{}: {act} > {}", row.name, row.rhs),
                Sense::Ge => assert!(act >= row.rhs - tol * scale, "{}: {act} < {}", row.name, row.rhs),
                Sense::Eq => assert!((act - row.rhs).abs() <= tol * scale, "{}", row.name),
            }
        }
        let duals = res.dual_values.as_ref().unwrap();
        let reduced = res.reduced_costs.as_ref().unwrap();
        let mut dual_obj: f64 = duals
            .iter()
            .zip(m.rows.iter())
            .map(|(y, r)| y * r.rhs)
            .sum();
        for (j, v) in m.vars.iter().enumerate() {
            let d = reduced[j];
            if d != 0.0 {
                let x = res.primal_values[j];
                let bound = if (x - v.lo).abs() < (x - v.hi).abs() { v.lo } else { v.hi };
                dual_obj += d * bound;
            }
        }
        assert!(
            (dual_obj - res.objective_value).abs() <= 1e-6 * (1.0 + res.objective_value.abs()),
            "duality gap: {dual_obj} vs {}",
            res.objective_value
        );
    }

    #[test]
    fn randomized_lps_certified_by_duality() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(0x5eed);
        let mut optimal = 0;
        for _ in 0..300 {
            let nv = rng.random_range(1..=6);
            let nr = rng.random_range(0..=8);
            let mut m = if rng.random_bool(0.5) {
                ModelBuilder::minimize()
            } else {
                ModelBuilder::maximize()
            };
            let mut vars = Vec::new();
            for j in 0..nv {
                let lo = if rng.random_bool(0.7) { rng.random_range(-3.0..1.0) } else { f64::NEG_INFINITY };
                let hi = if rng.random_bool(0.7) {
                    let base = if lo.is_finite() { lo } else { -3.0 };
                    base + rng.random_range(0.0..4.0)
                } else {
                    f64::INFINITY
                };
                let cost = rng.random_range(-5.0..5.0);
                vars.push(m.add_var(format!("x{j}"), lo, hi, cost).unwrap());
            }
            for i in 0..nr {
                let sense = match rng.random_range(0..3) {
                    0 => Sense::Le,
                    1 => Sense::Ge,
                    _ => Sense::Eq,
                };
                let mut terms: Vec<(VarId, f64)> = Vec::new();
                for &v in &vars {
                    if rng.random_bool(0.8) {
                        terms.push((v, rng.random_range(-2.0..2.0)));
                    }
                }
                m.add_row(format!("r{i}"), sense, rng.random_range(-4.0..4.0), &terms)
                    .unwrap();
            }
            let res = m.solve(&params()).unwrap();
            if res.status == SolveStatus::Optimal {
                certify_lp(&m, &res);
                optimal += 1;
            }
        }
        assert!(optimal > 50, "too few optimal instances: {optimal}");
    }

    #[test]
    fn row_order_does_not_change_objective() {
        use rand::prelude::*;
        let mut rng = rand::rngs::StdRng::seed_from_u64(42);
        for _ in 0..40 {
            let nv = rng.random_range(2..=5);
            let nr = rng.random_range(2..=7);
            let mut rows: Vec<(Sense, f64, Vec<(usize, f64)>)> = Vec::new();
            for _ in 0..nr {
                let sense = if rng.random_bool(0.5) { Sense::Le } else { Sense::Ge };
                let terms: Vec<(usize, f64)> =
                    (0..nv).map(|j| (j, rng.random_range(-2.0..2.0))).collect();
                rows.push((sense, rng.random_range(-2.0..4.0), terms));
            }
            let costs: Vec<f64> = (0..nv).map(|_| rng.random_range(-3.0..3.0)).collect();
            let build = |order: &[usize]| {
                let mut m = ModelBuilder::minimize();
                let vars: Vec<VarId> = costs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| m.add_var(format!("x{j}"), -5.0, 5.0, c).unwrap())
                    .collect();
                for &i in order {
                    let (sense, rhs, ref terms) = rows[i];
                    let t: Vec<(VarId, f64)> = terms.iter().map(|&(j, a)| (vars[j], a)).collect();
                    m.add_row(format!("r{i}"), sense, rhs, &t).unwrap();
                }
                m.solve(&params()).unwrap()
            };
            let forward: Vec<usize> = (0..nr).collect();
            let mut shuffled = forward.clone();
            shuffled.shuffle(&mut rng);
            let a = build(&forward);
            let b = build(&shuffled);
            assert_eq!(a.status, b.status);
            if a.status == SolveStatus::Optimal {
                assert!(
                    (a.objective_value - b.objective_value).abs()
                        <= 1e-7 * (1.0 + a.objective_value.abs())
                );
            }
        }
    }

    #[test]
    fn mixed_integer_knapsack() {
        // max 5a + 4b + 3c s.t. 2a + 3b + c <= 5, binaries
        let mut m = ModelBuilder::maximize();
        let a = m.add_binary("a", 5.0).unwrap();
        let b = m.add_binary("b", 4.0).unwrap();
        let c = m.add_binary("c", 3.0).unwrap();
        m.add_row("w", Sense::Le, 5.0, &[(a, 2.0), (b, 3.0), (c, 1.0)])
            .unwrap();
        let res = m.solve(&params()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        assert!((res.objective_value - 9.0).abs() < 1e-8);
        assert!(res.value(a) > 0.5 && res.value(b) > 0.5 && res.value(c) < 0.5);
    }
}

impl ModelBuilder {
    /// Largest constraint violation of a candidate point; diagnostic aid.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let act: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, v) in self.vars.iter().enumerate() {
            worst = worst.max(v.lo - x[j]).max(x[j] - v.hi);
        }
        worst
    }
}

impl ModelBuilder {
    /// Like `max_violation` but with explicit bound overrides.
    pub fn max_violation_bounded(&self, x: &[f64], bounds: &[(f64, f64)]) -> f64 {
        let mut worst = 0.0f64;
        for row in &self.rows {
            let act: f64 = row.terms.iter().map(|&(j, a)| a * x[j]).sum();
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &(lo, hi)) in bounds.iter().enumerate() {
            worst = worst.max(lo - x[j]).max(x[j] - hi);
        }
        worst
    }
}
