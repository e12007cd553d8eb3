//! Post-contingency recourse: the re-dispatch LP parameterized by the
//! switching vector `z` and the line-availability vector `a`, its dual
//! solution, and the dual objective that optimality cuts are built from.
//!
//! Every constraint whose dual enters a cut is kept as an explicit row;
//! the right-hand side of each row is affine in `(z, a)` with constant
//! coefficient matrix, so one dual vector certifies a lower bound on the
//! recourse cost at *any* `(z, a)` (weak duality over parameterized
//! right-hand sides).
//!
//! Dual convention (minimization): `<=` rows carry nonpositive duals,
//! `>=` rows nonnegative ones, equalities are free, and
//! `sum(dual_i * rhs_i(z, a))` equals the optimal cost at the solve's
//! own `(z, a)`.

use crate::grid::GridInstance;
use crate::milp::{ModelBuilder, ModelError, Sense, SolveStatus, SolverParams};
use crate::pre_contingency::octagon_cuts;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Line availability after a contingency: `true` means in service.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContingencyScenario {
    available: Vec<bool>,
}

impl ContingencyScenario {
    pub fn all_available(num_lines: usize) -> Self {
        ContingencyScenario { available: vec![true; num_lines] }
    }

    pub fn from_available(available: Vec<bool>) -> Self {
        ContingencyScenario { available }
    }

    pub fn num_lines(&self) -> usize {
        self.available.len()
    }

    pub fn set_failed(&mut self, line_pos: usize) {
        self.available[line_pos] = false;
    }

    pub fn is_failed(&self, line_pos: usize) -> bool {
        !self.available[line_pos]
    }

    pub fn is_available(&self, line_pos: usize) -> bool {
        self.available[line_pos]
    }

    pub fn failed_count(&self) -> usize {
        self.available.iter().filter(|&&a| !a).count()
    }

    pub fn failed_positions(&self) -> Vec<usize> {
        (0..self.available.len()).filter(|&i| !self.available[i]).collect()
    }

    pub fn as_bits(&self) -> Vec<u8> {
        self.available.iter().map(|&a| a as u8).collect()
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        ContingencyScenario { available: bits.iter().map(|&b| b != 0).collect() }
    }
}

#[derive(Debug, Error)]
pub enum RecourseError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("recourse LP ended {0:?}; shedding keeps it feasible, so this is a modeling bug")]
    NotOptimal(SolveStatus),
    #[error("switching vector length {got} does not match {expected} switchable lines")]
    BadSwitchVector { got: usize, expected: usize },
    #[error("scenario covers {got} lines, instance has {expected}")]
    BadScenario { got: usize, expected: usize },
    #[error("dual vector length {got} does not match template rows {expected}")]
    BadDualLength { got: usize, expected: usize },
}

/// Row classification; payloads are positions (bus/line/substation
/// indices into the instance's sorted vectors, or switchable-line rank).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowKind {
    BalP(usize),
    BalQ(usize),
    VDropLo(usize),
    VDropHi(usize),
    VLo(usize),
    VHi(usize),
    FpSwLo(usize),
    FpSwHi(usize),
    FqSwLo(usize),
    FqSwHi(usize),
    FpAvLo(usize),
    FpAvHi(usize),
    FqAvLo(usize),
    FqAvHi(usize),
    OctPos(usize, u8),
    OctNeg(usize, u8),
    PCap(usize),
    QLo(usize),
    QHi(usize),
    VRef(usize),
    ShedPCap(usize),
    ShedQCap(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct RowSpec {
    pub name: String,
    pub sense: Sense,
    pub kind: RowKind,
    /// Constant part of the right-hand side.
    pub base: f64,
    /// `(switchable rank, coefficient)` of `z` in the right-hand side.
    pub z_coef: Option<(usize, f64)>,
    /// `(line position, coefficient)` of `a` in the right-hand side.
    pub a_coef: Option<(usize, f64)>,
    /// Constraint matrix entries `(variable, coefficient)`.
    pub terms: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct VarSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub cost: f64,
}

/// Immutable description of the recourse LP for one instance; build once,
/// evaluate for many `(z, a)` pairs.
#[derive(Debug, Clone)]
pub struct RecourseTemplate {
    pub(crate) rows: Vec<RowSpec>,
    pub(crate) vars: Vec<VarSpec>,
    pub(crate) num_lines: usize,
    pub(crate) sw_positions: Vec<usize>,
    shed_p_vars: Vec<usize>,
    shed_q_vars: Vec<usize>,
}

/// One recourse solve: optimal cost, its dual certificate, and the shed
/// totals the out-of-sample statistics are built from.
#[derive(Debug, Clone)]
pub struct RecourseEvaluation {
    pub cost: f64,
    pub dual: DualSolution,
    /// Total active shed (sum of per-bus deficits).
    pub shed_p: f64,
    /// Total reactive shed.
    pub shed_q: f64,
}

/// Dual vector aligned with the template's row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualSolution {
    pub values: Vec<f64>,
}

impl RecourseTemplate {
    pub fn new(g: &GridInstance) -> Self {
        let sw_positions = g.switchable_positions();
        let mut vars: Vec<VarSpec> = Vec::new();
        let var = |name: String, lo: f64, hi: f64, cost: f64, vars: &mut Vec<VarSpec>| {
            vars.push(VarSpec { name, lo, hi, cost });
            vars.len() - 1
        };

        let c_ll = g.loss_cost;
        let mut p_tr = Vec::new();
        let mut q_tr = Vec::new();
        for s in &g.substations {
            p_tr.push(var(format!("ptr_c[{}]", s.bus.0), 0.0, f64::INFINITY, s.energy_cost, &mut vars));
            q_tr.push(var(format!("qtr_c[{}]", s.bus.0), f64::NEG_INFINITY, f64::INFINITY, 0.0, &mut vars));
        }
        let mut v_sq = Vec::new();
        for b in &g.buses {
            v_sq.push(var(format!("v_c[{}]", b.id.0), f64::NEG_INFINITY, f64::INFINITY, 0.0, &mut vars));
        }
        let mut f_p = Vec::new();
        let mut f_q = Vec::new();
        for l in &g.lines {
            f_p.push(var(format!("fp_c[{}]", l.id.0), f64::NEG_INFINITY, f64::INFINITY, 0.0, &mut vars));
            f_q.push(var(format!("fq_c[{}]", l.id.0), f64::NEG_INFINITY, f64::INFINITY, 0.0, &mut vars));
        }
        let mut shed_pm = Vec::new();
        let mut shed_pp = Vec::new();
        let mut shed_qm = Vec::new();
        let mut shed_qp = Vec::new();
        for b in &g.buses {
            let id = b.id.0;
            shed_pm.push(var(format!("shed_pm_c[{id}]"), 0.0, f64::INFINITY, c_ll, &mut vars));
            shed_pp.push(var(format!("shed_pp_c[{id}]"), 0.0, f64::INFINITY, c_ll, &mut vars));
            shed_qm.push(var(format!("shed_qm_c[{id}]"), 0.0, f64::INFINITY, c_ll, &mut vars));
            shed_qp.push(var(format!("shed_qp_c[{id}]"), 0.0, f64::INFINITY, c_ll, &mut vars));
        }

        let mut rows: Vec<RowSpec> = Vec::new();

        // Power balances.
        for (i, b) in g.buses.iter().enumerate() {
            let mut terms_p = vec![(shed_pp[i], -1.0), (shed_pm[i], 1.0)];
            let mut terms_q = vec![(shed_qp[i], -1.0), (shed_qm[i], 1.0)];
            for (j, l) in g.lines.iter().enumerate() {
                if l.to_bus == b.id {
                    terms_p.push((f_p[j], 1.0));
                    terms_q.push((f_q[j], 1.0));
                } else if l.from_bus == b.id {
                    terms_p.push((f_p[j], -1.0));
                    terms_q.push((f_q[j], -1.0));
                }
            }
            if let Some(si) = g.substations.iter().position(|s| s.bus == b.id) {
                terms_p.push((p_tr[si], 1.0));
                terms_q.push((q_tr[si], 1.0));
            }
            rows.push(RowSpec {
                name: format!("bal_p[{}]", b.id.0),
                sense: Sense::Eq,
                kind: RowKind::BalP(i),
                base: b.demand_p,
                z_coef: None,
                a_coef: None,
                terms: terms_p,
            });
            rows.push(RowSpec {
                name: format!("bal_q[{}]", b.id.0),
                sense: Sense::Eq,
                kind: RowKind::BalQ(i),
                base: b.demand_q(),
                z_coef: None,
                a_coef: None,
                terms: terms_q,
            });
        }

        // Voltage drops with availability (and switch) relaxation.
        for (j, l) in g.lines.iter().enumerate() {
            let fr = g.bus_index(l.from_bus).unwrap();
            let to = g.bus_index(l.to_bus).unwrap();
            let m_l = g.voltage_big_m(l);
            let sw_rank = sw_positions.iter().position(|&p| p == j);
            let (base, z_coef) = match sw_rank {
                Some(k) => (2.0 * m_l, Some((k, -m_l))),
                None => (m_l, None),
            };
            rows.push(RowSpec {
                name: format!("vdrop_lo[{}]", l.id.0),
                sense: Sense::Le,
                kind: RowKind::VDropLo(j),
                base,
                z_coef,
                a_coef: Some((j, -m_l)),
                terms: vec![
                    (v_sq[fr], -1.0),
                    (v_sq[to], 1.0),
                    (f_p[j], 2.0 * l.r),
                    (f_q[j], 2.0 * l.x),
                ],
            });
            rows.push(RowSpec {
                name: format!("vdrop_hi[{}]", l.id.0),
                sense: Sense::Le,
                kind: RowKind::VDropHi(j),
                base,
                z_coef,
                a_coef: Some((j, -m_l)),
                terms: vec![
                    (v_sq[fr], 1.0),
                    (v_sq[to], -1.0),
                    (f_p[j], -2.0 * l.r),
                    (f_q[j], -2.0 * l.x),
                ],
            });
        }

        // Voltage box.
        for (i, b) in g.buses.iter().enumerate() {
            rows.push(RowSpec {
                name: format!("v_lo[{}]", b.id.0),
                sense: Sense::Ge,
                kind: RowKind::VLo(i),
                base: b.v_min * b.v_min,
                z_coef: None,
                a_coef: None,
                terms: vec![(v_sq[i], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("v_hi[{}]", b.id.0),
                sense: Sense::Le,
                kind: RowKind::VHi(i),
                base: b.v_max * b.v_max,
                z_coef: None,
                a_coef: None,
                terms: vec![(v_sq[i], 1.0)],
            });
        }

        // Switch-gated flow boxes.
        for (k, &j) in sw_positions.iter().enumerate() {
            let l = &g.lines[j];
            let id = l.id.0;
            rows.push(RowSpec {
                name: format!("fp_sw_lo[{id}]"),
                sense: Sense::Ge,
                kind: RowKind::FpSwLo(k),
                base: 0.0,
                z_coef: Some((k, -l.f_max)),
                a_coef: None,
                terms: vec![(f_p[j], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("fp_sw_hi[{id}]"),
                sense: Sense::Le,
                kind: RowKind::FpSwHi(k),
                base: 0.0,
                z_coef: Some((k, l.f_max)),
                a_coef: None,
                terms: vec![(f_p[j], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("fq_sw_lo[{id}]"),
                sense: Sense::Ge,
                kind: RowKind::FqSwLo(k),
                base: 0.0,
                z_coef: Some((k, -l.f_max)),
                a_coef: None,
                terms: vec![(f_q[j], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("fq_sw_hi[{id}]"),
                sense: Sense::Le,
                kind: RowKind::FqSwHi(k),
                base: 0.0,
                z_coef: Some((k, l.f_max)),
                a_coef: None,
                terms: vec![(f_q[j], 1.0)],
            });
        }

        // Availability-gated flow boxes for every line.
        for (j, l) in g.lines.iter().enumerate() {
            let id = l.id.0;
            rows.push(RowSpec {
                name: format!("fp_av_lo[{id}]"),
                sense: Sense::Ge,
                kind: RowKind::FpAvLo(j),
                base: 0.0,
                z_coef: None,
                a_coef: Some((j, -l.f_max)),
                terms: vec![(f_p[j], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("fp_av_hi[{id}]"),
                sense: Sense::Le,
                kind: RowKind::FpAvHi(j),
                base: 0.0,
                z_coef: None,
                a_coef: Some((j, l.f_max)),
                terms: vec![(f_p[j], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("fq_av_lo[{id}]"),
                sense: Sense::Ge,
                kind: RowKind::FqAvLo(j),
                base: 0.0,
                z_coef: None,
                a_coef: Some((j, -l.f_max)),
                terms: vec![(f_q[j], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("fq_av_hi[{id}]"),
                sense: Sense::Le,
                kind: RowKind::FqAvHi(j),
                base: 0.0,
                z_coef: None,
                a_coef: Some((j, l.f_max)),
                terms: vec![(f_q[j], 1.0)],
            });
        }

        // Octagonal apparent-power cuts.
        for (j, l) in g.lines.iter().enumerate() {
            for (e, (slope, rhs_factor)) in octagon_cuts().iter().enumerate() {
                rows.push(RowSpec {
                    name: format!("oct_pos[{},{}]", l.id.0, e + 1),
                    sense: Sense::Le,
                    kind: RowKind::OctPos(j, e as u8 + 1),
                    base: rhs_factor * l.f_max,
                    z_coef: None,
                    a_coef: None,
                    terms: vec![(f_q[j], 1.0), (f_p[j], -slope)],
                });
                rows.push(RowSpec {
                    name: format!("oct_neg[{},{}]", l.id.0, e + 1),
                    sense: Sense::Le,
                    kind: RowKind::OctNeg(j, e as u8 + 1),
                    base: rhs_factor * l.f_max,
                    z_coef: None,
                    a_coef: None,
                    terms: vec![(f_q[j], -1.0), (f_p[j], -slope)],
                });
            }
        }

        // Substation limits and voltage reference.
        for (si, s) in g.substations.iter().enumerate() {
            let id = s.bus.0;
            let bi = g.bus_index(s.bus).unwrap();
            rows.push(RowSpec {
                name: format!("p_cap[{id}]"),
                sense: Sense::Le,
                kind: RowKind::PCap(si),
                base: s.p_max_c(),
                z_coef: None,
                a_coef: None,
                terms: vec![(p_tr[si], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("q_lo[{id}]"),
                sense: Sense::Ge,
                kind: RowKind::QLo(si),
                base: s.q_min_c(),
                z_coef: None,
                a_coef: None,
                terms: vec![(q_tr[si], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("q_hi[{id}]"),
                sense: Sense::Le,
                kind: RowKind::QHi(si),
                base: s.q_max_c(),
                z_coef: None,
                a_coef: None,
                terms: vec![(q_tr[si], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("v_ref[{id}]"),
                sense: Sense::Eq,
                kind: RowKind::VRef(si),
                base: s.v_ref * s.v_ref,
                z_coef: None,
                a_coef: None,
                terms: vec![(v_sq[bi], 1.0)],
            });
        }

        // Shedding caps.
        for (i, b) in g.buses.iter().enumerate() {
            rows.push(RowSpec {
                name: format!("shed_p_cap[{}]", b.id.0),
                sense: Sense::Le,
                kind: RowKind::ShedPCap(i),
                base: b.demand_p,
                z_coef: None,
                a_coef: None,
                terms: vec![(shed_pm[i], 1.0)],
            });
            rows.push(RowSpec {
                name: format!("shed_q_cap[{}]", b.id.0),
                sense: Sense::Le,
                kind: RowKind::ShedQCap(i),
                base: b.demand_q(),
                z_coef: None,
                a_coef: None,
                terms: vec![(shed_qm[i], 1.0)],
            });
        }

        RecourseTemplate {
            rows,
            vars,
            num_lines: g.num_lines(),
            sw_positions,
            shed_p_vars: shed_pm,
            shed_q_vars: shed_qm,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_lines(&self) -> usize {
        self.num_lines
    }

    pub fn num_switchable(&self) -> usize {
        self.sw_positions.len()
    }

    pub fn row_names(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.name.as_str()).collect()
    }

    pub fn row_kinds(&self) -> Vec<RowKind> {
        self.rows.iter().map(|r| r.kind).collect()
    }

    /// Right-hand side of row `i` at a given switching/availability pair.
    pub fn rhs(&self, i: usize, z: &[bool], s: &ContingencyScenario) -> f64 {
        let row = &self.rows[i];
        let mut rhs = row.base;
        if let Some((k, c)) = row.z_coef {
            if z[k] {
                rhs += c;
            }
        }
        if let Some((j, c)) = row.a_coef {
            if s.is_available(j) {
                rhs += c;
            }
        }
        rhs
    }

    fn check_args(&self, z: &[bool], s: &ContingencyScenario) -> Result<(), RecourseError> {
        if z.len() != self.sw_positions.len() {
            return Err(RecourseError::BadSwitchVector {
                got: z.len(),
                expected: self.sw_positions.len(),
            });
        }
        if s.num_lines() != self.num_lines {
            return Err(RecourseError::BadScenario {
                got: s.num_lines(),
                expected: self.num_lines,
            });
        }
        Ok(())
    }

    /// Solves the recourse LP at `(z, a)` and returns cost, duals, and
    /// shed totals. Strong duality ties the dual to the cost exactly
    /// (all variable bounds sit at zero, so the row duals carry the
    /// whole objective).
    pub fn evaluate(
        &self,
        z: &[bool],
        s: &ContingencyScenario,
        params: &SolverParams,
    ) -> Result<RecourseEvaluation, RecourseError> {
        self.check_args(z, s)?;
        let mut m = ModelBuilder::minimize();
        let vars: Vec<_> = self
            .vars
            .iter()
            .map(|v| m.add_var(v.name.clone(), v.lo, v.hi, v.cost))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, row) in self.rows.iter().enumerate() {
            let terms: Vec<_> = row.terms.iter().map(|&(v, c)| (vars[v], c)).collect();
            m.add_row(row.name.clone(), row.sense, self.rhs(i, z, s), &terms)?;
        }
        let res = m.solve(params)?;
        if res.status != SolveStatus::Optimal {
            return Err(RecourseError::NotOptimal(res.status));
        }
        let dual = DualSolution {
            values: res.dual_values.clone().expect("pure LP produces duals"),
        };
        let shed_p = self.shed_p_vars.iter().map(|&v| res.primal_values[v]).sum();
        let shed_q = self.shed_q_vars.iter().map(|&v| res.primal_values[v]).sum();
        Ok(RecourseEvaluation {
            cost: res.objective_value,
            dual,
            shed_p,
            shed_q,
        })
    }

    /// The affine-in-`(z, a)` dual bound `sum(dual_i * rhs_i(z, a))`.
    /// Equals the recourse cost at the `(z, a)` the dual came from and
    /// lower-bounds it anywhere else.
    pub fn dual_objective(
        &self,
        dual: &DualSolution,
        z: &[bool],
        s: &ContingencyScenario,
    ) -> Result<f64, RecourseError> {
        self.check_args(z, s)?;
        if dual.values.len() != self.rows.len() {
            return Err(RecourseError::BadDualLength {
                got: dual.values.len(),
                expected: self.rows.len(),
            });
        }
        let mut total = 0.0;
        for i in 0..self.rows.len() {
            let v = dual.values[i];
            if v != 0.0 {
                total += v * self.rhs(i, z, s);
            }
        }
        Ok(total)
    }
}

/// One-shot wrapper: builds the template and evaluates a single pair.
pub fn evaluate_recourse(
    g: &GridInstance,
    z: &[bool],
    s: &ContingencyScenario,
) -> Result<RecourseEvaluation, RecourseError> {
    RecourseTemplate::new(g).evaluate(z, s, &SolverParams::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::SolverParams;
    use crate::pre_contingency::{build_first_stage, extract_first_stage};
    use crate::synth;
    use rand::prelude::*;

    fn params() -> SolverParams {
        SolverParams::default()
    }

    #[test]
    fn all_available_matches_first_stage_operating_cost() {
        // With every line up and z at the pre-contingency optimum, the
        // recourse re-dispatch reproduces energy + shed cost.
        let g = synth::ring_instance();
        let mut m = ModelBuilder::minimize();
        let h = build_first_stage(&g, &mut m, None).unwrap();
        let res = m.solve(&params()).unwrap();
        let sol = extract_first_stage(&g, &h, &res).unwrap();
        let z = sol.switch_vector(&g);
        let tmpl = RecourseTemplate::new(&g);
        let ev = tmpl
            .evaluate(&z, &ContingencyScenario::all_available(g.num_lines()), &params())
            .unwrap();
        let expected = sol.cost_energy + sol.cost_shed;
        assert!(
            (ev.cost - expected).abs() <= 1e-6 * (1.0 + expected.abs()),
            "recourse {} vs first-stage {}",
            ev.cost,
            expected
        );
    }

    #[test]
    fn single_line_failure_sheds_everything() {
        let g = synth::two_bus_instance(2.0);
        let tmpl = RecourseTemplate::new(&g);
        let mut s = ContingencyScenario::all_available(1);
        s.set_failed(0);
        let ev = tmpl.evaluate(&[], &s, &params()).unwrap();
        assert!((ev.cost - 3000.0).abs() < 1e-6, "cost {}", ev.cost);
        assert!((ev.shed_p - 1.0).abs() < 1e-8);
    }

    #[test]
    fn strong_duality_and_zero_dual_edge() {
        let g = synth::ring_instance();
        let tmpl = RecourseTemplate::new(&g);
        let z = vec![true, false, false];
        let s = ContingencyScenario::all_available(g.num_lines());
        let ev = tmpl.evaluate(&z, &s, &params()).unwrap();
        let dual_obj = tmpl.dual_objective(&ev.dual, &z, &s).unwrap();
        assert!((dual_obj - ev.cost).abs() <= 1e-6 * (1.0 + ev.cost.abs()));

        let zero = DualSolution { values: vec![0.0; tmpl.num_rows()] };
        assert_eq!(tmpl.dual_objective(&zero, &z, &s).unwrap(), 0.0);
    }

    #[test]
    fn duals_lower_bound_other_scenarios() {
        // Weak duality across the parameterized right-hand sides: a dual
        // from one (z, a) bounds the cost at any other (z', a').
        let g = synth::ring_instance();
        let tmpl = RecourseTemplate::new(&g);
        let mut rng = StdRng::seed_from_u64(11);
        let sw = g.switchable_positions().len();
        let n = g.num_lines();
        let mut pairs = Vec::new();
        for _ in 0..12 {
            let z: Vec<bool> = (0..sw).map(|_| rng.random_bool(0.7)).collect();
            let mut s = ContingencyScenario::all_available(n);
            if rng.random_bool(0.5) {
                s.set_failed(rng.random_range(0..n));
            }
            pairs.push((z, s));
        }
        for (z, s) in &pairs {
            let ev = tmpl.evaluate(z, s, &params()).unwrap();
            for (z2, s2) in &pairs {
                let bound = tmpl.dual_objective(&ev.dual, z2, s2).unwrap();
                let other = tmpl.evaluate(z2, s2, &params()).unwrap();
                assert!(
                    bound <= other.cost + 1e-5 * (1.0 + other.cost.abs()),
                    "dual bound {bound} exceeds cost {}",
                    other.cost
                );
            }
        }
    }

    #[test]
    fn losing_a_line_never_helps() {
        let g = synth::ring_instance();
        let tmpl = RecourseTemplate::new(&g);
        let z = vec![true, true, false];
        let base = tmpl
            .evaluate(&z, &ContingencyScenario::all_available(g.num_lines()), &params())
            .unwrap();
        for j in 0..g.num_lines() {
            let mut s = ContingencyScenario::all_available(g.num_lines());
            s.set_failed(j);
            let ev = tmpl.evaluate(&z, &s, &params()).unwrap();
            assert!(ev.cost >= base.cost - 1e-7 * (1.0 + base.cost.abs()));
        }
    }

    #[test]
    fn k_zero_support_is_all_ones() {
        let scenarios = crate::ambiguity::enumerate_support(4, 0, 1000).unwrap();
        assert_eq!(scenarios.len(), 1);
        assert_eq!(scenarios[0].failed_count(), 0);
    }
}
