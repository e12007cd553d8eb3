//! First-stage operating model: power balances, switch-dependent voltage
//! drops, voltage and flow limits, octagonal apparent-power cuts,
//! injection limits, shedding, switching logic, and forbidden patterns.

use crate::grid::{BusId, GridInstance, LineId};
use crate::milp::{ModelBuilder, ModelError, Sense, SolveResult, SolveStatus, VarId};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Chord coefficients of the octagonal apparent-power polygon. Each entry
/// `(slope, rhs_factor)` produces the pair of rows
/// `fq - slope * fp <= rhs_factor * f_max` and
/// `-fq - slope * fp <= rhs_factor * f_max`.
pub(crate) fn octagon_cuts() -> [(f64, f64); 4] {
    let mut cuts = [(0.0, 0.0); 4];
    for e in 1..=4usize {
        let ef = e as f64;
        let slope = 1.0 / ((0.5 - ef) * std::f64::consts::FRAC_PI_4).tan();
        let cos_e = (ef * std::f64::consts::FRAC_PI_4).cos();
        let sin_e = (ef * std::f64::consts::FRAC_PI_4).sin();
        cuts[e - 1] = (slope, sin_e - slope * cos_e);
    }
    cuts
}

#[derive(Debug, Error)]
pub enum FirstStageError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("solve ended {0:?}; the first stage is always feasible, so this is a modeling bug")]
    NotOptimal(SolveStatus),
    #[error("fixed switching vector has wrong length {got}, expected {expected}")]
    BadFixedSwitching { got: usize, expected: usize },
}

/// Variable handles produced by [`build_first_stage`]; downstream builders
/// (master, frozen re-dispatch) wire their own rows onto these.
#[derive(Debug, Clone)]
pub struct FirstStageHandles {
    /// Switch status per switchable-line position (parallel to
    /// `GridInstance::switchable_positions`).
    pub z: Vec<VarId>,
    /// Switching-action indicator, same layout as `z`.
    pub y: Vec<VarId>,
    /// Flows per line position.
    pub f_p: Vec<VarId>,
    pub f_q: Vec<VarId>,
    /// Squared voltage per bus position.
    pub v_sq: Vec<VarId>,
    /// Injections per substation index.
    pub p_tr: Vec<VarId>,
    pub q_tr: Vec<VarId>,
    /// Shedding and surplus per bus position.
    pub shed_p_minus: Vec<VarId>,
    pub shed_p_plus: Vec<VarId>,
    pub shed_q_minus: Vec<VarId>,
    pub shed_q_plus: Vec<VarId>,
}

/// Adds the first-stage constraint set and cost terms to `m`.
///
/// With `fix_z` given, switch states are pinned to the vector (positions
/// parallel to `switchable_positions`) and all variables stay continuous,
/// so the model solves as a pure LP; otherwise `z` and `y` are binary.
pub fn build_first_stage(
    g: &GridInstance,
    m: &mut ModelBuilder,
    fix_z: Option<&[bool]>,
) -> Result<FirstStageHandles, FirstStageError> {
    let sw_positions = g.switchable_positions();
    if let Some(zs) = fix_z {
        if zs.len() != sw_positions.len() {
            return Err(FirstStageError::BadFixedSwitching {
                got: zs.len(),
                expected: sw_positions.len(),
            });
        }
    }

    let mut z = Vec::with_capacity(sw_positions.len());
    let mut y = Vec::with_capacity(sw_positions.len());
    for (k, &pos) in sw_positions.iter().enumerate() {
        let line = &g.lines[pos];
        let (zv, yv) = match fix_z {
            Some(zs) => {
                let v = if zs[k] { 1.0 } else { 0.0 };
                let zv = m.add_var(format!("z[{}]", line.id.0), v, v, 0.0)?;
                let yv = m.add_var(format!("y[{}]", line.id.0), 0.0, 1.0, line.switch_cost)?;
                (zv, yv)
            }
            None => {
                let zv = m.add_binary(format!("z[{}]", line.id.0), 0.0)?;
                // With z integral and a nonnegative switch cost, the linking
                // rows pin y to |z - z0|, so y needs no integrality of its own.
                let yv = m.add_var(format!("y[{}]", line.id.0), 0.0, 1.0, line.switch_cost)?;
                (zv, yv)
            }
        };
        z.push(zv);
        y.push(yv);
    }

    let mut f_p = Vec::with_capacity(g.num_lines());
    let mut f_q = Vec::with_capacity(g.num_lines());
    for line in &g.lines {
        f_p.push(m.add_var(format!("fp[{}]", line.id.0), -line.f_max, line.f_max, 0.0)?);
        f_q.push(m.add_var(format!("fq[{}]", line.id.0), -line.f_max, line.f_max, 0.0)?);
    }

    let mut v_sq = Vec::with_capacity(g.num_buses());
    for bus in &g.buses {
        let (lo, hi) = match g.substation_for_bus(bus.id) {
            Some(s) => (s.v_ref * s.v_ref, s.v_ref * s.v_ref),
            None => (bus.v_min * bus.v_min, bus.v_max * bus.v_max),
        };
        v_sq.push(m.add_var(format!("v[{}]", bus.id.0), lo, hi, 0.0)?);
    }

    let mut p_tr = Vec::with_capacity(g.substations.len());
    let mut q_tr = Vec::with_capacity(g.substations.len());
    for s in &g.substations {
        p_tr.push(m.add_var(format!("ptr[{}]", s.bus.0), 0.0, s.p_max, s.energy_cost)?);
        q_tr.push(m.add_var(format!("qtr[{}]", s.bus.0), s.q_min, s.q_max, 0.0)?);
    }

    let c_ll = g.loss_cost;
    let mut shed_p_minus = Vec::with_capacity(g.num_buses());
    let mut shed_p_plus = Vec::with_capacity(g.num_buses());
    let mut shed_q_minus = Vec::with_capacity(g.num_buses());
    let mut shed_q_plus = Vec::with_capacity(g.num_buses());
    for bus in &g.buses {
        let b = bus.id.0;
        shed_p_minus.push(m.add_var(format!("shed_pm[{b}]"), 0.0, bus.demand_p, c_ll)?);
        shed_p_plus.push(m.add_var(format!("shed_pp[{b}]"), 0.0, f64::INFINITY, c_ll)?);
        shed_q_minus.push(m.add_var(format!("shed_qm[{b}]"), 0.0, bus.demand_q(), c_ll)?);
        shed_q_plus.push(m.add_var(format!("shed_qp[{b}]"), 0.0, f64::INFINITY, c_ll)?);
    }

    // Power balances, one pair per bus.
    for (i, bus) in g.buses.iter().enumerate() {
        let mut terms_p: Vec<(VarId, f64)> = vec![(shed_p_plus[i], -1.0), (shed_p_minus[i], 1.0)];
        let mut terms_q: Vec<(VarId, f64)> = vec![(shed_q_plus[i], -1.0), (shed_q_minus[i], 1.0)];
        for (j, line) in g.lines.iter().enumerate() {
            if line.to_bus == bus.id {
                terms_p.push((f_p[j], 1.0));
                terms_q.push((f_q[j], 1.0));
            } else if line.from_bus == bus.id {
                terms_p.push((f_p[j], -1.0));
                terms_q.push((f_q[j], -1.0));
            }
        }
        if let Some(si) = g.substations.iter().position(|s| s.bus == bus.id) {
            terms_p.push((p_tr[si], 1.0));
            terms_q.push((q_tr[si], 1.0));
        }
        m.add_row(format!("bal_p[{}]", bus.id.0), Sense::Eq, bus.demand_p, &terms_p)?;
        m.add_row(format!("bal_q[{}]", bus.id.0), Sense::Eq, bus.demand_q(), &terms_q)?;
    }

    // Voltage drops: relaxed pair for switchable lines, equality otherwise.
    for (j, line) in g.lines.iter().enumerate() {
        let fr = g.bus_index(line.from_bus).unwrap();
        let to = g.bus_index(line.to_bus).unwrap();
        let (two_r, two_x) = (2.0 * line.r, 2.0 * line.x);
        if let Some(k) = sw_positions.iter().position(|&p| p == j) {
            let big_m = g.voltage_big_m(line);
            m.add_row(
                format!("vdrop_lo[{}]", line.id.0),
                Sense::Le,
                big_m,
                &[
                    (v_sq[fr], -1.0),
                    (v_sq[to], 1.0),
                    (f_p[j], two_r),
                    (f_q[j], two_x),
                    (z[k], big_m),
                ],
            )?;
            m.add_row(
                format!("vdrop_hi[{}]", line.id.0),
                Sense::Le,
                big_m,
                &[
                    (v_sq[fr], 1.0),
                    (v_sq[to], -1.0),
                    (f_p[j], -two_r),
                    (f_q[j], -two_x),
                    (z[k], big_m),
                ],
            )?;
        } else {
            m.add_row(
                format!("vdrop_eq[{}]", line.id.0),
                Sense::Eq,
                0.0,
                &[
                    (v_sq[fr], 1.0),
                    (v_sq[to], -1.0),
                    (f_p[j], -two_r),
                    (f_q[j], -two_x),
                ],
            )?;
        }
    }

    // Switch-gated flow boxes.
    for (k, &pos) in sw_positions.iter().enumerate() {
        let line = &g.lines[pos];
        let id = line.id.0;
        m.add_row(format!("fp_sw_hi[{id}]"), Sense::Le, 0.0, &[(f_p[pos], 1.0), (z[k], -line.f_max)])?;
        m.add_row(format!("fp_sw_lo[{id}]"), Sense::Ge, 0.0, &[(f_p[pos], 1.0), (z[k], line.f_max)])?;
        m.add_row(format!("fq_sw_hi[{id}]"), Sense::Le, 0.0, &[(f_q[pos], 1.0), (z[k], -line.f_max)])?;
        m.add_row(format!("fq_sw_lo[{id}]"), Sense::Ge, 0.0, &[(f_q[pos], 1.0), (z[k], line.f_max)])?;
    }

    // Octagonal apparent-power cuts, eight rows per line.
    for (j, line) in g.lines.iter().enumerate() {
        for (e, (slope, rhs_factor)) in octagon_cuts().iter().enumerate() {
            let rhs = rhs_factor * line.f_max;
            m.add_row(
                format!("oct_pos[{},{}]", line.id.0, e + 1),
                Sense::Le,
                rhs,
                &[(f_q[j], 1.0), (f_p[j], -slope)],
            )?;
            m.add_row(
                format!("oct_neg[{},{}]", line.id.0, e + 1),
                Sense::Le,
                rhs,
                &[(f_q[j], -1.0), (f_p[j], -slope)],
            )?;
        }
    }

    // Switching action linking: y >= |z - z0|.
    for (k, &pos) in sw_positions.iter().enumerate() {
        let line = &g.lines[pos];
        let z0 = if line.initial_closed { 1.0 } else { 0.0 };
        m.add_row(
            format!("sw_on[{}]", line.id.0),
            Sense::Ge,
            -z0,
            &[(y[k], 1.0), (z[k], -1.0)],
        )?;
        m.add_row(
            format!("sw_off[{}]", line.id.0),
            Sense::Ge,
            z0,
            &[(y[k], 1.0), (z[k], 1.0)],
        )?;
    }

    // Forbidden switching patterns.
    for (p, pattern) in g.forbidden_patterns.iter().enumerate() {
        let terms: Vec<(VarId, f64)> = pattern
            .iter()
            .map(|lid| {
                let pos = g.line_index(*lid).unwrap();
                let k = sw_positions.iter().position(|&q| q == pos).unwrap();
                (z[k], 1.0)
            })
            .collect();
        m.add_row(
            format!("forbid[{p}]"),
            Sense::Le,
            pattern.len() as f64 - 1.0,
            &terms,
        )?;
    }

    Ok(FirstStageHandles {
        z,
        y,
        f_p,
        f_q,
        v_sq,
        p_tr,
        q_tr,
        shed_p_minus,
        shed_p_plus,
        shed_q_minus,
        shed_q_plus,
    })
}

/// First-stage operating point with its cost breakdown.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FirstStageSolution {
    pub z_sw: BTreeMap<LineId, bool>,
    pub y_sw: BTreeMap<LineId, bool>,
    pub f_p: BTreeMap<LineId, f64>,
    pub f_q: BTreeMap<LineId, f64>,
    pub p_tr: BTreeMap<BusId, f64>,
    pub q_tr: BTreeMap<BusId, f64>,
    pub v_sq: BTreeMap<BusId, f64>,
    pub shed_p_minus: BTreeMap<BusId, f64>,
    pub shed_p_plus: BTreeMap<BusId, f64>,
    pub shed_q_minus: BTreeMap<BusId, f64>,
    pub shed_q_plus: BTreeMap<BusId, f64>,
    pub cost_energy: f64,
    pub cost_shed: f64,
    pub cost_switch: f64,
}

impl FirstStageSolution {
    pub fn operating_cost(&self) -> f64 {
        self.cost_energy + self.cost_shed + self.cost_switch
    }

    /// Switching vector over switchable positions, in line-id order.
    pub fn switch_vector(&self, g: &GridInstance) -> Vec<bool> {
        g.switchable_positions()
            .iter()
            .map(|&pos| self.z_sw[&g.lines[pos].id])
            .collect()
    }

    /// Flow vector per line position.
    pub fn flow_vector(&self, g: &GridInstance) -> Vec<f64> {
        g.lines.iter().map(|l| self.f_p[&l.id]).collect()
    }
}

/// Reads the first-stage portion of an optimal solve back into domain terms.
///
/// Switching actions are recomputed as `|z - z0|` rather than read from the
/// solver so that zero-cost switch variables cannot drift.
pub fn extract_first_stage(
    g: &GridInstance,
    handles: &FirstStageHandles,
    result: &SolveResult,
) -> Result<FirstStageSolution, FirstStageError> {
    if result.status != SolveStatus::Optimal {
        return Err(FirstStageError::NotOptimal(result.status));
    }
    let sw_positions = g.switchable_positions();
    let mut z_sw = BTreeMap::new();
    let mut y_sw = BTreeMap::new();
    let mut cost_switch = 0.0;
    for (k, &pos) in sw_positions.iter().enumerate() {
        let line = &g.lines[pos];
        let closed = result.value(handles.z[k]) > 0.5;
        let switched = closed != line.initial_closed;
        if switched {
            cost_switch += line.switch_cost;
        }
        z_sw.insert(line.id, closed);
        y_sw.insert(line.id, switched);
    }

    let mut f_p = BTreeMap::new();
    let mut f_q = BTreeMap::new();
    for (j, line) in g.lines.iter().enumerate() {
        f_p.insert(line.id, result.value(handles.f_p[j]));
        f_q.insert(line.id, result.value(handles.f_q[j]));
    }

    let mut v_sq = BTreeMap::new();
    let mut shed_p_minus = BTreeMap::new();
    let mut shed_p_plus = BTreeMap::new();
    let mut shed_q_minus = BTreeMap::new();
    let mut shed_q_plus = BTreeMap::new();
    let mut cost_shed = 0.0;
    for (i, bus) in g.buses.iter().enumerate() {
        v_sq.insert(bus.id, result.value(handles.v_sq[i]));
        let pm = result.value(handles.shed_p_minus[i]);
        let pp = result.value(handles.shed_p_plus[i]);
        let qm = result.value(handles.shed_q_minus[i]);
        let qp = result.value(handles.shed_q_plus[i]);
        cost_shed += g.loss_cost * (pm + pp + qm + qp);
        shed_p_minus.insert(bus.id, pm);
        shed_p_plus.insert(bus.id, pp);
        shed_q_minus.insert(bus.id, qm);
        shed_q_plus.insert(bus.id, qp);
    }

    let mut p_tr = BTreeMap::new();
    let mut q_tr = BTreeMap::new();
    let mut cost_energy = 0.0;
    for (si, s) in g.substations.iter().enumerate() {
        let p = result.value(handles.p_tr[si]);
        cost_energy += s.energy_cost * p;
        p_tr.insert(s.bus, p);
        q_tr.insert(s.bus, result.value(handles.q_tr[si]));
    }

    Ok(FirstStageSolution {
        z_sw,
        y_sw,
        f_p,
        f_q,
        p_tr,
        q_tr,
        v_sq,
        shed_p_minus,
        shed_p_plus,
        shed_q_minus,
        shed_q_plus,
        cost_energy,
        cost_shed,
        cost_switch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{Bus, GridInstance, Line, Substation};
    use crate::milp::SolverParams;

    pub(crate) fn two_bus(f_max: f64) -> GridInstance {
        GridInstance::new(
            10.0,
            3000.0,
            vec![
                Bus { id: BusId(1), demand_p: 0.0, power_factor: 1.0, v_min: 0.9, v_max: 1.1, is_substation: false },
                Bus { id: BusId(2), demand_p: 1.0, power_factor: 1.0, v_min: 0.9, v_max: 1.1, is_substation: false },
            ],
            vec![Line {
                id: LineId(1),
                from_bus: BusId(1),
                to_bus: BusId(2),
                r: 0.01,
                x: 0.01,
                f_max,
                switchable: false,
                initial_closed: true,
                switch_cost: 0.0,
            }],
            vec![Substation {
                bus: BusId(1),
                p_max: 5.0,
                q_min: -2.0,
                q_max: 2.0,
                energy_cost: 100.0,
                v_ref: 1.0,
                p_max_post: None,
                q_min_post: None,
                q_max_post: None,
            }],
            None,
        )
        .unwrap()
    }

    fn solve(g: &GridInstance) -> FirstStageSolution {
        let mut m = ModelBuilder::minimize();
        let h = build_first_stage(g, &mut m, None).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        assert_eq!(res.status, SolveStatus::Optimal);
        extract_first_stage(g, &h, &res).unwrap()
    }

    #[test]
    fn two_bus_nominal_dispatch() {
        let sol = solve(&two_bus(2.0));
        assert!((sol.f_p[&LineId(1)] - 1.0).abs() < 1e-6);
        assert!(sol.cost_shed.abs() < 1e-6);
        assert!((sol.v_sq[&BusId(2)] - 0.98).abs() < 1e-6);
        assert!((sol.cost_energy - 100.0).abs() < 1e-4);
    }

    #[test]
    fn two_bus_congested_sheds() {
        let sol = solve(&two_bus(0.5));
        assert!((sol.f_p[&LineId(1)] - 0.5).abs() < 1e-6);
        assert!((sol.shed_p_minus[&BusId(2)] - 0.5).abs() < 1e-6);
        assert!((sol.cost_shed - 1500.0).abs() < 1e-3);
    }

    #[test]
    fn constraint_counts_match_model_shape() {
        let g = crate::synth::ring_instance();
        let mut m = ModelBuilder::minimize();
        build_first_stage(&g, &mut m, None).unwrap();
        let n = g.num_buses();
        let l = g.num_lines();
        let balances = (0..m.num_rows())
            .filter(|&i| {
                let name = m.row_name(crate::milp::RowId(i));
                name.starts_with("bal_p") || name.starts_with("bal_q")
            })
            .count();
        let octs = (0..m.num_rows())
            .filter(|&i| m.row_name(crate::milp::RowId(i)).starts_with("oct_"))
            .count();
        assert_eq!(balances, 2 * n);
        assert_eq!(octs, 8 * l);
    }

    #[test]
    fn octagon_inscribes_and_circumscribes() {
        // All chords contain the disc of radius f_max*cos(pi/8) and stay
        // within the disc of radius f_max (vertices on the circle).
        let cuts = octagon_cuts();
        let f_max = 1.7;
        let inner = f_max * (std::f64::consts::PI / 8.0).cos();
        for k in 0..720 {
            let th = k as f64 * std::f64::consts::PI / 360.0;
            let (pin, qin) = (inner * 0.999 * th.cos(), inner * 0.999 * th.sin());
            for &(slope, rhs) in &cuts {
                assert!(qin - slope * pin <= rhs * f_max + 1e-9);
                assert!(-qin - slope * pin <= rhs * f_max + 1e-9);
            }
            // Every point satisfying all cuts lies within f_max / cos(pi/8).
            let (pout, qout) = (f_max * th.cos(), f_max * th.sin());
            let feasible = cuts.iter().all(|&(slope, rhs)| {
                qout - slope * pout <= rhs * f_max + 1e-9
                    && -qout - slope * pout <= rhs * f_max + 1e-9
            });
            if feasible {
                let norm = (pout * pout + qout * qout).sqrt();
                assert!(norm <= f_max / (std::f64::consts::PI / 8.0).cos() + 1e-9);
            }
        }
    }

    #[test]
    fn switchable_closed_equals_fixed_line() {
        // With the switchable line pinned closed, the relaxed voltage-drop
        // pair must reproduce the fixed-line equality objective.
        let mut g_sw = two_bus(2.0);
        g_sw.lines[0].switchable = true;
        g_sw.lines[0].initial_closed = true;
        let g_sw = GridInstance::new(
            g_sw.base_mva,
            g_sw.loss_cost,
            g_sw.buses.clone(),
            g_sw.lines.clone(),
            g_sw.substations.clone(),
            Some(vec![]),
        )
        .unwrap();
        let mut m = ModelBuilder::minimize();
        let h = build_first_stage(&g_sw, &mut m, Some(&[true])).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        let sol = extract_first_stage(&g_sw, &h, &res).unwrap();
        let fixed = solve(&two_bus(2.0));
        assert!((sol.operating_cost() - fixed.operating_cost()).abs() < 1e-6);
        assert!((sol.v_sq[&BusId(2)] - fixed.v_sq[&BusId(2)]).abs() < 1e-6);
    }

    #[test]
    fn open_switchable_forces_zero_flow() {
        let mut lines = two_bus(2.0).lines.clone();
        lines[0].switchable = true;
        lines[0].initial_closed = false;
        let base = two_bus(2.0);
        let g = GridInstance::new(10.0, base.loss_cost, base.buses.clone(), lines, base.substations.clone(), Some(vec![]))
            .unwrap();
        let mut m = ModelBuilder::minimize();
        let h = build_first_stage(&g, &mut m, Some(&[false])).unwrap();
        let res = m.solve(&SolverParams::default()).unwrap();
        let sol = extract_first_stage(&g, &h, &res).unwrap();
        assert!(sol.f_p[&LineId(1)].abs() < 1e-8);
        assert!(sol.f_q[&LineId(1)].abs() < 1e-8);
        assert!((sol.shed_p_minus[&BusId(2)] - 1.0).abs() < 1e-6);
    }
}
