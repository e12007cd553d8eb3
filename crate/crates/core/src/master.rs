//! Relaxed master MILP: the first-stage model plus dual weights `psi`,
//! the epigraph variable `phi`, a binary expansion linearizing each
//! `psi_l * |f_l|` product, and the accumulated optimality cuts.

use crate::ambiguity::DduConfig;
use crate::grid::{GridInstance, LineId};
use crate::milp::{
    ModelBuilder, ModelError, RowId, Sense, SolveResult, SolveStatus, SolverParams, VarId,
};
use crate::pre_contingency::{
    build_first_stage, extract_first_stage, FirstStageError, FirstStageHandles, FirstStageSolution,
};
use crate::recourse::{ContingencyScenario, DualSolution, RecourseError, RecourseTemplate};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MasterError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    FirstStage(#[from] FirstStageError),
    #[error(transparent)]
    Recourse(#[from] RecourseError),
    #[error("master MILP ended {0:?}")]
    NotOptimal(SolveStatus),
    #[error("cut {id} carries {got} duals, template has {expected} rows")]
    CutShape { id: usize, got: usize, expected: usize },
}

/// One recorded subproblem solution: scenario plus recourse dual. The
/// affine cut in `(z, psi, phi)` is reconstructed from the template, so
/// cuts stay portable across runs and beta configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimalityCut {
    pub id: usize,
    pub scenario: ContingencyScenario,
    pub dual: DualSolution,
}

/// Coefficients of one cut: `phi >= c0 + sum_k kappa_k z_k
/// - sum_l (psi_l - psi_{L+l}) (1 - a_l)`.
pub(crate) struct CutCoefficients {
    pub c0: f64,
    /// Per switchable rank.
    pub kappa: Vec<f64>,
}

pub(crate) fn cut_coefficients(
    template: &RecourseTemplate,
    cut: &OptimalityCut,
) -> Result<CutCoefficients, MasterError> {
    if cut.dual.values.len() != template.rows.len() {
        return Err(MasterError::CutShape {
            id: cut.id,
            got: cut.dual.values.len(),
            expected: template.rows.len(),
        });
    }
    let mut c0 = 0.0;
    let mut kappa = vec![0.0; template.num_switchable()];
    for (i, row) in template.rows.iter().enumerate() {
        let eta = cut.dual.values[i];
        if eta == 0.0 {
            continue;
        }
        let mut constant = row.base;
        if let Some((j, ca)) = row.a_coef {
            if cut.scenario.is_available(j) {
                constant += ca;
            }
        }
        c0 += eta * constant;
        if let Some((k, cz)) = row.z_coef {
            kappa[k] += eta * cz;
        }
    }
    Ok(CutCoefficients { c0, kappa })
}

/// Right-hand side of a cut at a candidate `(z, psi)`; the master keeps
/// `phi` at or above this value.
pub fn evaluate_cut(
    template: &RecourseTemplate,
    cut: &OptimalityCut,
    z: &[bool],
    psi: &[f64],
) -> Result<f64, MasterError> {
    let coeffs = cut_coefficients(template, cut)?;
    let n = template.num_lines();
    let mut value = coeffs.c0;
    for (k, &kap) in coeffs.kappa.iter().enumerate() {
        if z[k] {
            value += kap;
        }
    }
    for l in 0..n {
        if cut.scenario.is_failed(l) {
            value -= psi[l] - psi[n + l];
        }
    }
    Ok(value)
}

/// Handles into the master model.
pub struct MasterHandles {
    pub first_stage: FirstStageHandles,
    pub psi: Vec<VarId>,
    pub phi: VarId,
    pub chi: Vec<VarId>,
    pub xi: Vec<VarId>,
    pub f_plus: Vec<VarId>,
    pub f_minus: Vec<VarId>,
    pub delta: Vec<Vec<VarId>>,
    pub rho: Vec<Vec<VarId>>,
    pub cut_rows: Vec<RowId>,
}

/// Builds the master into `m`: first-stage constraints, the epigraph and
/// moment-weight objective terms, the flow binary expansion, the
/// weight-digit envelopes, and one row per accumulated cut.
pub fn build_master(
    g: &GridInstance,
    cfg: &DduConfig,
    template: &RecourseTemplate,
    cuts: &[OptimalityCut],
    m: &mut ModelBuilder,
) -> Result<MasterHandles, MasterError> {
    let first_stage = build_first_stage(g, m, None)?;
    let n = g.num_lines();
    let s = cfg.expansion_step;
    let m_psi = cfg.psi_big_m;

    for &zv in &first_stage.z {
        m.set_branch_priority(zv, 100);
    }

    // Moment weights: upper rows priced by gamma, lower rows vacuous
    // (optionally pinned to zero).
    let mut psi = Vec::with_capacity(2 * n);
    for (l, line) in g.lines.iter().enumerate() {
        psi.push(m.add_var(format!("psi_hi[{}]", line.id.0), 0.0, m_psi, cfg.gamma[l])?);
    }
    for line in &g.lines {
        let hi = if cfg.fix_psi_lower { 0.0 } else { m_psi };
        psi.push(m.add_var(format!("psi_lo[{}]", line.id.0), 0.0, hi, 0.0)?);
    }

    // Epigraph for the worst-case expectation; recourse costs are
    // nonnegative, so zero anchors the empty-cut master.
    let phi = m.add_var("phi", 0.0, f64::INFINITY, 1.0)?;

    // Flow split, sign binary, and the expansion digits.
    let mut chi = Vec::with_capacity(n);
    let mut xi = Vec::with_capacity(n);
    let mut f_plus = Vec::with_capacity(n);
    let mut f_minus = Vec::with_capacity(n);
    let mut delta: Vec<Vec<VarId>> = Vec::with_capacity(n);
    let mut rho: Vec<Vec<VarId>> = Vec::with_capacity(n);
    for (l, line) in g.lines.iter().enumerate() {
        let id = line.id.0;
        let fp = first_stage.f_p[l];
        let xiv = m.add_binary(format!("xi[{id}]"), 0.0)?;
        m.set_branch_priority(xiv, 50);
        let fpv = m.add_var(format!("fplus[{id}]"), 0.0, f64::INFINITY, 0.0)?;
        let fmv = m.add_var(format!("fminus[{id}]"), 0.0, f64::INFINITY, 0.0)?;
        m.add_row(
            format!("fsplit[{id}]"),
            Sense::Eq,
            0.0,
            &[(fp, 1.0), (fpv, -1.0), (fmv, 1.0)],
        )?;
        m.add_row(format!("fplus_cap[{id}]"), Sense::Le, 0.0, &[(fpv, 1.0), (xiv, -line.f_max)])?;
        m.add_row(
            format!("fminus_cap[{id}]"),
            Sense::Le,
            line.f_max,
            &[(fmv, 1.0), (xiv, line.f_max)],
        )?;

        let digits = cfg.expansion_digits[l];
        let mut dl = Vec::with_capacity(digits as usize);
        let mut rl = Vec::with_capacity(digits as usize);
        let mut expansion: Vec<(VarId, f64)> = vec![(fpv, 1.0), (fmv, 1.0)];
        let mut chi_terms: Vec<(VarId, f64)> = Vec::with_capacity(digits as usize + 1);
        for e in 1..=digits {
            let weight = (1u64 << (e - 1)) as f64;
            let dv = m.add_binary(format!("delta[{id},{e}]"), 0.0)?;
            m.set_branch_priority(dv, 10 + e as i32);
            let rv = m.add_var(format!("rho[{id},{e}]"), 0.0, m_psi, 0.0)?;
            expansion.push((dv, -s * weight));
            // psi - rho within M(1 - delta); rho within M*delta. Together
            // with rho >= 0 these pin rho = psi * delta at binary points.
            m.add_row(
                format!("rho_env_lo[{id},{e}]"),
                Sense::Ge,
                -m_psi,
                &[(psi[l], 1.0), (rv, -1.0), (dv, -m_psi)],
            )?;
            m.add_row(
                format!("rho_env_hi[{id},{e}]"),
                Sense::Le,
                m_psi,
                &[(psi[l], 1.0), (rv, -1.0), (dv, m_psi)],
            )?;
            m.add_row(format!("rho_cap[{id},{e}]"), Sense::Le, 0.0, &[(rv, 1.0), (dv, -m_psi)])?;
            chi_terms.push((rv, -s * weight));
            dl.push(dv);
            rl.push(rv);
        }
        m.add_row(format!("expansion[{id}]"), Sense::Eq, 0.0, &expansion)?;

        let chiv = m.add_var(format!("chi[{id}]"), 0.0, f64::INFINITY, cfg.beta[l])?;
        chi_terms.push((chiv, 1.0));
        m.add_row(format!("chi_def[{id}]"), Sense::Eq, 0.0, &chi_terms)?;
        chi.push(chiv);
        xi.push(xiv);
        f_plus.push(fpv);
        f_minus.push(fmv);
        delta.push(dl);
        rho.push(rl);
    }

    // Optimality cuts.
    let mut cut_rows = Vec::with_capacity(cuts.len());
    for cut in cuts {
        let coeffs = cut_coefficients(template, cut)?;
        let mut terms: Vec<(VarId, f64)> = vec![(phi, 1.0)];
        for (k, &kap) in coeffs.kappa.iter().enumerate() {
            if kap != 0.0 {
                terms.push((first_stage.z[k], -kap));
            }
        }
        for l in 0..n {
            if cut.scenario.is_failed(l) {
                terms.push((psi[l], 1.0));
                terms.push((psi[n + l], -1.0));
            }
        }
        cut_rows.push(m.add_row(format!("cut[{}]", cut.id), Sense::Ge, coeffs.c0, &terms)?);
    }

    Ok(MasterHandles {
        first_stage,
        psi,
        phi,
        chi,
        xi,
        f_plus,
        f_minus,
        delta,
        rho,
        cut_rows,
    })
}

/// Master optimum: first-stage point, dual weights, epigraph value, and
/// the linearization internals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MasterSolution {
    pub first_stage: FirstStageSolution,
    /// Stacked weights, upper rows then lower rows.
    pub psi: Vec<f64>,
    pub phi: f64,
    pub chi: BTreeMap<LineId, f64>,
    pub xi: BTreeMap<LineId, bool>,
    pub delta: BTreeMap<LineId, Vec<bool>>,
    pub rho: BTreeMap<LineId, Vec<f64>>,
    /// Objective of the relaxed master (the decomposition lower bound).
    pub objective: f64,
}

impl MasterSolution {
    /// The linearized worst-case term `sum(gamma psi + beta chi) + phi`.
    pub fn worst_case_term(&self, g: &GridInstance, cfg: &DduConfig) -> f64 {
        let mut total = self.phi;
        for (l, line) in g.lines.iter().enumerate() {
            total += cfg.gamma[l] * self.psi[l] + cfg.beta[l] * self.chi[&line.id];
        }
        total
    }
}

pub fn extract_master(
    g: &GridInstance,
    handles: &MasterHandles,
    result: &SolveResult,
) -> Result<MasterSolution, MasterError> {
    if result.status != SolveStatus::Optimal {
        return Err(MasterError::NotOptimal(result.status));
    }
    let first_stage = extract_first_stage(g, &handles.first_stage, result)?;
    let psi = handles.psi.iter().map(|&v| result.value(v)).collect();
    let mut chi = BTreeMap::new();
    let mut xi = BTreeMap::new();
    let mut delta = BTreeMap::new();
    let mut rho = BTreeMap::new();
    for (l, line) in g.lines.iter().enumerate() {
        chi.insert(line.id, result.value(handles.chi[l]));
        xi.insert(line.id, result.value(handles.xi[l]) > 0.5);
        delta.insert(
            line.id,
            handles.delta[l].iter().map(|&v| result.value(v) > 0.5).collect(),
        );
        rho.insert(line.id, handles.rho[l].iter().map(|&v| result.value(v)).collect());
    }
    Ok(MasterSolution {
        first_stage,
        psi,
        phi: result.value(handles.phi),
        chi,
        xi,
        delta,
        rho,
        objective: result.objective_value,
    })
}
