//! Outer-approximation loop: alternate the relaxed master and the
//! worst-case subproblem, accumulate optimality cuts, and stop when the
//! relative gap closes. Cut caches persist across runs (and across beta
//! configurations, where cuts stay valid) keyed by an instance signature.

use crate::ambiguity::DduConfig;
use crate::grid::GridInstance;
use crate::master::{build_master, extract_master, MasterError, MasterSolution, OptimalityCut};
use crate::milp::{ModelBuilder, SolverParams};
use crate::recourse::{ContingencyScenario, DualSolution, RecourseTemplate};
use crate::subproblem::{solve_subproblem, SubproblemError, SubproblemMethod};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Subproblem(#[from] SubproblemError),
    #[error("cut cache was built for another instance (cache {cache:#x}, instance {instance:#x})")]
    SignatureMismatch { cache: u64, instance: u64 },
    #[error("cut {id} names do not match this instance's recourse rows at position {position}")]
    CutNameMismatch { id: usize, position: usize },
    #[error("cannot read or write cut cache: {0}")]
    Io(#[from] std::io::Error),
    #[error("cut cache does not parse: {0}")]
    Parse(#[from] serde_json::Error),
}

/// One pass of the loop: bounds, gap, and the scenario whose cut was
/// added afterwards (absent on the converged pass).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationLog {
    pub iteration: usize,
    pub lb: f64,
    pub ub: f64,
    pub best_ub: f64,
    pub gap: f64,
    pub scenario_added: Option<ContingencyScenario>,
    pub wall_time: f64,
}

/// Instance fingerprint stored alongside cuts.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceSignature {
    pub buses: usize,
    pub lines: usize,
    pub topology_hash: u64,
}

impl InstanceSignature {
    pub fn of(g: &GridInstance) -> Self {
        InstanceSignature {
            buses: g.num_buses(),
            lines: g.num_lines(),
            topology_hash: g.signature(),
        }
    }
}

/// On-disk cut record: scenario bit-vector plus the full dual vector by
/// constraint name, in the template's stable row order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutRecord {
    pub iteration: usize,
    pub scenario: Vec<u8>,
    pub eta: Vec<(String, f64)>,
}

/// Portable cut cache. Duals follow the recourse convention: row duals of
/// the minimization LP, `sum(dual * rhs)` equal to the recourse cost.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutCache {
    pub signature: InstanceSignature,
    pub dual_convention: String,
    pub cuts: Vec<CutRecord>,
}

pub const DUAL_CONVENTION: &str =
    "min-LP row duals; <= rows nonpositive, >= rows nonnegative; dual objective = sum(dual * rhs)";

impl CutCache {
    pub fn empty(g: &GridInstance) -> Self {
        CutCache {
            signature: InstanceSignature::of(g),
            dual_convention: DUAL_CONVENTION.to_string(),
            cuts: Vec::new(),
        }
    }

    pub fn push(&mut self, template: &RecourseTemplate, cut: &OptimalityCut) {
        let names = template.row_names();
        self.cuts.push(CutRecord {
            iteration: cut.id,
            scenario: cut.scenario.as_bits(),
            eta: names
                .iter()
                .zip(cut.dual.values.iter())
                .map(|(n, v)| (n.to_string(), *v))
                .collect(),
        });
    }

    /// Rehydrates cuts against this instance's template, checking the
    /// topology signature and every constraint name.
    pub fn to_cuts(
        &self,
        g: &GridInstance,
        template: &RecourseTemplate,
    ) -> Result<Vec<OptimalityCut>, DriverError> {
        let expected = g.signature();
        if self.signature.topology_hash != expected
            || self.signature.buses != g.num_buses()
            || self.signature.lines != g.num_lines()
        {
            return Err(DriverError::SignatureMismatch {
                cache: self.signature.topology_hash,
                instance: expected,
            });
        }
        let names = template.row_names();
        let mut out = Vec::with_capacity(self.cuts.len());
        for rec in &self.cuts {
            if rec.eta.len() != names.len() {
                return Err(DriverError::CutNameMismatch {
                    id: rec.iteration,
                    position: rec.eta.len().min(names.len()),
                });
            }
            let mut values = Vec::with_capacity(rec.eta.len());
            for (pos, ((name, value), expected_name)) in
                rec.eta.iter().zip(names.iter()).enumerate()
            {
                if name != expected_name {
                    return Err(DriverError::CutNameMismatch { id: rec.iteration, position: pos });
                }
                values.push(*value);
            }
            out.push(OptimalityCut {
                id: rec.iteration,
                scenario: ContingencyScenario::from_bits(&rec.scenario),
                dual: DualSolution { values },
            });
        }
        Ok(out)
    }
}

pub fn save_cuts(cache: &CutCache, path: impl AsRef<Path>) -> Result<(), DriverError> {
    let text = serde_json::to_string_pretty(cache)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_cuts(path: impl AsRef<Path>) -> Result<CutCache, DriverError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[derive(Debug, Clone)]
pub struct DriverOptions {
    pub subproblem_method: SubproblemMethod,
    pub solver_params: SolverParams,
}

impl Default for DriverOptions {
    fn default() -> Self {
        DriverOptions {
            subproblem_method: SubproblemMethod::DualMilp,
            solver_params: SolverParams::default(),
        }
    }
}

/// Full decomposition outcome.
#[derive(Debug)]
pub struct DdroOutcome {
    pub solution: MasterSolution,
    pub log: Vec<IterationLog>,
    pub cuts: CutCache,
    pub converged: bool,
    pub gap: f64,
}

/// Runs the outer-approximation loop to the configured relative gap.
///
/// Each pass solves the master over the accumulated cuts (a lower bound),
/// finds the worst-case contingency at the master's `(z, psi)`, forms the
/// upper bound `LB - phi + subproblem objective`, and adds the scenario's
/// cut until `(best UB - LB) / max(|best UB|, 1) <= epsilon`. Hitting the
/// iteration cap returns the incumbent with `converged = false`.
pub fn solve_ddro(
    g: &GridInstance,
    cfg: &DduConfig,
    warm_cuts: Option<&CutCache>,
) -> Result<DdroOutcome, DriverError> {
    solve_ddro_with(g, cfg, warm_cuts, &DriverOptions::default())
}

pub fn solve_ddro_with(
    g: &GridInstance,
    cfg: &DduConfig,
    warm_cuts: Option<&CutCache>,
    options: &DriverOptions,
) -> Result<DdroOutcome, DriverError> {
    let template = RecourseTemplate::new(g);
    let mut cuts: Vec<OptimalityCut> = match warm_cuts {
        Some(cache) => cache.to_cuts(g, &template)?,
        None => Vec::new(),
    };
    let mut next_cut_id = cuts.iter().map(|c| c.id + 1).max().unwrap_or(0);

    let start = Instant::now();
    let mut log: Vec<IterationLog> = Vec::new();
    let mut best_ub = f64::INFINITY;
    let mut outcome: Option<(MasterSolution, bool, f64)> = None;

    for iteration in 0..cfg.max_iterations {
        let mut m = ModelBuilder::minimize();
        let handles = build_master(g, cfg, &template, &cuts, &mut m)?;
        let res = m.solve(&options.solver_params).map_err(MasterError::from)?;
        let master = extract_master(g, &handles, &res)?;
        let lb = master.objective;

        let z = master.first_stage.switch_vector(g);
        let sub = solve_subproblem(
            &template,
            cfg,
            &z,
            &master.psi,
            options.subproblem_method,
            &options.solver_params,
        )?;
        let ub = lb - master.phi + sub.objective;
        best_ub = best_ub.min(ub);
        let gap = (best_ub - lb) / best_ub.abs().max(1.0);
        let converged = gap <= cfg.epsilon;

        log.push(IterationLog {
            iteration,
            lb,
            ub,
            best_ub,
            gap,
            scenario_added: if converged { None } else { Some(sub.scenario.clone()) },
            wall_time: start.elapsed().as_secs_f64(),
        });

        if converged {
            outcome = Some((master, true, gap));
            break;
        }
        cuts.push(OptimalityCut { id: next_cut_id, scenario: sub.scenario, dual: sub.dual });
        next_cut_id += 1;
        outcome = Some((master, false, gap));
    }

    let (solution, converged, gap) = outcome.expect("max_iterations is validated positive");
    let mut cache = CutCache::empty(g);
    for cut in &cuts {
        cache.push(&template, cut);
    }
    Ok(DdroOutcome { solution, log, cuts: cache, converged, gap })
}
