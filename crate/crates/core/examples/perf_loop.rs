use gridfire_core::ambiguity::DduConfig;
use gridfire_core::master::{build_master, extract_master, OptimalityCut};
use gridfire_core::milp::{ModelBuilder, SolverParams};
use gridfire_core::recourse::RecourseTemplate;
use gridfire_core::subproblem::{solve_subproblem, SubproblemMethod};
use gridfire_core::synth::random_radial_instance;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
    let n_buses = 4 + (seed as usize * 3) % 7;
    let n_sw = 1 + (seed as usize) % 4;
    let g = random_radial_instance(seed, n_buses, n_sw);
    let beta = [0.0, 0.05, 0.2, 0.5][(seed % 4) as usize];
    let mut cfg = DduConfig::uniform(&g, 0.01, beta, (seed % 3) as usize);
    cfg.expansion_step = 0.01;
    cfg.expansion_digits = vec![7; g.num_lines()];
    cfg.epsilon = 1e-6;
    cfg.validate(&g).unwrap();
    let template = RecourseTemplate::new(&g);
    let mut cuts: Vec<OptimalityCut> = vec![];
    let params = SolverParams::default();
    let mut best_ub = f64::INFINITY;
    for it in 0..30 {
        let t = Instant::now();
        let mut m = ModelBuilder::minimize();
        let h = build_master(&g, &cfg, &template, &cuts, &mut m).unwrap();
        let res = m.solve(&params).unwrap();
        let master_t = t.elapsed().as_secs_f64();
        let sol = extract_master(&g, &h, &res).unwrap();
        let z = sol.first_stage.switch_vector(&g);
        let t2 = Instant::now();
        let sub = solve_subproblem(&template, &cfg, &z, &sol.psi, SubproblemMethod::DualMilp, &params).unwrap();
        let sub_t = t2.elapsed().as_secs_f64();
        let ub = sol.objective - sol.phi + sub.objective;
        best_ub = best_ub.min(ub);
        let gap = (best_ub - sol.objective) / best_ub.abs().max(1.0);
        println!(
            "it {it:2} master {master_t:7.2}s ({} nodes, {} iters) sub {sub_t:5.2}s LB {:.4} UB {ub:.4} gap {gap:.2e}",
            res.nodes, res.simplex_iterations, sol.objective
        );
        if gap <= cfg.epsilon { println!("converged"); break; }
        cuts.push(OptimalityCut { id: it, scenario: sub.scenario, dual: sub.dual });
    }
}
