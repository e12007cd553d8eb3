use gridfire_core::ambiguity::DduConfig;
use gridfire_core::master::{build_master, OptimalityCut};
use gridfire_core::milp::{ModelBuilder, SolverParams};
use gridfire_core::recourse::RecourseTemplate;
use gridfire_core::subproblem::{solve_subproblem, SubproblemMethod};
use gridfire_core::synth::random_radial_instance;

fn main() {
    let seed = 2u64;
    let g = random_radial_instance(seed, 10, 3);
    let mut cfg = DduConfig::uniform(&g, 0.01, 0.2, 2);
    cfg.expansion_step = 0.01;
    cfg.expansion_digits = vec![7; g.num_lines()];
    cfg.validate(&g).unwrap();
    let template = RecourseTemplate::new(&g);
    let params = SolverParams::default();
    let mut cuts: Vec<OptimalityCut> = vec![];
    for it in 0..3 {
        let mut m = ModelBuilder::minimize();
        let h = build_master(&g, &cfg, &template, &cuts, &mut m).unwrap();
        let res = m.solve(&params).unwrap();
        println!("it {it}: obj {} status {:?} nodes {}", res.objective_value, res.status, res.nodes);
        // verify feasibility of returned primal
        let viol = m.max_violation(&res.primal_values);
        println!("   max row violation: {viol:.3e}");
        let sol = gridfire_core::master::extract_master(&g, &h, &res).unwrap();
        let z = sol.first_stage.switch_vector(&g);
        let sub = solve_subproblem(&template, &cfg, &z, &sol.psi, SubproblemMethod::DualMilp, &params).unwrap();
        cuts.push(OptimalityCut { id: it, scenario: sub.scenario, dual: sub.dual });
    }
}
