use gridfire_core::ambiguity::DduConfig;
use gridfire_core::milp::SolverParams;
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
    cfg.validate(&g).unwrap();
    let template = RecourseTemplate::new(&g);
    let z = g.initial_switch_state();
    let mut psi = vec![0.0; 2 * g.num_lines()];
    for (i, p) in psi.iter_mut().enumerate().take(g.num_lines()) {
        *p = (i as f64) * 37.0;
    }
    let params = SolverParams::default();
    for method in [SubproblemMethod::DualMilp, SubproblemMethod::Enumeration] {
        let t = Instant::now();
        let sol = solve_subproblem(&template, &cfg, &z, &psi, method, &params).unwrap();
        println!("{method:?}: {:.3}s obj {:.4}", t.elapsed().as_secs_f64(), sol.objective);
    }
}
