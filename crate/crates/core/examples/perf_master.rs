use gridfire_core::ambiguity::DduConfig;
use gridfire_core::master::{build_master, OptimalityCut};
use gridfire_core::milp::{ModelBuilder, SolverParams};
use gridfire_core::recourse::RecourseTemplate;
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
    let cuts: Vec<OptimalityCut> = vec![];
    let mut m = ModelBuilder::minimize();
    build_master(&g, &cfg, &template, &cuts, &mut m).unwrap();
    println!("master: {} vars, {} rows", m.num_vars(), m.num_rows());
    let t = Instant::now();
    let res = m.solve(&SolverParams::default()).unwrap();
    println!(
        "solve {:.2}s nodes {} simplex_iters {} obj {:.3}",
        t.elapsed().as_secs_f64(), res.nodes, res.simplex_iterations, res.objective_value
    );
}
