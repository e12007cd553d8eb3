use gridfire_core::ambiguity::{worst_case_expectation_oracle, DduConfig};
use gridfire_core::driver::solve_ddro;
use gridfire_core::recourse::RecourseTemplate;
use gridfire_core::synth::random_radial_instance;
use std::time::Instant;

fn main() {
    let mut total = 0.0;
    for seed in 0..20u64 {
        let n_buses = 4 + (seed as usize * 3) % 7;
        let n_sw = 1 + (seed as usize) % 4;
        let g = random_radial_instance(seed, n_buses, n_sw);
        let k = (seed % 3) as usize;
        let beta = [0.0, 0.05, 0.2, 0.5][(seed % 4) as usize];
        let mut cfg = DduConfig::uniform(&g, 0.01, beta, k);
        cfg.expansion_step = 0.01;
        cfg.expansion_digits = vec![7; g.num_lines()];
        cfg.epsilon = 1e-6;
        cfg.validate(&g).unwrap();
        let t = Instant::now();
        let out = solve_ddro(&g, &cfg, None).unwrap();
        let solve_t = t.elapsed().as_secs_f64();
        let t2 = Instant::now();
        let template = RecourseTemplate::new(&g);
        let z = out.solution.first_stage.switch_vector(&g);
        let flows = out.solution.first_stage.flow_vector(&g);
        let oracle = worst_case_expectation_oracle(&g, &cfg, &template, &z, &flows).unwrap();
        let oracle_t = t2.elapsed().as_secs_f64();
        let total_cost = out.solution.first_stage.operating_cost() + oracle.value;
        let rel = (out.solution.objective - total_cost).abs() / total_cost.abs().max(1.0);
        println!(
            "seed {seed:2} buses {n_buses:2} lines {:2} k {k} beta {beta:<4} iters {:2} solve {solve_t:6.2}s oracle {oracle_t:5.2}s relerr {rel:.2e} {}",
            g.num_lines(),
            out.log.len(),
            if out.converged { "ok" } else { "NOT CONVERGED" }
        );
        total += solve_t + oracle_t;
    }
    println!("total: {total:.1}s");
}
