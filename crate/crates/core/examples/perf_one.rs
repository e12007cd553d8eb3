use gridfire_core::ambiguity::DduConfig;
use gridfire_core::driver::solve_ddro;
use gridfire_core::synth::random_radial_instance;
use std::time::Instant;

fn main() {
    let seed: u64 = std::env::args().nth(1).unwrap().parse().unwrap();
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
    println!(
        "seed {seed} buses {n_buses} lines {} iters {} time {:.2}s converged {}",
        g.num_lines(), out.log.len(), t.elapsed().as_secs_f64(), out.converged
    );
}
