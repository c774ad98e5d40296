use std::time::Instant;
use wotlab::suite::{random_instance, Family};
use wotlab::wot::{solve_primal, solve_dual, duality_gap, SolveOptions};

fn main() {
    let opts = SolveOptions { rel_tol: 1e-9, ..SolveOptions::default() };
    let (model, mu, nu) = random_instance(Family::Barycentric, 8 * 37 + 1000, 20, 3);
    eprintln!("instance {}x{} dim 3", mu.len(), nu.len());
    let t0 = Instant::now();
    let sol = solve_primal(&model, &mu, &nu, &opts).unwrap();
    eprintln!("primal {:.2}s value {:.6} iters {} gap {:.1e}", t0.elapsed().as_secs_f64(), sol.value, sol.iterations, sol.fw_gap);
    let t1 = Instant::now();
    let cert = solve_dual(&model, &mu, &nu, &opts).unwrap();
    eprintln!("dual {:.2}s value {:.6}", t1.elapsed().as_secs_f64(), cert.dual_value);
    let rep = duality_gap(&sol, &cert).unwrap();
    eprintln!("rel gap {:.2e}", rep.rel_gap);
}
