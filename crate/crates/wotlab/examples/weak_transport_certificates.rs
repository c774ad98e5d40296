//! Solve a weak transport problem and certify it from both sides: the
//! Frank-Wolfe gap bounds the primal suboptimality, the dual vector gives a
//! lower bound, and the two meet.

use wotlab::costs::CostModel;
use wotlab::measures::DiscreteMeasure;
use wotlab::wot::{duality_gap, solve_dual, solve_primal, SolveOptions};

fn main() -> wotlab::Result<()> {
    // Barycentric cost: pay the squared distance between each source atom
    // and the mean of wherever its mass ends up.
    let mu = DiscreteMeasure::from_1d(&[(-2.0, 0.25), (-0.5, 0.25), (1.0, 0.25), (2.5, 0.25)])?;
    let nu = DiscreteMeasure::from_1d(&[(-1.0, 0.4), (0.0, 0.2), (1.5, 0.4)])?;
    let model = CostModel::Barycentric;
    let opts = SolveOptions::default();

    let solution = solve_primal(&model, &mu, &nu, &opts)?;
    println!("primal value     : {:.9}", solution.value);
    println!("frank-wolfe gap  : {:.3e}", solution.fw_gap);
    println!("iterations       : {}", solution.iterations);
    for (i, row) in solution.coupling.mass.iter().enumerate() {
        println!("  mass row {i}: {row:?}");
    }

    let certificate = solve_dual(&model, &mu, &nu, &opts)?;
    println!("dual value       : {:.9}", certificate.dual_value);
    println!("dual vector g    : {:?}", certificate.g);

    let report = duality_gap(&solution, &certificate)?;
    println!(
        "gap {:.3e} (relative {:.3e}) -> {}",
        report.gap,
        report.rel_gap,
        if report.passed { "strong duality verified" } else { "gap too large" }
    );
    Ok(())
}
