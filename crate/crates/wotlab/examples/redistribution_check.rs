//! Monotonicity of couplings under mass redistribution: the optimizer's
//! conditional laws cannot be improved by any pooled reshuffle, while a
//! deliberately bad coupling is refuted with a constructive witness.

use wotlab::costs::CostModel;
use wotlab::measures::{Coupling, DiscreteMeasure};
use wotlab::monotonicity::{check_c_monotone, check_cyclical_monotone, RedistributeOptions};
use wotlab::wot::{solve_primal, SolveOptions};

fn main() -> wotlab::Result<()> {
    let mu = DiscreteMeasure::from_1d(&[(0.0, 0.5), (1.0, 0.5)])?;
    let nu = mu.clone();
    let model = CostModel::Barycentric;
    let redistribute = RedistributeOptions::default();

    // The solver's coupling passes the subset checks.
    let sol = solve_primal(&model, &mu, &nu, &SolveOptions::default())?;
    let verdict = check_c_monotone(&model, &sol.coupling, 4, 100, 1, 1e-6, &redistribute)?;
    println!(
        "optimizer: passed = {}, worst violation {:.2e} over {} subsets",
        verdict.passed, verdict.worst_violation, verdict.subsets_checked
    );

    // The anti-diagonal coupling swaps two atoms it should not.
    let bad = Coupling::new(mu.clone(), nu.clone(), vec![vec![0.0, 0.5], vec![0.5, 0.0]])?;
    let verdict = check_c_monotone(&model, &bad, 4, 100, 1, 1e-6, &redistribute)?;
    println!(
        "anti-diagonal: passed = {}, worst violation {:.4}",
        verdict.passed, verdict.worst_violation
    );
    if let Some(witness) = verdict.witness {
        println!(
            "  improving rows {:?}: redistributed laws {:?} (gain {:.4})",
            witness.rows, witness.q, witness.improvement
        );
    }

    // Classical special case: permutation tests on the support.
    let cost = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
    let cyc = check_cyclical_monotone(&cost, &bad, 4, 50, 1, 1e-9)?;
    println!(
        "cyclical check on the bad coupling: passed = {} (improvement {:.4})",
        cyc.passed, cyc.worst_violation
    );
    Ok(())
}
