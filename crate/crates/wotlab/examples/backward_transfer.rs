//! The backward representation of a transport functional: the partial
//! Legendre transform acts through a kernel map `T(g) = -rc(-g)`, and the
//! supremum of `nu(g) - mu(T(g))` recovers the primal value.

use wotlab::costs::CostModel;
use wotlab::measures::DiscreteMeasure;
use wotlab::wot::{legendre_transfer, verify_transfer_representation, SolveOptions};

fn main() -> wotlab::Result<()> {
    let mu = DiscreteMeasure::from_1d(&[(0.0, 0.5), (1.0, 0.5)])?;
    let nu = DiscreteMeasure::from_1d(&[(0.0, 0.5), (2.0, 0.5)])?;
    let model = CostModel::classical(vec![vec![0.0, 2.0], vec![1.0, 1.0]]);

    // The kernel map at a particular test function.
    let g = vec![0.5, -0.25];
    let t = legendre_transfer(&model, &mu, &nu, &g)?;
    println!("T(g) on the row atoms: {t:?}");

    let verdict = verify_transfer_representation(&model, &mu, &nu, &SolveOptions::default())?;
    println!("primal value     : {:.9}", verdict.primal);
    println!("transfer supremum: {:.9}", verdict.transfer_value);
    println!(
        "relative diff {:.2e} -> {}",
        verdict.rel_diff,
        if verdict.passed { "representation verified" } else { "mismatch" }
    );
    Ok(())
}
