//! How does the optimal value move when the marginals wobble? Re-solves
//! under seeded weight perturbations and reports transport drift against
//! value movement.

use wotlab::costs::CostModel;
use wotlab::engines::distance_cost;
use wotlab::measures::DiscreteMeasure;
use wotlab::wot::{stability_probe, SolveOptions};

fn main() -> wotlab::Result<()> {
    let mu = DiscreteMeasure::from_1d(&[(0.0, 0.3), (1.0, 0.4), (2.0, 0.3)])?;
    let nu = DiscreteMeasure::from_1d(&[(0.5, 0.5), (2.5, 0.5)])?;
    let model = CostModel::classical(distance_cost(&mu, &nu));

    let report = stability_probe(
        &model,
        &mu,
        &nu,
        8,    // perturbations
        1e-2, // weight perturbation scale
        1.0,  // transport-drift credit per unit distance
        42,
        &SolveOptions::default(),
    )?;
    println!("base value: {:.9}", report.base_value);
    for (k, run) in report.runs.iter().enumerate() {
        println!(
            "  run {k}: value {:.9}, drift (w1 mu {:.2e}, w1 nu {:.2e}), downward jump {:.2e}",
            run.value, run.w1_mu, run.w1_nu, run.downward_jump
        );
    }
    println!(
        "max downward jump {:.3e}, beyond-drift excess {:.3e}",
        report.max_downward_jump, report.max_excess
    );
    Ok(())
}
