//! Decide convex and increasing convex order between discrete measures.
//! Positive answers come with a (sub)martingale coupling, negative ones with
//! a separating max-of-affine test function whose margin is re-evaluated
//! directly.

use wotlab::measures::DiscreteMeasure;
use wotlab::orders::{check_convex_order, check_icx_order, OrderOutcome};

fn describe(outcome: &OrderOutcome) -> String {
    match outcome {
        OrderOutcome::Holds(w) => format!(
            "holds ({:?} witness, defect {:.2e})",
            w.kind, w.defect
        ),
        OrderOutcome::Fails(cert) => format!(
            "fails (separating function of {} pieces, margin {:.4})",
            cert.pieces.len(),
            cert.margin
        ),
        OrderOutcome::Inconclusive { margin } => {
            format!("inconclusive (margin {margin:.2e})")
        }
    }
}

fn main() -> wotlab::Result<()> {
    let dirac = DiscreteMeasure::from_1d(&[(0.0, 1.0)])?;
    let spread = DiscreteMeasure::from_1d(&[(-1.0, 0.5), (1.0, 0.5)])?;
    let wider = DiscreteMeasure::from_1d(&[(-2.0, 0.5), (2.0, 0.5)])?;

    println!("dirac  <=cx spread : {}", describe(&check_convex_order(&dirac, &spread)?));
    println!("spread <=cx dirac  : {}", describe(&check_convex_order(&spread, &dirac)?));
    println!("spread <=cx wider  : {}", describe(&check_convex_order(&spread, &wider)?));
    println!("wider  <=cx spread : {}", describe(&check_convex_order(&wider, &spread)?));

    // The increasing convex order also tolerates upward drift.
    let low = DiscreteMeasure::from_1d(&[(0.0, 0.5), (2.0, 0.5)])?;
    let high = DiscreteMeasure::from_1d(&[(3.0, 1.0)])?;
    println!("low    <=icx high  : {}", describe(&check_icx_order(&low, &high)?));
    println!("high   <=icx low   : {}", describe(&check_icx_order(&high, &low)?));
    Ok(())
}
