//! Convex order and increasing convex order between discrete measures,
//! decided by feasibility of a (sub)martingale coupling. A feasible program
//! returns the coupling as a witness; an infeasible one turns its Farkas ray
//! into a separating max-of-affine test function whose margin is recomputed
//! from scratch, so neither answer requires trusting the solver.

use serde::{Deserialize, Serialize};

use crate::engines::{simplex_solve, Constraint, LinearProgram, LpStatus, Sense};
use crate::error::{Error, Result};
use crate::measures::{disintegrate, Coupling, DiscreteMeasure, Point};

/// Margins below this are reported as inconclusive rather than guessed.
pub const MARGIN_FLOOR: f64 = 1e-8;
/// Tolerance on witness marginal and (sub)martingale defects.
pub const WITNESS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OrderKind {
    #[serde(rename = "cx")]
    Convex,
    #[serde(rename = "icx")]
    IncreasingConvex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessKind {
    #[serde(rename = "martingale")]
    Martingale,
    #[serde(rename = "submartingale")]
    Submartingale,
}

/// A coupling realizing the order as a (sub)martingale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderWitness {
    pub coupling: Coupling,
    pub kind: WitnessKind,
    /// Worst marginal or barycenter defect measured on re-validation.
    pub defect: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AffinePiece {
    pub intercept: f64,
    pub slope: Vec<f64>,
}

/// A separating test function `phi = max of affine pieces` with
/// `mu(phi) > nu(phi)`; icx certificates have nonnegative slopes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderCertificate {
    pub pieces: Vec<AffinePiece>,
    pub kind: OrderKind,
    pub margin: f64,
}

impl OrderCertificate {
    pub fn eval(&self, point: &Point) -> f64 {
        self.pieces
            .iter()
            .map(|p| {
                p.intercept
                    + p.slope
                        .iter()
                        .zip(&point.coords)
                        .map(|(a, b)| a * b)
                        .sum::<f64>()
            })
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum OrderOutcome {
    Holds(OrderWitness),
    Fails(OrderCertificate),
    /// Margin too small to call either way.
    Inconclusive { margin: f64 },
}

impl OrderOutcome {
    pub fn holds(&self) -> Option<bool> {
        match self {
            OrderOutcome::Holds(_) => Some(true),
            OrderOutcome::Fails(_) => Some(false),
            OrderOutcome::Inconclusive { .. } => None,
        }
    }
}

/// Does `mu <= nu` in convex order? Equivalent to the existence of a
/// martingale coupling from `mu` to `nu`.
pub fn check_convex_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OrderOutcome> {
    check_order(mu, nu, OrderKind::Convex)
}

/// Does `mu <= nu` in increasing convex order? Equivalent to a submartingale
/// coupling (componentwise).
pub fn check_icx_order(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<OrderOutcome> {
    check_order(mu, nu, OrderKind::IncreasingConvex)
}

fn check_order(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    kind: OrderKind,
) -> Result<OrderOutcome> {
    if mu.dim() != nu.dim() {
        return Err(Error::ShapeMismatch(
            "order checks need equal dimensions".into(),
        ));
    }
    let m = mu.len();
    let n = nu.len();
    let d = mu.dim();
    let vars = m * n;
    let barycenter_sense = match kind {
        OrderKind::Convex => Sense::Eq,
        OrderKind::IncreasingConvex => Sense::Ge,
    };

    let mut constraints = Vec::with_capacity(m + n + m * d);
    for i in 0..m {
        let mut coeffs = vec![0.0; vars];
        for j in 0..n {
            coeffs[i * n + j] = 1.0;
        }
        constraints.push(Constraint::new(coeffs, Sense::Eq, mu.weights[i]));
    }
    for j in 0..n {
        let mut coeffs = vec![0.0; vars];
        for i in 0..m {
            coeffs[i * n + j] = 1.0;
        }
        constraints.push(Constraint::new(coeffs, Sense::Eq, nu.weights[j]));
    }
    for i in 0..m {
        for l in 0..d {
            let mut coeffs = vec![0.0; vars];
            for j in 0..n {
                coeffs[i * n + j] = nu.points[j].coords[l] - mu.points[i].coords[l];
            }
            constraints.push(Constraint::new(coeffs, barycenter_sense, 0.0));
        }
    }

    let lp = LinearProgram::new(vec![0.0; vars], constraints);
    let sol = simplex_solve(&lp)?;
    match sol.status {
        LpStatus::Optimal => {
            let mass: Vec<Vec<f64>> = (0..m)
                .map(|i| sol.primal[i * n..(i + 1) * n].to_vec())
                .collect();
            let coupling = Coupling::new(mu.clone(), nu.clone(), mass)?;
            let witness_kind = match kind {
                OrderKind::Convex => WitnessKind::Martingale,
                OrderKind::IncreasingConvex => WitnessKind::Submartingale,
            };
            let defect = witness_defect(&coupling, witness_kind);
            if defect > WITNESS_TOL {
                return Err(Error::Internal(format!(
                    "feasible order program produced a witness with defect {defect:.3e}"
                )));
            }
            Ok(OrderOutcome::Holds(OrderWitness {
                coupling,
                kind: witness_kind,
                defect,
            }))
        }
        LpStatus::Infeasible => {
            let ray = sol
                .farkas_ray
                .ok_or_else(|| Error::Internal("missing farkas ray".into()))?;
            let scale = ray.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
            if scale <= 0.0 {
                return Err(Error::Internal("zero farkas ray".into()));
            }
            let mut pieces = Vec::with_capacity(m);
            for i in 0..m {
                let lambda = ray[i] / scale;
                let mut slope: Vec<f64> = (0..d)
                    .map(|l| ray[m + n + i * d + l] / scale)
                    .collect();
                if kind == OrderKind::IncreasingConvex {
                    // The ray carries nonnegative multipliers for the `>=`
                    // rows up to solver noise; clamp before re-evaluating.
                    for s in slope.iter_mut() {
                        if *s < 0.0 {
                            debug_assert!(*s > -1e-9, "icx ray slope {s}");
                            *s = 0.0;
                        }
                    }
                }
                let intercept = lambda
                    - slope
                        .iter()
                        .zip(&mu.points[i].coords)
                        .map(|(a, b)| a * b)
                        .sum::<f64>();
                pieces.push(AffinePiece { intercept, slope });
            }
            let certificate = OrderCertificate {
                pieces,
                kind,
                margin: 0.0,
            };
            // Margin recomputed from scratch by direct evaluation.
            let margin = mu.integrate(|i| certificate.eval(&mu.points[i]))
                - nu.integrate(|j| certificate.eval(&nu.points[j]));
            if margin <= MARGIN_FLOOR {
                return Ok(OrderOutcome::Inconclusive { margin });
            }
            Ok(OrderOutcome::Fails(OrderCertificate {
                margin,
                ..certificate
            }))
        }
        LpStatus::Unbounded => Err(Error::Internal(
            "feasibility program cannot be unbounded".into(),
        )),
    }
}

/// Worst marginal / barycenter defect of a claimed witness, measured
/// directly on the coupling.
pub fn witness_defect(c: &Coupling, kind: WitnessKind) -> f64 {
    let kernel = disintegrate(c);
    let d = c.col_measure.dim();
    let mut defect = crate::measures::validate_coupling(c, f64::INFINITY)
        .map(|v| v.worst_defect)
        .unwrap_or(f64::INFINITY);
    for (i, row) in kernel.rows.iter().enumerate() {
        for l in 0..d {
            let bar: f64 = row
                .iter()
                .zip(&c.col_measure.points)
                .map(|(p, y)| p * y.coords[l])
                .sum();
            let gap = bar - c.row_measure.points[i].coords[l];
            match kind {
                WitnessKind::Martingale => defect = defect.max(gap.abs()),
                WitnessKind::Submartingale => defect = defect.max(-gap),
            }
        }
    }
    defect
}
