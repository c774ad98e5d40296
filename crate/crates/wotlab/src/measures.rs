//! Finitely supported measures, couplings and their disintegrations.
//!
//! Everything downstream works on the canonical form produced by
//! [`load_measure`]: weights normalized to total mass one, zero-weight atoms
//! dropped, duplicate atoms merged. That canonicalization is what makes
//! kernels (conditional laws given the first coordinate) well defined.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Atoms closer than this (max-abs per coordinate) are merged at load time.
pub const MERGE_TOL: f64 = 1e-12;
/// Tolerance on marginal defects accepted by [`Coupling::new`].
pub const COUPLING_TOL: f64 = 1e-9;
/// Tolerance on kernel row sums.
pub const KERNEL_TOL: f64 = 1e-10;

/// A point of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn dot(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn sub(&self, other: &Point) -> Point {
        Point::new(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn norm_sq(&self) -> f64 {
        self.dot(self)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    fn close_to(&self, other: &Point, tol: f64) -> bool {
        self.dim() == other.dim()
            && self
                .coords
                .iter()
                .zip(&other.coords)
                .all(|(a, b)| (a - b).abs() <= tol)
    }
}

impl From<f64> for Point {
    fn from(x: f64) -> Self {
        Point::new(vec![x])
    }
}

/// A finitely supported probability measure on `R^d`.
///
/// Invariants after construction: strictly positive weights summing to one,
/// pairwise distinct atoms, every atom of the same dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Raw measure record of the JSON problem schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureDoc {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl DiscreteMeasure {
    /// Canonicalize raw atoms and weights; see [`load_measure`].
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        Self::with_merge_tol(points, weights, MERGE_TOL, "measure")
    }

    pub fn with_merge_tol(
        points: Vec<Point>,
        weights: Vec<f64>,
        merge_tol: f64,
        field: &str,
    ) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::schema(
                format!("{field}.weights"),
                format!(
                    "expected {} weights to match the points, got {}",
                    points.len(),
                    weights.len()
                ),
            ));
        }
        if points.is_empty() {
            return Err(Error::schema(format!("{field}.points"), "empty support"));
        }
        let dim = points[0].dim();
        if dim == 0 {
            return Err(Error::schema(
                format!("{field}.points[0]"),
                "points must have dimension >= 1",
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if p.dim() != dim {
                return Err(Error::schema(
                    format!("{field}.points[{i}]"),
                    format!("dimension mismatch: expected {dim}, got {}", p.dim()),
                ));
            }
            if p.coords.iter().any(|c| !c.is_finite()) {
                return Err(Error::schema(
                    format!("{field}.points[{i}]"),
                    "non-finite coordinate",
                ));
            }
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() {
                return Err(Error::schema(
                    format!("{field}.weights[{i}]"),
                    "non-finite number",
                ));
            }
            if *w < 0.0 {
                return Err(Error::schema(
                    format!("{field}.weights[{i}]"),
                    format!("negative weight {w}"),
                ));
            }
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::schema(
                format!("{field}.weights"),
                "zero total mass",
            ));
        }

        // Drop zero atoms, merge duplicates, normalize.
        let mut merged_points: Vec<Point> = Vec::new();
        let mut merged_weights: Vec<f64> = Vec::new();
        for (p, w) in points.into_iter().zip(weights) {
            if w == 0.0 {
                continue;
            }
            match merged_points.iter().position(|q| q.close_to(&p, merge_tol)) {
                Some(k) => merged_weights[k] += w,
                None => {
                    merged_points.push(p);
                    merged_weights.push(w);
                }
            }
        }
        for w in &mut merged_weights {
            *w /= total;
        }
        Ok(DiscreteMeasure {
            points: merged_points,
            weights: merged_weights,
        })
    }

    /// A unit mass at `point`.
    pub fn dirac(point: Point) -> Self {
        DiscreteMeasure {
            points: vec![point],
            weights: vec![1.0],
        }
    }

    /// 1D helper: atoms and weights given as scalars.
    pub fn from_1d(atoms: &[(f64, f64)]) -> Result<Self> {
        let (points, weights) = atoms
            .iter()
            .map(|&(x, w)| (Point::from(x), w))
            .unzip();
        DiscreteMeasure::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    /// Barycenter of the whole measure.
    pub fn mean(&self) -> Point {
        let mut out = vec![0.0; self.dim()];
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (o, c) in out.iter_mut().zip(&p.coords) {
                *o += w * c;
            }
        }
        Point::new(out)
    }

    /// Integrate a function of the atom index.
    pub fn integrate(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * f(i))
            .sum()
    }

    pub fn to_doc(&self) -> MeasureDoc {
        MeasureDoc {
            points: self.points.iter().map(|p| p.coords.clone()).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// The JSON problem record. Field names are part of the wire format:
/// `{"t": 2, "mu": {"points": ..., "weights": ...}, "nu": ..., "cost":
/// {"kind": ...}}`. The extra fields serve specific subcommands (grids and
/// theta for the pricing programs, the order kind for order queries).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDoc {
    /// Moment index; recorded but not acted on (finite supports carry all
    /// moments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub mu: MeasureDoc,
    pub nu: MeasureDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<crate::costs::ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<String>,
}

/// Cost sub-schema: `{"kind": "classical", "matrix": ...}`,
/// `{"kind": "barycentric"}`, `{"kind": "entropic", "gamma": ...}` (a full
/// joint matrix; rows are renormalized into conditionals), or
/// `{"kind": "monopoly_icx", "theta": "l1" | "l2"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostDoc {
    Classical { matrix: Vec<Vec<f64>> },
    Barycentric,
    Entropic { gamma: Vec<Vec<f64>> },
    MonopolyIcx { theta: crate::costs::ThetaSpec },
}

/// Canonicalizing loader for the `{"points": ..., "weights": ...}` record.
pub fn load_measure(doc: &MeasureDoc) -> Result<DiscreteMeasure> {
    load_measure_field(doc, "measure")
}

/// Same as [`load_measure`] but errors name `field` (e.g. `mu.weights[2]`).
pub fn load_measure_field(doc: &MeasureDoc, field: &str) -> Result<DiscreteMeasure> {
    let points = doc.points.iter().cloned().map(Point::new).collect();
    DiscreteMeasure::with_merge_tol(points, doc.weights.clone(), MERGE_TOL, field)
}

/// A nonnegative mass matrix with prescribed marginals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Coupling {
    pub row_measure: DiscreteMeasure,
    pub col_measure: DiscreteMeasure,
    /// `mass[i][j]` is the mass moved from atom `i` of the row measure to
    /// atom `j` of the column measure.
    pub mass: Vec<Vec<f64>>,
}

/// Outcome of [`validate_coupling`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CouplingVerdict {
    pub passed: bool,
    /// Worst marginal defect (includes the total-mass defect).
    pub worst_defect: f64,
    pub reason: Option<String>,
}

impl Coupling {
    /// Build a coupling, checking the marginal invariants at [`COUPLING_TOL`].
    pub fn new(
        row_measure: DiscreteMeasure,
        col_measure: DiscreteMeasure,
        mass: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let c = Coupling {
            row_measure,
            col_measure,
            mass,
        };
        let verdict = validate_coupling(&c, COUPLING_TOL)?;
        if !verdict.passed {
            return Err(Error::ShapeMismatch(format!(
                "invalid coupling: {} (defect {:.3e})",
                verdict.reason.unwrap_or_default(),
                verdict.worst_defect
            )));
        }
        Ok(c)
    }

    pub fn rows(&self) -> usize {
        self.row_measure.len()
    }

    pub fn cols(&self) -> usize {
        self.col_measure.len()
    }

    /// Independent coupling `mu (x) nu`.
    pub fn product(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Self {
        let mass = mu
            .weights
            .iter()
            .map(|a| nu.weights.iter().map(|b| a * b).collect())
            .collect();
        Coupling {
            row_measure: mu.clone(),
            col_measure: nu.clone(),
            mass,
        }
    }

    /// Total transported mass (should be one).
    pub fn total_mass(&self) -> f64 {
        self.mass.iter().flatten().sum()
    }
}

/// Check the coupling invariants at tolerance `tol` and report the worst
/// marginal defect. Shape mismatches are errors, not failed verdicts.
pub fn validate_coupling(c: &Coupling, tol: f64) -> Result<CouplingVerdict> {
    let m = c.row_measure.len();
    let n = c.col_measure.len();
    if c.mass.len() != m || c.mass.iter().any(|row| row.len() != n) {
        return Err(Error::ShapeMismatch(format!(
            "mass matrix must be {m}x{n}"
        )));
    }

    let mut worst = 0.0_f64;
    let mut reason: Option<String> = None;
    for (i, row) in c.mass.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::ShapeMismatch(format!(
                    "non-finite mass at ({i},{j})"
                )));
            }
            if v < -tol.max(0.0) && reason.is_none() {
                reason = Some(format!("negativity at ({i},{j}): {v:.3e}"));
            }
            worst = worst.max(-v);
        }
    }
    for i in 0..m {
        let defect = (c.mass[i].iter().sum::<f64>() - c.row_measure.weights[i]).abs();
        if defect > worst {
            worst = defect;
        }
        if defect > tol && reason.is_none() {
            reason = Some(format!("row {i} marginal defect {defect:.3e}"));
        }
    }
    for j in 0..n {
        let defect = ((0..m).map(|i| c.mass[i][j]).sum::<f64>() - c.col_measure.weights[j]).abs();
        if defect > worst {
            worst = defect;
        }
        if defect > tol && reason.is_none() {
            reason = Some(format!("column {j} marginal defect {defect:.3e}"));
        }
    }
    let mass_defect = (c.total_mass() - 1.0).abs();
    if mass_defect > worst {
        worst = mass_defect;
    }
    if mass_defect > tol && reason.is_none() {
        reason = Some(format!("total mass defect {mass_defect:.3e}"));
    }

    Ok(CouplingVerdict {
        passed: reason.is_none(),
        worst_defect: worst,
        reason,
    })
}

/// Conditional laws of the second coordinate given the first: one probability
/// vector over the column support per row atom.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Kernel {
    pub rows: Vec<Vec<f64>>,
}

impl Kernel {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }
}

/// Divide each mass row by its row weight. Row weights are strictly positive
/// by the measure invariant, so this is total.
pub fn disintegrate(c: &Coupling) -> Kernel {
    let rows = c
        .mass
        .iter()
        .zip(&c.row_measure.weights)
        .map(|(row, &w)| row.iter().map(|v| v / w).collect())
        .collect();
    Kernel { rows }
}

/// Row-wise barycenters `sum_j kernel(i,j) y_j`.
pub fn barycenter_map(c: &Coupling) -> Vec<Point> {
    let kernel = disintegrate(c);
    let d = c.col_measure.dim();
    kernel
        .rows
        .iter()
        .map(|row| {
            let mut out = vec![0.0; d];
            for (p, y) in row.iter().zip(&c.col_measure.points) {
                for (o, c) in out.iter_mut().zip(&y.coords) {
                    *o += p * c;
                }
            }
            Point::new(out)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(points: Vec<Vec<f64>>, weights: Vec<f64>) -> MeasureDoc {
        MeasureDoc { points, weights }
    }

    #[test]
    fn load_normalizes_weights() {
        let m = load_measure(&doc(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0])).unwrap();
        assert_eq!(m.weights, vec![0.5, 0.5]);
    }

    #[test]
    fn load_merges_duplicates() {
        let m = load_measure(&doc(
            vec![vec![0.0], vec![0.0], vec![1.0]],
            vec![0.25, 0.25, 0.5],
        ))
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights, vec![0.5, 0.5]);
        assert_eq!(m.points[0].coords, vec![0.0]);
    }

    #[test]
    fn load_rejects_negative_weight() {
        let err = load_measure(&doc(vec![vec![0.0], vec![1.0]], vec![1.0, -1.0])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("negative weight"), "{msg}");
        assert!(msg.contains("weights[1]"), "{msg}");
    }

    #[test]
    fn load_rejects_dimension_mismatch_and_non_finite() {
        let err = load_measure(&doc(vec![vec![0.0], vec![1.0, 2.0]], vec![0.5, 0.5])).unwrap_err();
        assert!(err.to_string().contains("dimension mismatch"));
        let err = load_measure(&doc(vec![vec![f64::NAN]], vec![1.0])).unwrap_err();
        assert!(err.to_string().contains("non-finite"));
        let err = load_measure(&doc(vec![vec![0.0]], vec![0.0])).unwrap_err();
        assert!(err.to_string().contains("zero total mass"));
    }

    #[test]
    fn load_drops_zero_atoms() {
        let m = load_measure(&doc(vec![vec![0.0], vec![1.0]], vec![0.0, 2.0])).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.points[0].coords, vec![1.0]);
        assert_eq!(m.weights, vec![1.0]);
    }

    fn uniform2() -> DiscreteMeasure {
        DiscreteMeasure::from_1d(&[(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn disintegrate_identity_and_product() {
        let mu = uniform2();
        let nu = uniform2();
        let diag = Coupling::new(
            mu.clone(),
            nu.clone(),
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        )
        .unwrap();
        let k = disintegrate(&diag);
        assert_eq!(k.rows, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);

        let prod = Coupling::product(&mu, &nu);
        let k = disintegrate(&prod);
        for row in &k.rows {
            assert_eq!(row, &nu.weights);
        }
    }

    #[test]
    fn disintegrate_plain_arithmetic() {
        let mu = uniform2();
        let nu = DiscreteMeasure::from_1d(&[(0.0, 0.4), (1.0, 0.6)]).unwrap();
        let c = Coupling::new(mu, nu, vec![vec![0.3, 0.2], vec![0.1, 0.4]]).unwrap();
        let k = disintegrate(&c);
        assert!((k.rows[0][0] - 0.6).abs() < 1e-15);
        assert!((k.rows[0][1] - 0.4).abs() < 1e-15);
        assert!((k.rows[1][0] - 0.2).abs() < 1e-15);
        assert!((k.rows[1][1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn validate_flags_marginal_defect_and_negativity() {
        let mu = uniform2();
        let nu = uniform2();
        let good = Coupling::product(&mu, &nu);
        let v = validate_coupling(&good, 1e-9).unwrap();
        assert!(v.passed);
        assert!(v.worst_defect <= 1e-15);

        let bad = Coupling {
            row_measure: mu.clone(),
            col_measure: nu.clone(),
            mass: vec![vec![0.25 + 1e-3, 0.25], vec![0.25, 0.25]],
        };
        let v = validate_coupling(&bad, 1e-9).unwrap();
        assert!(!v.passed);
        assert!((v.worst_defect - 1e-3).abs() < 1e-12);

        let neg = Coupling {
            row_measure: mu,
            col_measure: nu,
            mass: vec![vec![0.6, -0.1], vec![0.0, 0.5]],
        };
        let v = validate_coupling(&neg, 1e-9).unwrap();
        assert!(!v.passed);
        assert!(v.reason.unwrap().contains("negativity"));
    }

    #[test]
    fn validate_rejects_bad_shape() {
        let mu = uniform2();
        let nu = uniform2();
        let c = Coupling {
            row_measure: mu,
            col_measure: nu,
            mass: vec![vec![1.0]],
        };
        assert!(validate_coupling(&c, 1e-9).is_err());
    }

    #[test]
    fn barycenters_identity_product_and_row() {
        let mu = uniform2();
        let nu = uniform2();
        let diag = Coupling::new(
            mu.clone(),
            nu.clone(),
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        )
        .unwrap();
        let b = barycenter_map(&diag);
        assert_eq!(b[0].coords, vec![0.0]);
        assert_eq!(b[1].coords, vec![1.0]);

        let prod = Coupling::product(&mu, &nu);
        for p in barycenter_map(&prod) {
            assert!((p.coords[0] - 0.5).abs() < 1e-15);
        }

        // kernel row (0.5, 0.5) over y in {-3, 1} has barycenter -1
        let nu2 = DiscreteMeasure::from_1d(&[(-3.0, 0.5), (1.0, 0.5)]).unwrap();
        let c = Coupling::new(
            DiscreteMeasure::dirac(Point::from(0.0)),
            nu2,
            vec![vec![0.5, 0.5]],
        )
        .unwrap();
        assert_eq!(barycenter_map(&c)[0].coords, vec![-1.0]);
    }

    proptest! {
        /// Loading the loader's own output changes nothing.
        #[test]
        fn load_is_idempotent(
            xs in proptest::collection::vec(-1e3..1e3f64, 1..8),
            ws in proptest::collection::vec(0.0..10.0f64, 8),
        ) {
            let n = xs.len();
            let doc = MeasureDoc {
                points: xs.iter().map(|x| vec![*x]).collect(),
                weights: ws[..n].to_vec(),
            };
            prop_assume!(doc.weights.iter().sum::<f64>() > 1e-9);
            let once = load_measure(&doc).unwrap();
            let twice = load_measure(&once.to_doc()).unwrap();
            prop_assert_eq!(once.len(), twice.len());
            for (a, b) in once.weights.iter().zip(&twice.weights) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
            let total: f64 = once.weights.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
        }

        /// Kernel rows rescaled by the row weights reconstruct the mass.
        #[test]
        fn disintegration_round_trips(
            seed_mass in proptest::collection::vec(0.01..1.0f64, 9),
        ) {
            let total: f64 = seed_mass.iter().sum();
            let mass: Vec<Vec<f64>> = (0..3)
                .map(|i| (0..3).map(|j| seed_mass[3 * i + j] / total).collect())
                .collect();
            let mu = DiscreteMeasure::from_1d(
                &(0..3).map(|i| (i as f64, mass[i].iter().sum::<f64>())).collect::<Vec<_>>(),
            ).unwrap();
            let nu = DiscreteMeasure::from_1d(
                &(0..3).map(|j| (j as f64, (0..3).map(|i| mass[i][j]).sum::<f64>())).collect::<Vec<_>>(),
            ).unwrap();
            let c = Coupling::new(mu, nu, mass.clone()).unwrap();
            let k = disintegrate(&c);
            for i in 0..3 {
                for j in 0..3 {
                    let back = k.rows[i][j] * c.row_measure.weights[i];
                    prop_assert!((back - mass[i][j]).abs() <= 1e-12);
                }
            }
            // 1D convex hull check for the barycenters.
            let lo = c.col_measure.points.iter().map(|p| p.coords[0]).fold(f64::INFINITY, f64::min);
            let hi = c.col_measure.points.iter().map(|p| p.coords[0]).fold(f64::NEG_INFINITY, f64::max);
            for b in barycenter_map(&c) {
                prop_assert!(b.coords[0] >= lo - 1e-12 && b.coords[0] <= hi + 1e-12);
            }
        }
    }
}
