//! The four cost families and their oracles: values `C(x, p)`, first
//! variations for Frank-Wolfe, the inf-convolution transform
//! `rc_transform(g)(x) = inf_p p(g) + C(x, p)`, and a sampling verifier for
//! convexity in `p`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engines::{
    minimize_over_simplex, simplex_solve, Constraint, LinearProgram, LpStatus, Sense, VarBounds,
};
use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, Point};

/// Floor applied inside entropic logarithms at the simplex boundary. The
/// objective itself stays exact (`0 log 0 = 0`); only gradients are floored,
/// which is what lets Frank-Wolfe pull mass onto empty atoms.
pub const ENTROPIC_FLOOR: f64 = 1e-300;

/// Convex base function for the monopoly-icx cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ThetaSpec {
    /// `"l1"` or `"l2"`.
    Norm(String),
    /// Sampled 1D convex function, linearly interpolated between knots and
    /// extrapolated with the end slopes.
    Sampled { samples: Vec<[f64; 2]> },
}

impl ThetaSpec {
    pub fn l1() -> Self {
        ThetaSpec::Norm("l1".into())
    }

    pub fn l2() -> Self {
        ThetaSpec::Norm("l2".into())
    }

    pub fn sampled(samples: Vec<[f64; 2]>) -> Result<Self> {
        let t = ThetaSpec::Sampled { samples };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaSpec::Norm(name) if name == "l1" || name == "l2" => Ok(()),
            ThetaSpec::Norm(name) => Err(Error::schema(
                "theta",
                format!("unknown norm `{name}` (expected \"l1\" or \"l2\")"),
            )),
            ThetaSpec::Sampled { samples } => {
                if samples.len() < 2 {
                    return Err(Error::schema("theta.samples", "need at least two knots"));
                }
                for w in samples.windows(2) {
                    if w[1][0] <= w[0][0] {
                        return Err(Error::schema(
                            "theta.samples",
                            "knots must be strictly increasing in z",
                        ));
                    }
                }
                if samples.iter().any(|s| !s[0].is_finite() || !s[1].is_finite()) {
                    return Err(Error::schema("theta.samples", "non-finite knot"));
                }
                // Convexity: divided second differences >= -1e-10.
                for w in samples.windows(3) {
                    let s01 = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
                    let s12 = (w[2][1] - w[1][1]) / (w[2][0] - w[1][0]);
                    if s12 - s01 < -1e-10 {
                        return Err(Error::schema(
                            "theta.samples",
                            format!("not convex near z = {}", w[1][0]),
                        ));
                    }
                }
                // A convex function with negative right slope is unbounded
                // below, which breaks the lower-bound invariant.
                let last = &samples[samples.len() - 2..];
                let right_slope = (last[1][1] - last[0][1]) / (last[1][0] - last[0][0]);
                if right_slope < 0.0 {
                    return Err(Error::schema(
                        "theta.samples",
                        "right end slope must be nonnegative (theta must be bounded below)",
                    ));
                }
                Ok(())
            }
        }
    }

    pub fn dim_restriction(&self) -> Option<usize> {
        match self {
            ThetaSpec::Norm(_) => None,
            ThetaSpec::Sampled { .. } => Some(1),
        }
    }

    /// Evaluate theta itself.
    pub fn eval(&self, u: &[f64]) -> f64 {
        match self {
            ThetaSpec::Norm(name) if name == "l1" => u.iter().map(|v| v.abs()).sum(),
            ThetaSpec::Norm(_) => u.iter().map(|v| v * v).sum::<f64>().sqrt(),
            ThetaSpec::Sampled { samples } => {
                debug_assert_eq!(u.len(), 1);
                let z = u[0];
                interp_pw_linear(samples, z)
            }
        }
    }

    /// `hat(u) = inf over z >= u (componentwise) of theta(z)`.
    ///
    /// Exact for both variants: norms reduce to the positive-part projection,
    /// and sampled thetas are piecewise linear so the rightward infimum sits
    /// at a knot or at `u` itself.
    pub fn hat(&self, u: &[f64]) -> f64 {
        match self {
            ThetaSpec::Norm(name) => {
                let pos: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
                if name == "l1" {
                    pos.iter().sum()
                } else {
                    pos.iter().map(|v| v * v).sum::<f64>().sqrt()
                }
            }
            ThetaSpec::Sampled { samples } => {
                debug_assert_eq!(u.len(), 1);
                let z_star = self.sampled_argmin();
                if u[0] <= z_star {
                    interp_pw_linear(samples, z_star)
                } else {
                    interp_pw_linear(samples, u[0])
                }
            }
        }
    }

    /// A subgradient of `hat` at `u`.
    pub fn hat_subgrad(&self, u: &[f64]) -> Vec<f64> {
        match self {
            ThetaSpec::Norm(name) if name == "l1" => {
                u.iter().map(|&v| if v > 0.0 { 1.0 } else { 0.0 }).collect()
            }
            ThetaSpec::Norm(_) => {
                let pos: Vec<f64> = u.iter().map(|v| v.max(0.0)).collect();
                let norm = pos.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm <= 0.0 {
                    vec![0.0; u.len()]
                } else {
                    pos.iter().map(|v| v / norm).collect()
                }
            }
            ThetaSpec::Sampled { samples } => {
                let z_star = self.sampled_argmin();
                if u[0] <= z_star {
                    vec![0.0]
                } else {
                    vec![pw_linear_right_slope(samples, u[0]).max(0.0)]
                }
            }
        }
    }

    /// Lower bound of theta (and hence of hat).
    pub fn lower_bound(&self) -> f64 {
        match self {
            ThetaSpec::Norm(_) => 0.0,
            ThetaSpec::Sampled { samples } => samples
                .iter()
                .map(|s| s[1])
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Knot minimizing a sampled theta (ties resolved leftward).
    fn sampled_argmin(&self) -> f64 {
        match self {
            ThetaSpec::Sampled { samples } => {
                let mut best = &samples[0];
                for s in samples {
                    if s[1] < best[1] - 1e-15 {
                        best = s;
                    }
                }
                best[0]
            }
            _ => unreachable!(),
        }
    }

    /// Linear pieces `(slope, intercept)` of the convex envelope of `hat` in
    /// 1D: `hat(u) = max_s slope_s * u + intercept_s`. Used for exact inner
    /// LPs.
    pub(crate) fn hat_pieces_1d(&self) -> Vec<(f64, f64)> {
        match self {
            ThetaSpec::Norm(_) => vec![(0.0, 0.0), (1.0, 0.0)],
            ThetaSpec::Sampled { samples } => {
                let z_star = self.sampled_argmin();
                let min_val = self.lower_bound();
                let mut pieces = vec![(0.0, min_val)];
                for w in samples.windows(2) {
                    if w[1][0] <= z_star {
                        continue;
                    }
                    let slope = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
                    if slope > 0.0 {
                        // Piece through (z0, v0): v = v0 + slope (u - z0).
                        pieces.push((slope, w[0][1] - slope * w[0][0]));
                    }
                }
                pieces
            }
        }
    }
}

fn interp_pw_linear(samples: &[[f64; 2]], z: f64) -> f64 {
    let first = samples[0];
    let last = samples[samples.len() - 1];
    if z <= first[0] {
        let w = &samples[..2];
        let slope = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
        return first[1] + slope * (z - first[0]);
    }
    if z >= last[0] {
        let w = &samples[samples.len() - 2..];
        let slope = (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
        return last[1] + slope * (z - last[0]);
    }
    for w in samples.windows(2) {
        if z <= w[1][0] {
            let t = (z - w[0][0]) / (w[1][0] - w[0][0]);
            return w[0][1] + t * (w[1][1] - w[0][1]);
        }
    }
    last[1]
}

fn pw_linear_right_slope(samples: &[[f64; 2]], z: f64) -> f64 {
    for w in samples.windows(2) {
        if z < w[1][0] {
            return (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]);
        }
    }
    let w = &samples[samples.len() - 2..];
    (w[1][1] - w[0][1]) / (w[1][0] - w[0][0])
}

/// The four cost families of the weak transport problem.
#[derive(Debug, Clone, PartialEq)]
pub enum CostModel {
    /// `C(x_i, p) = sum_j p_j c_ij`.
    Classical { cost: Vec<Vec<f64>> },
    /// `C(x, p) = |x - barycenter(p)|^2`.
    Barycentric,
    /// `C(x_i, p) = H(p | gamma_i)` against strictly positive reference rows.
    Entropic { gamma_rows: Vec<Vec<f64>> },
    /// `C(x, p) = hat_theta(x - barycenter(p))`.
    MonopolyIcx { theta: ThetaSpec },
}

impl CostModel {
    pub fn classical(cost: Vec<Vec<f64>>) -> Self {
        CostModel::Classical { cost }
    }

    /// Build the entropic model from a full joint reference matrix: rows are
    /// renormalized to conditional laws.
    pub fn entropic_from_joint(gamma: &[Vec<f64>]) -> Result<Self> {
        let mut rows = Vec::with_capacity(gamma.len());
        for (i, row) in gamma.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if row.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(Error::schema(
                    format!("cost.gamma[{i}]"),
                    "entropic reference entries must be strictly positive and finite",
                ));
            }
            rows.push(row.iter().map(|v| v / total).collect());
        }
        Ok(CostModel::Entropic { gamma_rows: rows })
    }

    /// Build a model from the wire-format cost record.
    pub fn from_doc(doc: &crate::measures::CostDoc) -> Result<Self> {
        use crate::measures::CostDoc;
        match doc {
            CostDoc::Classical { matrix } => Ok(CostModel::Classical {
                cost: matrix.clone(),
            }),
            CostDoc::Barycentric => Ok(CostModel::Barycentric),
            CostDoc::Entropic { gamma } => CostModel::entropic_from_joint(gamma),
            CostDoc::MonopolyIcx { theta } => {
                theta.validate()?;
                Ok(CostModel::MonopolyIcx {
                    theta: theta.clone(),
                })
            }
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CostModel::Classical { .. } => "classical",
            CostModel::Barycentric => "barycentric",
            CostModel::Entropic { .. } => "entropic",
            CostModel::MonopolyIcx { .. } => "monopoly_icx",
        }
    }

    /// Structural validation against an instance's supports.
    pub fn validate(&self, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<()> {
        match self {
            CostModel::Classical { cost } => {
                if cost.len() != mu.len() || cost.iter().any(|r| r.len() != nu.len()) {
                    return Err(Error::ShapeMismatch(format!(
                        "classical cost matrix must be {}x{}",
                        mu.len(),
                        nu.len()
                    )));
                }
                if cost.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::schema("cost.matrix", "non-finite entry"));
                }
            }
            CostModel::Barycentric => {
                if mu.dim() != nu.dim() {
                    return Err(Error::ShapeMismatch(
                        "barycentric cost needs equal dimensions".into(),
                    ));
                }
            }
            CostModel::Entropic { gamma_rows } => {
                if gamma_rows.len() != mu.len()
                    || gamma_rows.iter().any(|r| r.len() != nu.len())
                {
                    return Err(Error::ShapeMismatch(format!(
                        "entropic reference must be {}x{}",
                        mu.len(),
                        nu.len()
                    )));
                }
            }
            CostModel::MonopolyIcx { theta } => {
                theta.validate()?;
                if mu.dim() != nu.dim() {
                    return Err(Error::ShapeMismatch(
                        "monopoly cost needs equal dimensions".into(),
                    ));
                }
                if let Some(d) = theta.dim_restriction() {
                    if mu.dim() != d {
                        return Err(Error::Unsupported(
                            "sampled theta is one-dimensional".into(),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Uniform lower bound of `C(x, .)` over the instance.
    pub fn lower_bound(&self) -> f64 {
        match self {
            CostModel::Classical { cost } => cost
                .iter()
                .flatten()
                .fold(f64::INFINITY, |s, &v| s.min(v)),
            CostModel::Barycentric => 0.0,
            CostModel::Entropic { .. } => 0.0,
            CostModel::MonopolyIcx { theta } => theta.lower_bound(),
        }
    }
}

/// Minimal evaluation interface; lets tests exercise the convexity checker
/// with deliberately broken models.
pub trait PointCost {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn cost(&self, x_index: usize, p: &[f64]) -> f64;
}

/// A cost model bound to the instance geometry.
#[derive(Debug, Clone, Copy)]
pub struct BoundCost<'a> {
    pub model: &'a CostModel,
    pub mu: &'a DiscreteMeasure,
    pub nu: &'a DiscreteMeasure,
}

impl<'a> BoundCost<'a> {
    pub fn new(
        model: &'a CostModel,
        mu: &'a DiscreteMeasure,
        nu: &'a DiscreteMeasure,
    ) -> Result<Self> {
        model.validate(mu, nu)?;
        Ok(BoundCost { model, mu, nu })
    }

}

impl PointCost for BoundCost<'_> {
    fn rows(&self) -> usize {
        self.mu.len()
    }

    fn cols(&self) -> usize {
        self.nu.len()
    }

    fn cost(&self, x_index: usize, p: &[f64]) -> f64 {
        eval_cost(self.model, self.mu, self.nu, x_index, p)
    }
}

/// `C(x_i, p)` for a probability vector `p` over the support of `nu`.
pub fn eval_cost(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x_index: usize,
    p: &[f64],
) -> f64 {
    debug_assert_eq!(p.len(), nu.len());
    match model {
        CostModel::Classical { cost } => cost[x_index]
            .iter()
            .zip(p)
            .map(|(c, w)| c * w)
            .sum(),
        CostModel::Barycentric => {
            let bar = bound_barycenter(nu, p);
            mu.points[x_index].sub(&bar).norm_sq()
        }
        CostModel::Entropic { gamma_rows } => relative_entropy(p, &gamma_rows[x_index]),
        CostModel::MonopolyIcx { theta } => {
            let bar = bound_barycenter(nu, p);
            theta.hat(&mu.points[x_index].sub(&bar).coords)
        }
    }
}

fn bound_barycenter(nu: &DiscreteMeasure, p: &[f64]) -> Point {
    let d = nu.dim();
    let mut out = vec![0.0; d];
    for (w, y) in p.iter().zip(&nu.points) {
        for (o, c) in out.iter_mut().zip(&y.coords) {
            *o += w * c;
        }
    }
    Point::new(out)
}

/// `H(p | q) = sum p_j log(p_j / q_j)` with `0 log 0 = 0`.
pub fn relative_entropy(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&pj, &qj)| if pj > 0.0 { pj * (pj / qj).ln() } else { 0.0 })
        .sum()
}

/// First variation of `p -> C(x, p)`: a vector `values` so the Gateaux
/// derivative toward `delta_y - p` is `sum_j (delta_y - p)_j values_j`.
pub fn first_variation(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    x_index: usize,
    p: &[f64],
) -> Vec<f64> {
    match model {
        CostModel::Classical { cost } => cost[x_index].clone(),
        CostModel::Barycentric => {
            let bar = bound_barycenter(nu, p);
            let diff = mu.points[x_index].sub(&bar);
            nu.points.iter().map(|y| -2.0 * diff.dot(y)).collect()
        }
        CostModel::Entropic { gamma_rows } => p
            .iter()
            .zip(&gamma_rows[x_index])
            .map(|(&pj, &gj)| (pj.max(ENTROPIC_FLOOR) / gj).ln() + 1.0)
            .collect(),
        CostModel::MonopolyIcx { theta } => {
            let bar = bound_barycenter(nu, p);
            let s = theta.hat_subgrad(&mu.points[x_index].sub(&bar).coords);
            nu.points
                .iter()
                .map(|y| -s.iter().zip(&y.coords).map(|(a, b)| a * b).sum::<f64>())
                .collect()
        }
    }
}

/// Relative tolerance of the inner solves behind [`rc_transform`].
pub const RC_INNER_TOL: f64 = 1e-9;

/// The inf-convolution `inf_p p(g) + C(x, p)` with its argmin.
///
/// Closed form for classical (pointwise min) and entropic (Gibbs) costs; a
/// convex program over the simplex for the barycentric and monopoly families
/// (exact epigraph LP where the objective is piecewise linear, Frank-Wolfe on
/// the simplex otherwise).
pub fn rc_transform(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    g: &[f64],
    x_index: usize,
) -> Result<(f64, Vec<f64>)> {
    let (value, argmin, _gap) = rc_transform_with_gap(model, mu, nu, g, x_index)?;
    Ok((value, argmin))
}

/// Like [`rc_transform`] but also reports the inner optimality gap, so dual
/// values built from approximate transforms can be corrected downward into
/// rigorous lower bounds. The gap is zero on the closed-form and LP paths.
pub(crate) fn rc_transform_with_gap(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    g: &[f64],
    x_index: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    if g.len() != nu.len() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("dual vector g".into()));
    }
    let n = nu.len();
    match model {
        CostModel::Classical { cost } => {
            let mut best = 0usize;
            let mut best_v = f64::INFINITY;
            for j in 0..n {
                let v = g[j] + cost[x_index][j];
                if v < best_v {
                    best_v = v;
                    best = j;
                }
            }
            let mut p = vec![0.0; n];
            p[best] = 1.0;
            Ok((best_v, p, 0.0))
        }
        CostModel::Entropic { gamma_rows } => {
            // -log sum_j gamma_j e^{-g_j}, argmin the Gibbs law.
            let row = &gamma_rows[x_index];
            let m = g
                .iter()
                .zip(row)
                .map(|(&gj, &gam)| -gj + gam.ln())
                .fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = g
                .iter()
                .zip(row)
                .map(|(&gj, &gam)| (-gj + gam.ln() - m).exp())
                .sum();
            let value = -(m + z.ln());
            let p: Vec<f64> = g
                .iter()
                .zip(row)
                .map(|(&gj, &gam)| (-gj + gam.ln() - m).exp() / z)
                .collect();
            Ok((value, p, 0.0))
        }
        CostModel::Barycentric => rc_barycentric_exact(mu, nu, g, x_index),
        CostModel::MonopolyIcx { theta } => {
            if nu.dim() == 1 || matches!(theta, ThetaSpec::Norm(name) if name == "l1") {
                rc_monopoly_lp(theta, mu, nu, g, x_index)
            } else {
                // Smooth-ish l2 case in d >= 2: Frank-Wolfe on the simplex.
                let x = &mu.points[x_index];
                let oracle = |p: &[f64]| {
                    let bar = bound_barycenter(nu, p);
                    let u = x.sub(&bar);
                    let v: f64 =
                        p.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() + theta.hat(&u.coords);
                    let s = theta.hat_subgrad(&u.coords);
                    let grad: Vec<f64> = nu
                        .points
                        .iter()
                        .zip(g)
                        .map(|(y, gj)| {
                            gj - s.iter().zip(&y.coords).map(|(a, b)| a * b).sum::<f64>()
                        })
                        .collect();
                    (v, grad)
                };
                let (p, value, gap) = minimize_over_simplex(oracle, n, RC_INNER_TOL, 50_000)?;
                check_inner_gap(value, gap)?;
                Ok((value, p, gap))
            }
        }
    }
}

fn check_inner_gap(value: f64, gap: f64) -> Result<()> {
    if gap > 1e-5 * (1.0 + value.abs()) {
        return Err(Error::NonConvergence {
            what: "rc_transform",
            detail: format!("inner gap {gap:.3e} at value {value:.6}"),
        });
    }
    Ok(())
}

/// Is `hat_theta` piecewise linear for this dimension (so the weak problem
/// is an exact LP)?
pub(crate) fn theta_is_piecewise_linear(theta: &ThetaSpec, dim: usize) -> bool {
    dim == 1 || matches!(theta, ThetaSpec::Norm(name) if name == "l1")
}

pub(crate) struct MonopolyLpOutcome {
    pub mass: Vec<Vec<f64>>,
    pub value: f64,
    /// Weak-dual vector: negated column-marginal multipliers.
    pub dual_g: Vec<f64>,
}

/// Exact epigraph LP for the weak problem with a piecewise-linear
/// `hat_theta`: minimize `sum_i w_i hat_theta(x_i - barycenter of row i)`
/// over the couplings of the given marginals. Frank-Wolfe is unreliable on
/// these objectives (subgradient line searches stall at kinks), while the
/// LP is exact and also hands out the dual vector.
pub(crate) fn solve_monopoly_weak_lp(
    theta: &ThetaSpec,
    xs: &[Point],
    row_w: &[f64],
    ys: &[Point],
    col_w: &[f64],
) -> Result<MonopolyLpOutcome> {
    let m = xs.len();
    let n = ys.len();
    let d = ys[0].dim();
    let one_d = d == 1;
    let extra_per_row = if one_d { 1 } else { d };
    let vars = m * n + m * extra_per_row;
    let epi = |i: usize, l: usize| m * n + i * extra_per_row + l;

    let mut constraints = Vec::new();
    for i in 0..m {
        let mut c = vec![0.0; vars];
        for j in 0..n {
            c[i * n + j] = 1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, row_w[i]));
    }
    let col_rows_start = constraints.len();
    for j in 0..n {
        let mut c = vec![0.0; vars];
        for i in 0..m {
            c[i * n + j] = 1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, col_w[j]));
    }
    if one_d {
        let pieces = theta.hat_pieces_1d();
        for i in 0..m {
            for &(slope, intercept) in &pieces {
                // T_i >= slope (w_i x_i - sum_j pi_ij y_j) + w_i intercept.
                let mut c = vec![0.0; vars];
                for (j, y) in ys.iter().enumerate() {
                    c[i * n + j] = slope * y.coords[0];
                }
                c[epi(i, 0)] = 1.0;
                constraints.push(Constraint::new(
                    c,
                    Sense::Ge,
                    slope * row_w[i] * xs[i].coords[0] + row_w[i] * intercept,
                ));
            }
        }
    } else {
        for i in 0..m {
            for l in 0..d {
                // T_il >= w_i x_il - sum_j pi_ij y_jl with T_il >= 0.
                let mut c = vec![0.0; vars];
                for (j, y) in ys.iter().enumerate() {
                    c[i * n + j] = y.coords[l];
                }
                c[epi(i, l)] = 1.0;
                constraints.push(Constraint::new(
                    c,
                    Sense::Ge,
                    row_w[i] * xs[i].coords[l],
                ));
            }
        }
    }
    let mut objective = vec![0.0; vars];
    for i in 0..m {
        for l in 0..extra_per_row {
            objective[epi(i, l)] = 1.0;
        }
    }
    let mut bounds = vec![VarBounds::default(); m * n];
    let epi_bound = if one_d {
        // The flat piece at min theta bounds the 1D epigraph variable, which
        // may legitimately be negative for sampled thetas.
        VarBounds::free()
    } else {
        VarBounds::default()
    };
    bounds.extend(std::iter::repeat(epi_bound).take(m * extra_per_row));
    let lp = LinearProgram::new(objective, constraints).with_bounds(bounds);
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "weak epigraph program is {:?}",
            sol.status
        )));
    }
    let mass: Vec<Vec<f64>> = (0..m)
        .map(|i| sol.primal[i * n..(i + 1) * n].to_vec())
        .collect();
    let dual_g: Vec<f64> = (0..n).map(|j| -sol.dual[col_rows_start + j]).collect();
    Ok(MonopolyLpOutcome {
        mass,
        value: sol.objective,
        dual_g,
    })
}

/// Exact inf-convolution for the barycentric cost.
///
/// The objective `p . g + |x - Y p|^2` is a convex quadratic over the
/// simplex whose optimum has support of size at most `d + 1` (the optimal
/// barycenter needs d + 1 atoms, and among laws sharing it a vertex of the
/// fiber polytope is optimal). Enumerating supports up to `d + 2` and
/// solving each face's stationarity system is therefore exact, and at desk
/// scale much more reliable than iterating on the simplex.
fn rc_barycentric_exact(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    g: &[f64],
    x_index: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = nu.len();
    let d = nu.dim();
    let x = &mu.points[x_index];
    let objective = |p: &[f64]| -> f64 {
        let bar = bound_barycenter(nu, p);
        p.iter().zip(g).map(|(a, b)| a * b).sum::<f64>() + x.sub(&bar).norm_sq()
    };

    // The optimal support needs at most d + 1 atoms: the optimal barycenter
    // is a combination of d + 1 atoms, and a vertex of its fiber polytope
    // minimizes the linear part.
    let max_support = (d + 1).min(n);
    let mut best_value = f64::INFINITY;
    let mut best_p = vec![0.0; n];
    let mut subset: Vec<usize> = Vec::with_capacity(max_support);
    enumerate_subsets(n, max_support, &mut subset, &mut |support: &[usize]| {
        let k = support.len();
        // Stationarity on the face: 2 (Y_S^T Y_S) p + (g_S - 2 Y_S^T x)
        // + lambda 1 = 0 together with sum p = 1.
        let mut sys = vec![vec![0.0; k + 1]; k + 1];
        let mut rhs = vec![0.0; k + 1];
        for (a, &ja) in support.iter().enumerate() {
            for (b, &jb) in support.iter().enumerate() {
                sys[a][b] = 2.0 * nu.points[ja].dot(&nu.points[jb]);
            }
            sys[a][k] = 1.0;
            sys[k][a] = 1.0;
            rhs[a] = 2.0 * nu.points[ja].dot(x) - g[ja];
        }
        rhs[k] = 1.0;
        let Some((sol, residual)) = crate::engines::solve_kkt_ridge(&sys, &rhs) else {
            return;
        };
        if residual > 1e-8 {
            return;
        }
        if sol[..k].iter().any(|&v| v < -1e-10) {
            return;
        }
        let mut p = vec![0.0; n];
        let mut total = 0.0;
        for (a, &ja) in support.iter().enumerate() {
            p[ja] = sol[a].max(0.0);
            total += p[ja];
        }
        if total <= 0.0 {
            return;
        }
        for v in p.iter_mut() {
            *v /= total;
        }
        let value = objective(&p);
        if value < best_value {
            best_value = value;
            best_p = p;
        }
    });
    debug_assert!(best_value.is_finite(), "singleton faces always solve");
    Ok((best_value, best_p, 0.0))
}

fn enumerate_subsets(
    n: usize,
    max_size: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    fn rec(
        n: usize,
        max_size: usize,
        start: usize,
        current: &mut Vec<usize>,
        visit: &mut impl FnMut(&[usize]),
    ) {
        if !current.is_empty() {
            visit(current);
        }
        if current.len() == max_size {
            return;
        }
        for next in start..n {
            current.push(next);
            rec(n, max_size, next + 1, current, visit);
            current.pop();
        }
    }
    rec(n, max_size, 0, current, visit);
}

/// Exact epigraph LP for the monopoly inf-convolution when `hat_theta` is
/// piecewise linear: the l1 norm in any dimension, any norm in 1D, and
/// sampled 1D thetas.
fn rc_monopoly_lp(
    theta: &ThetaSpec,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    g: &[f64],
    x_index: usize,
) -> Result<(f64, Vec<f64>, f64)> {
    let n = nu.len();
    let d = nu.dim();
    let x = &mu.points[x_index];
    // Variables: p_1..p_n, then one epigraph variable per coordinate (l1) or
    // a single one (1D pieces).
    let one_d = d == 1;
    let pieces = if one_d { theta.hat_pieces_1d() } else { vec![] };
    let extra = if one_d { 1 } else { d };
    let mut objective = g.to_vec();
    objective.extend(std::iter::repeat(1.0).take(extra));
    let mut constraints = Vec::new();
    let mut coeffs = vec![1.0; n];
    coeffs.extend(std::iter::repeat(0.0).take(extra));
    constraints.push(Constraint::new(coeffs, Sense::Eq, 1.0));
    if one_d {
        // r >= slope * (x - sum_j p_j y_j) + intercept for each piece.
        for &(slope, intercept) in &pieces {
            let mut coeffs = vec![0.0; n + 1];
            for (j, y) in nu.points.iter().enumerate() {
                coeffs[j] = slope * y.coords[0];
            }
            coeffs[n] = 1.0;
            constraints.push(Constraint::new(
                coeffs,
                Sense::Ge,
                slope * x.coords[0] + intercept,
            ));
        }
    } else {
        // l1 in d dims: s_l >= x_l - sum_j p_j y_{j,l} and s_l >= 0.
        for l in 0..d {
            let mut coeffs = vec![0.0; n + d];
            for (j, y) in nu.points.iter().enumerate() {
                coeffs[j] = y.coords[l];
            }
            coeffs[n + l] = 1.0;
            constraints.push(Constraint::new(coeffs, Sense::Ge, x.coords[l]));
        }
    }
    let mut bounds = vec![VarBounds::default(); n];
    // 1D epigraph variables may go negative (sampled thetas can have a
    // negative minimum and the flat piece bounds them); the l1 positive-part
    // variables must not.
    let epi_bound = if one_d {
        VarBounds::free()
    } else {
        VarBounds::default()
    };
    bounds.extend(std::iter::repeat(epi_bound).take(extra));
    let lp = LinearProgram::new(objective, constraints).with_bounds(bounds);
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "inner monopoly LP is {:?}",
            sol.status
        )));
    }
    let mut p = sol.primal[..n].to_vec();
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    Ok((sol.objective, p, 0.0))
}

/// Sampling report for convexity of `p -> C(x, p)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyAReport {
    pub samples: usize,
    /// Max of `C(lambda p + (1-lambda) q) - lambda C(p) - (1-lambda) C(q)`.
    pub max_convexity_defect: f64,
    /// Empirical lower bound of the sampled values.
    pub min_value: f64,
    pub passed: bool,
}

/// Sample convexity along random segments; passes when the worst defect is
/// below 1e-9.
pub fn check_property_a(cost: &dyn PointCost, n_samples: usize, seed: u64) -> PropertyAReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = cost.cols();
    let mut max_defect = f64::NEG_INFINITY;
    let mut min_value = f64::INFINITY;
    for _ in 0..n_samples {
        let x_index = rng.gen_range(0..cost.rows());
        let p = random_simplex(&mut rng, n);
        let q = random_simplex(&mut rng, n);
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        let mix: Vec<f64> = p
            .iter()
            .zip(&q)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        let cp = cost.cost(x_index, &p);
        let cq = cost.cost(x_index, &q);
        let cm = cost.cost(x_index, &mix);
        max_defect = max_defect.max(cm - lambda * cp - (1.0 - lambda) * cq);
        min_value = min_value.min(cp).min(cq).min(cm);
    }
    PropertyAReport {
        samples: n_samples,
        max_convexity_defect: max_defect,
        min_value,
        passed: max_defect <= 1e-9,
    }
}

pub(crate) fn random_simplex(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let total: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= total);
    v
}
