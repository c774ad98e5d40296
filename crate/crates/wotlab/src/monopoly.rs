//! The multiple-good pricing application: four programs that provably share
//! one value on 1D instances, plus the norm-cost dual over increasing convex
//! 1-Lipschitz test functions.
//!
//! Form i is the weak transport solve in any dimension; forms ii-iv are
//! grid LPs and therefore 1D here (the increasing-convex cone on a
//! d-dimensional grid needs exponentially many constraints).

use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, ThetaSpec};
use crate::engines::{simplex_solve, Constraint, LinearProgram, LpStatus, Sense, VarBounds};
use crate::error::{Error, Result};
use crate::measures::DiscreteMeasure;
use crate::wot::{solve_primal, SolveOptions};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonopolyProblem {
    pub theta: ThetaSpec,
    pub mu: DiscreteMeasure,
    pub nu: DiscreteMeasure,
    /// Sorted candidate points for the free intermediate measures; must
    /// contain both supports.
    pub grid: Vec<f64>,
}

impl MonopolyProblem {
    pub fn new(
        theta: ThetaSpec,
        mu: DiscreteMeasure,
        nu: DiscreteMeasure,
        grid: Option<Vec<f64>>,
    ) -> Result<Self> {
        theta.validate()?;
        if mu.dim() != 1 || nu.dim() != 1 {
            return Err(Error::Unsupported(
                "grid forms are one-dimensional; use form i directly in higher dimensions".into(),
            ));
        }
        let grid = match grid {
            Some(g) => g,
            None => default_grid(&mu, &nu),
        };
        let prob = MonopolyProblem { theta, mu, nu, grid };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(Error::schema("grid", "need at least two points"));
        }
        for w in self.grid.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::schema("grid", "must be sorted strictly increasing"));
            }
        }
        for p in self.mu.points.iter().chain(&self.nu.points) {
            if grid_index(&self.grid, p.coords[0]).is_none() {
                return Err(Error::schema(
                    "grid",
                    format!("must contain the support point {}", p.coords[0]),
                ));
            }
        }
        Ok(())
    }

    fn theta_of(&self, z: f64) -> f64 {
        self.theta.eval(&[z])
    }
}

/// Union of both supports plus midpoints of consecutive support atoms.
pub fn default_grid(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<f64> {
    let mut support: Vec<f64> = mu
        .points
        .iter()
        .chain(&nu.points)
        .map(|p| p.coords[0])
        .collect();
    support.sort_by(|a, b| a.partial_cmp(b).unwrap());
    support.dedup_by(|a, b| (*a - *b).abs() <= 1e-12);
    let mut grid = Vec::with_capacity(2 * support.len());
    for w in support.windows(2) {
        grid.push(w[0]);
        grid.push(0.5 * (w[0] + w[1]));
    }
    grid.push(*support.last().unwrap());
    grid
}

/// Insert midpoints between consecutive grid points (used by the
/// refinement-monotonicity checks).
pub fn refine_grid(grid: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * grid.len());
    for w in grid.windows(2) {
        out.push(w[0]);
        out.push(0.5 * (w[0] + w[1]));
    }
    out.push(*grid.last().unwrap());
    out
}

fn grid_index(grid: &[f64], x: f64) -> Option<usize> {
    grid.iter().position(|&g| (g - x).abs() <= 1e-9)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HatThetaValue {
    pub value: f64,
    /// Worst-case error of the evaluation; zero because both the norm and
    /// the sampled piecewise-linear cases admit exact rightward infima.
    pub error_bound: f64,
}

/// `hat_theta(u) = inf over z >= u (componentwise) of theta(z)`.
pub fn hat_theta(theta: &ThetaSpec, u: &[f64]) -> HatThetaValue {
    HatThetaValue {
        value: theta.hat(u),
        error_bound: 0.0,
    }
}

/// Form i: the weak transport problem with cost `hat_theta(x - bar(p))`.
pub fn solve_form_i(prob: &MonopolyProblem, opts: &SolveOptions) -> Result<f64> {
    let model = CostModel::MonopolyIcx {
        theta: prob.theta.clone(),
    };
    Ok(solve_primal(&model, &prob.mu, &prob.nu, opts)?.value)
}

/// Form ii: transport from `mu` to a free grid measure dominated by `nu` in
/// increasing convex order (one submartingale leg).
pub fn solve_form_ii(prob: &MonopolyProblem) -> Result<f64> {
    let m = prob.mu.len();
    let n = prob.nu.len();
    let k = prob.grid.len();
    // Variables: pi (m x k) then sigma (k x n).
    let vars = m * k + k * n;
    let pi = |i: usize, kk: usize| i * k + kk;
    let sigma = |kk: usize, j: usize| m * k + kk * n + j;

    let mut constraints = Vec::new();
    for i in 0..m {
        let mut c = vec![0.0; vars];
        for kk in 0..k {
            c[pi(i, kk)] = 1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, prob.mu.weights[i]));
    }
    // Free intermediate measure: pi columns match sigma rows.
    for kk in 0..k {
        let mut c = vec![0.0; vars];
        for i in 0..m {
            c[pi(i, kk)] = 1.0;
        }
        for j in 0..n {
            c[sigma(kk, j)] = -1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, 0.0));
    }
    for j in 0..n {
        let mut c = vec![0.0; vars];
        for kk in 0..k {
            c[sigma(kk, j)] = 1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, prob.nu.weights[j]));
    }
    // Submartingale rows: the conditional mean under sigma moves up.
    for kk in 0..k {
        let mut c = vec![0.0; vars];
        for j in 0..n {
            c[sigma(kk, j)] = prob.nu.points[j].coords[0] - prob.grid[kk];
        }
        constraints.push(Constraint::new(c, Sense::Ge, 0.0));
    }

    let mut objective = vec![0.0; vars];
    for i in 0..m {
        for kk in 0..k {
            objective[pi(i, kk)] = prob.theta_of(prob.mu.points[i].coords[0] - prob.grid[kk]);
        }
    }
    let sol = simplex_solve(&LinearProgram::new(objective, constraints))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!("form ii program is {:?}", sol.status)));
    }
    Ok(sol.objective)
}

/// Form iii: both sides relaxed; a submartingale leg from `mu` up to a free
/// grid measure, transport across the grid, and a submartingale leg into
/// `nu`.
pub fn solve_form_iii(prob: &MonopolyProblem) -> Result<f64> {
    let m = prob.mu.len();
    let n = prob.nu.len();
    let k = prob.grid.len();
    // Variables: rho (m x k), tau (k x k), sigma (k x n).
    let vars = m * k + k * k + k * n;
    let rho = |i: usize, kk: usize| i * k + kk;
    let tau = |kk: usize, l: usize| m * k + kk * k + l;
    let sigma = |l: usize, j: usize| m * k + k * k + l * n + j;

    let mut constraints = Vec::new();
    for i in 0..m {
        let mut c = vec![0.0; vars];
        for kk in 0..k {
            c[rho(i, kk)] = 1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, prob.mu.weights[i]));
    }
    // mu-side submartingale: conditional mean of rho moves up from x_i.
    for i in 0..m {
        let mut c = vec![0.0; vars];
        for kk in 0..k {
            c[rho(i, kk)] = prob.grid[kk] - prob.mu.points[i].coords[0];
        }
        constraints.push(Constraint::new(c, Sense::Ge, 0.0));
    }
    for kk in 0..k {
        let mut c = vec![0.0; vars];
        for i in 0..m {
            c[rho(i, kk)] = 1.0;
        }
        for l in 0..k {
            c[tau(kk, l)] = -1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, 0.0));
    }
    for l in 0..k {
        let mut c = vec![0.0; vars];
        for kk in 0..k {
            c[tau(kk, l)] = 1.0;
        }
        for j in 0..n {
            c[sigma(l, j)] = -1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, 0.0));
    }
    for j in 0..n {
        let mut c = vec![0.0; vars];
        for l in 0..k {
            c[sigma(l, j)] = 1.0;
        }
        constraints.push(Constraint::new(c, Sense::Eq, prob.nu.weights[j]));
    }
    // nu-side submartingale.
    for l in 0..k {
        let mut c = vec![0.0; vars];
        for j in 0..n {
            c[sigma(l, j)] = prob.nu.points[j].coords[0] - prob.grid[l];
        }
        constraints.push(Constraint::new(c, Sense::Ge, 0.0));
    }

    let mut objective = vec![0.0; vars];
    for kk in 0..k {
        for l in 0..k {
            objective[tau(kk, l)] = prob.theta_of(prob.grid[kk] - prob.grid[l]);
        }
    }
    let sol = simplex_solve(&LinearProgram::new(objective, constraints))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!(
            "form iii program is {:?}",
            sol.status
        )));
    }
    Ok(sol.objective)
}

/// Shared scaffolding for the dual grid programs: variables are the test
/// function values on the grid, pinned to 0 at the left end, increasing and
/// convex.
fn phi_constraints(grid: &[f64], vars: usize) -> Vec<Constraint> {
    let k = grid.len();
    let mut constraints = Vec::new();
    let mut pin = vec![0.0; vars];
    pin[0] = 1.0;
    constraints.push(Constraint::new(pin, Sense::Eq, 0.0));
    for kk in 0..k - 1 {
        let mut c = vec![0.0; vars];
        c[kk + 1] = 1.0;
        c[kk] = -1.0;
        constraints.push(Constraint::new(c, Sense::Ge, 0.0));
    }
    for kk in 0..k.saturating_sub(2) {
        let h0 = grid[kk + 1] - grid[kk];
        let h1 = grid[kk + 2] - grid[kk + 1];
        let mut c = vec![0.0; vars];
        // Divided second difference >= 0.
        c[kk] += 1.0 / h0;
        c[kk + 1] -= 1.0 / h0 + 1.0 / h1;
        c[kk + 2] += 1.0 / h1;
        constraints.push(Constraint::new(c, Sense::Ge, 0.0));
    }
    constraints
}

/// Form iv: maximize `-nu(phi) + mu(inf-convolution of phi with theta)` over
/// increasing convex grid functions.
///
/// The epigraph rows only pair each row atom with the diagonal grid points:
/// with `phi` increasing, the constraint at `(y, z)` with `z > y` is implied
/// by the one at `(y, y)`, so the off-diagonal rows are redundant (this is
/// unit-tested against the full pair set).
pub fn solve_form_iv(prob: &MonopolyProblem) -> Result<(f64, Vec<f64>)> {
    solve_form_iv_impl(prob, false)
}

pub(crate) fn solve_form_iv_impl(
    prob: &MonopolyProblem,
    all_pairs: bool,
) -> Result<(f64, Vec<f64>)> {
    let m = prob.mu.len();
    let k = prob.grid.len();
    // Variables: phi_0..phi_{k-1}, then r_1..r_m.
    let vars = k + m;
    let mut constraints = phi_constraints(&prob.grid, vars);
    for i in 0..m {
        let xi = prob.mu.points[i].coords[0];
        for kk in 0..k {
            if all_pairs {
                for l in kk..k {
                    let mut c = vec![0.0; vars];
                    c[l] = 1.0;
                    c[k + i] = -1.0;
                    constraints.push(Constraint::new(
                        c,
                        Sense::Ge,
                        -prob.theta_of(xi - prob.grid[kk]),
                    ));
                }
            } else {
                // r_i <= phi_k + theta(x_i - g_k)
                let mut c = vec![0.0; vars];
                c[kk] = 1.0;
                c[k + i] = -1.0;
                constraints.push(Constraint::new(
                    c,
                    Sense::Ge,
                    -prob.theta_of(xi - prob.grid[kk]),
                ));
            }
        }
    }

    // Maximize sum mu_i r_i - nu(phi): minimize the negation.
    let mut objective = vec![0.0; vars];
    for (j, y) in prob.nu.points.iter().enumerate() {
        let idx = grid_index(&prob.grid, y.coords[0])
            .ok_or_else(|| Error::schema("grid", "missing support point"))?;
        objective[idx] += prob.nu.weights[j];
    }
    for i in 0..m {
        objective[k + i] = -prob.mu.weights[i];
    }
    let mut bounds = vec![VarBounds::default(); k];
    bounds.extend(std::iter::repeat(VarBounds::free()).take(m));
    let lp = LinearProgram::new(objective, constraints).with_bounds(bounds);
    let sol = simplex_solve(&lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!("form iv program is {:?}", sol.status)));
    }
    Ok((-sol.objective, sol.primal[..k].to_vec()))
}

/// Norm-cost dual: maximize `mu(phi) - nu(phi)` over increasing convex
/// 1-Lipschitz grid functions. Coincides with form i for the absolute-value
/// cost.
pub fn solve_kr_dual(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    grid: &[f64],
) -> Result<(f64, Vec<f64>)> {
    if mu.dim() != 1 || nu.dim() != 1 {
        return Err(Error::Unsupported("the norm dual grid program is 1D".into()));
    }
    let k = grid.len();
    let mut constraints = phi_constraints(grid, k);
    // 1-Lipschitz: increments bounded by the grid spacing (monotonicity
    // already gives the lower bound).
    for kk in 0..k - 1 {
        let mut c = vec![0.0; k];
        c[kk + 1] = -1.0;
        c[kk] = 1.0;
        constraints.push(Constraint::new(c, Sense::Ge, -(grid[kk + 1] - grid[kk])));
    }
    let mut objective = vec![0.0; k];
    for (p, w) in mu.points.iter().zip(&mu.weights) {
        let idx = grid_index(grid, p.coords[0])
            .ok_or_else(|| Error::schema("grid", "missing mu support point"))?;
        objective[idx] -= w;
    }
    for (p, w) in nu.points.iter().zip(&nu.weights) {
        let idx = grid_index(grid, p.coords[0])
            .ok_or_else(|| Error::schema("grid", "missing nu support point"))?;
        objective[idx] += w;
    }
    let sol = simplex_solve(&LinearProgram::new(objective, constraints))?;
    if sol.status != LpStatus::Optimal {
        return Err(Error::Internal(format!("norm dual program is {:?}", sol.status)));
    }
    Ok((-sol.objective, sol.primal))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourValues {
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub spread: f64,
    pub passed: bool,
}

/// Run all four programs and compare. Passes when the spread is at most
/// `tol * (1 + min value)`.
pub fn compare_four(prob: &MonopolyProblem, tol: f64, opts: &SolveOptions) -> Result<FourValues> {
    let v1 = solve_form_i(prob, opts)?;
    let v2 = solve_form_ii(prob)?;
    let v3 = solve_form_iii(prob)?;
    let (v4, _) = solve_form_iv(prob)?;
    let min = v1.min(v2).min(v3).min(v4);
    let max = v1.max(v2).max(v3).max(v4);
    let spread = max - min;
    Ok(FourValues {
        v1,
        v2,
        v3,
        v4,
        spread,
        passed: spread <= tol * (1.0 + min.abs()),
    })
}
