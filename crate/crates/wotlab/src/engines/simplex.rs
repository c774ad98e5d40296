//! Dense two-phase primal simplex with Bland anti-cycling and Farkas rays.
//!
//! Desk-scale by design: the tableau is dense and instances are capped at
//! [`SimplexOptions::var_cap`] variables. Determinism matters more than speed
//! here, so Bland's rule is the default pivot rule.

use serde::{Deserialize, Serialize};

use crate::engines::linalg::solve_dense;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, sense: Sense, rhs: f64) -> Self {
        Constraint { coeffs, sense, rhs }
    }
}

/// Per-variable bounds; the default is `[0, +inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarBounds {
    pub lower: f64,
    pub upper: f64,
}

impl Default for VarBounds {
    fn default() -> Self {
        VarBounds {
            lower: 0.0,
            upper: f64::INFINITY,
        }
    }
}

impl VarBounds {
    pub fn free() -> Self {
        VarBounds {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        }
    }
}

/// `minimize objective . x` subject to dense rows and variable bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// One entry per variable; missing entries default to `[0, +inf)`.
    pub bounds: Vec<VarBounds>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, constraints: Vec<Constraint>) -> Self {
        let n = objective.len();
        LinearProgram {
            objective,
            constraints,
            bounds: vec![VarBounds::default(); n],
        }
    }

    pub fn with_bounds(mut self, bounds: Vec<VarBounds>) -> Self {
        self.bounds = bounds;
        self
    }

    fn validate(&self, cap: usize) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::ShapeMismatch("empty objective".into()));
        }
        if n > cap {
            return Err(Error::DimensionOverflow { cap, got: n });
        }
        if self.bounds.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n} bound entries, got {}",
                self.bounds.len()
            )));
        }
        if !self.objective.iter().all(|c| c.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite objective".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "constraint {i} has {} coefficients, expected {n}",
                    c.coeffs.len()
                )));
            }
            if !c.coeffs.iter().all(|v| v.is_finite()) || !c.rhs.is_finite() {
                return Err(Error::ShapeMismatch(format!(
                    "constraint {i} has a non-finite entry"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Primal values in the caller's variable order (empty unless optimal).
    pub primal: Vec<f64>,
    /// Multipliers for the caller's constraint rows (empty unless optimal).
    pub dual: Vec<f64>,
    pub objective: f64,
    /// Dual objective including bound-multiplier terms; equals `objective`
    /// within 1e-8 on every optimal solve.
    pub dual_objective: f64,
    /// Farkas ray over the caller's rows when infeasible.
    pub farkas_ray: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Bland's rule (deterministic, cycle-free). Disabling switches to the
    /// Dantzig rule guarded by a pivot cap.
    pub bland: bool,
    pub var_cap: usize,
    pub max_pivots: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            bland: true,
            var_cap: 20_000,
            max_pivots: 200_000,
        }
    }
}

/// Standardized program: `min c.z` s.t. `A z = b`, `z >= 0`, `b >= 0`.
struct Standardized {
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    /// Objective constant from lower-bound shifts.
    shift: f64,
    /// Row flips applied to reach `b >= 0` (+1 or -1), caller rows first.
    flips: Vec<f64>,
    /// Number of caller rows (upper-bound rows follow).
    caller_rows: usize,
    /// Recover caller variables: `x_j = base_j + sum_k scale * z_k`.
    recover: Vec<VarRecover>,
}

enum VarRecover {
    /// `x = base + z_col`
    Shifted { base: f64, col: usize },
    /// `x = base - z_col`
    Mirrored { base: f64, col: usize },
    /// `x = z_plus - z_minus`
    Split { plus: usize, minus: usize },
}

fn standardize(lp: &LinearProgram) -> Standardized {
    let n = lp.objective.len();
    let mut a_cols: Vec<Vec<f64>> = Vec::new(); // column-major while building
    let mut c: Vec<f64> = Vec::new();
    let mut shift = 0.0;
    let mut recover = Vec::with_capacity(n);
    let mut upper_rows: Vec<(usize, f64)> = Vec::new(); // (column, bound)

    let col_of = |constraints: &[Constraint], j: usize| -> Vec<f64> {
        constraints.iter().map(|cst| cst.coeffs[j]).collect()
    };

    for j in 0..n {
        let b = lp.bounds[j];
        let col = col_of(&lp.constraints, j);
        if b.lower.is_finite() {
            // x = lower + z, z >= 0
            shift += lp.objective[j] * b.lower;
            let idx = a_cols.len();
            a_cols.push(col);
            c.push(lp.objective[j]);
            if b.upper.is_finite() {
                upper_rows.push((idx, b.upper - b.lower));
            }
            recover.push(VarRecover::Shifted {
                base: b.lower,
                col: idx,
            });
        } else if b.upper.is_finite() {
            // x = upper - z, z >= 0
            shift += lp.objective[j] * b.upper;
            let idx = a_cols.len();
            a_cols.push(col.iter().map(|v| -v).collect());
            c.push(-lp.objective[j]);
            recover.push(VarRecover::Mirrored {
                base: b.upper,
                col: idx,
            });
        } else {
            let plus = a_cols.len();
            a_cols.push(col.clone());
            c.push(lp.objective[j]);
            let minus = a_cols.len();
            a_cols.push(col.iter().map(|v| -v).collect());
            c.push(-lp.objective[j]);
            recover.push(VarRecover::Split { plus, minus });
        }
    }

    let caller_rows = lp.constraints.len();
    let total_rows = caller_rows + upper_rows.len();
    let mut a: Vec<Vec<f64>> = (0..total_rows)
        .map(|i| {
            a_cols
                .iter()
                .map(|col| if i < caller_rows { col[i] } else { 0.0 })
                .collect()
        })
        .collect();
    let mut b: Vec<f64> = lp.constraints.iter().map(|cst| cst.rhs).collect();
    let mut senses: Vec<Sense> = lp.constraints.iter().map(|cst| cst.sense).collect();

    // Shift the rhs for finite lower bounds: row . base subtracted.
    for (i, row) in a.iter().enumerate().take(caller_rows) {
        let mut adj = 0.0;
        for (j, rec) in recover.iter().enumerate() {
            let base = match rec {
                VarRecover::Shifted { base, .. } => *base,
                VarRecover::Mirrored { base, .. } => *base,
                VarRecover::Split { .. } => 0.0,
            };
            if base != 0.0 {
                // The stored standardized column already carries the sign for
                // mirrored variables, so use the caller coefficient here.
                adj += lp.constraints[i].coeffs[j] * base;
            }
        }
        let _ = row;
        b[i] -= adj;
    }

    for (k, &(col, bound)) in upper_rows.iter().enumerate() {
        a[caller_rows + k][col] = 1.0;
        b.push(bound);
        senses.push(Sense::Le);
    }
    debug_assert_eq!(b.len(), total_rows);

    // Slack columns per row sense.
    for (i, sense) in senses.iter().enumerate() {
        let coeff = match sense {
            Sense::Le => 1.0,
            Sense::Ge => -1.0,
            Sense::Eq => continue,
        };
        for (r, row) in a.iter_mut().enumerate() {
            row.push(if r == i { coeff } else { 0.0 });
        }
        c.push(0.0);
    }

    // Flip rows to make the rhs nonnegative.
    let mut flips = vec![1.0; total_rows];
    for i in 0..total_rows {
        if b[i] < 0.0 {
            flips[i] = -1.0;
            b[i] = -b[i];
            for v in a[i].iter_mut() {
                *v = -*v;
            }
        }
    }

    Standardized {
        a,
        b,
        c,
        shift,
        flips,
        caller_rows,
        recover,
    }
}

struct Tableau {
    /// rows x (cols + 1); the last entry of each row is the rhs.
    rows: Vec<Vec<f64>>,
    /// Objective row (reduced costs, last entry = -objective value).
    obj: Vec<f64>,
    basis: Vec<usize>,
    eps: f64,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, tr) in self.rows.iter_mut().enumerate() {
            if r != row && tr[col] != 0.0 {
                let f = tr[col];
                for (v, pv) in tr.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                tr[col] = 0.0;
            }
        }
        if self.obj[col] != 0.0 {
            let f = self.obj[col];
            for (v, pv) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Returns Ok(true) at optimality, Ok(false) if unbounded.
    fn run(&mut self, allowed: &[bool], opts: &SimplexOptions, pivots: &mut usize) -> Result<bool> {
        let ncols = self.obj.len() - 1;
        loop {
            let entering = if opts.bland {
                (0..ncols).find(|&j| allowed[j] && self.obj[j] < -self.eps)
            } else {
                (0..ncols)
                    .filter(|&j| allowed[j] && self.obj[j] < -self.eps)
                    .min_by(|&a, &b| self.obj[a].partial_cmp(&self.obj[b]).unwrap())
            };
            let Some(col) = entering else {
                return Ok(true);
            };

            let mut leave: Option<(usize, f64)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[col] > self.eps {
                    let ratio = row[ncols] / row[col];
                    let better = match leave {
                        None => true,
                        Some((lr, lratio)) => {
                            ratio < lratio - self.eps
                                || (ratio < lratio + self.eps && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((row, _)) = leave else {
                return Ok(false);
            };
            self.pivot(row, col);
            *pivots += 1;
            if *pivots > opts.max_pivots {
                return Err(Error::CyclingGuard {
                    pivots: *pivots,
                });
            }
        }
    }
}

/// Solve `lp` with the default options.
pub fn simplex_solve(lp: &LinearProgram) -> Result<LpSolution> {
    simplex_solve_with(lp, &SimplexOptions::default())
}

pub fn simplex_solve_with(lp: &LinearProgram, opts: &SimplexOptions) -> Result<LpSolution> {
    lp.validate(opts.var_cap)?;
    let std = standardize(lp);
    let m = std.b.len();
    let n = std.c.len();

    let scale = std
        .a
        .iter()
        .flatten()
        .chain(std.b.iter())
        .fold(1.0_f64, |s, v| s.max(v.abs()));
    let eps = 1e-10 * scale;

    // Phase I tableau: structural + slack columns, then artificials.
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    for i in 0..m {
        let mut row = std.a[i].clone();
        for k in 0..m {
            row.push(if k == i { 1.0 } else { 0.0 });
        }
        row.push(std.b[i]);
        rows.push(row);
    }
    let mut obj = vec![0.0; n + m + 1];
    for k in 0..m {
        obj[n + k] = 1.0;
    }
    // Price out the artificial basis.
    for i in 0..m {
        for (j, v) in obj.iter_mut().enumerate() {
            *v -= rows[i][j];
        }
    }
    let mut tab = Tableau {
        rows,
        obj,
        basis: (n..n + m).collect(),
        eps,
    };
    let mut pivots = 0usize;
    // Artificials never re-enter; this keeps every basic artificial on its
    // own row, which the redundant-row cleanup below relies on.
    let allowed: Vec<bool> = (0..n + m).map(|j| j < n).collect();
    let finished = tab.run(&allowed, opts, &mut pivots)?;
    debug_assert!(finished, "phase I cannot be unbounded");

    let phase1 = -tab.obj[n + m];
    if phase1 > 1e-9 * (1.0 + scale) {
        // Infeasible: the phase-I dual prices give the Farkas ray.
        let ray = phase1_ray(&std, &tab, n, m)?;
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            primal: vec![],
            dual: vec![],
            objective: f64::NAN,
            dual_objective: f64::NAN,
            farkas_ray: Some(ray),
        });
    }

    // Drive basic artificials out; delete genuinely redundant rows.
    let mut drop_rows: Vec<usize> = Vec::new();
    for r in 0..m {
        if tab.basis[r] >= n {
            let col = (0..n).find(|&j| tab.rows[r][j].abs() > eps);
            match col {
                Some(j) => tab.pivot(r, j),
                None => drop_rows.push(r),
            }
        }
    }
    for &r in drop_rows.iter().rev() {
        tab.rows.remove(r);
        tab.basis.remove(r);
    }

    // Phase II: swap in the real objective, forbid artificial columns.
    let mut obj = vec![0.0; n + m + 1];
    obj[..n].copy_from_slice(&std.c);
    for (r, &bi) in tab.basis.iter().enumerate() {
        let f = obj[bi];
        if f != 0.0 {
            let row = tab.rows[r].clone();
            for (v, rv) in obj.iter_mut().zip(&row) {
                *v -= f * rv;
            }
        }
    }
    tab.obj = obj;
    let mut allowed = vec![true; n + m];
    for a in allowed.iter_mut().skip(n) {
        *a = false;
    }
    let optimal = tab.run(&allowed, opts, &mut pivots)?;
    if !optimal {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            primal: vec![],
            dual: vec![],
            objective: f64::NEG_INFINITY,
            dual_objective: f64::NEG_INFINITY,
            farkas_ray: None,
        });
    }

    // Basic solution in standardized variables.
    let mut z = vec![0.0; n];
    for (r, &bi) in tab.basis.iter().enumerate() {
        if bi < n {
            z[bi] = tab.rows[r][n + m];
        }
    }
    let mut primal = vec![0.0; lp.objective.len()];
    for (j, rec) in std.recover.iter().enumerate() {
        primal[j] = match rec {
            VarRecover::Shifted { base, col } => base + z[*col],
            VarRecover::Mirrored { base, col } => base - z[*col],
            VarRecover::Split { plus, minus } => z[*plus] - z[*minus],
        };
    }
    let objective: f64 = std.shift
        + std
            .c
            .iter()
            .zip(&z)
            .map(|(c, v)| c * v)
            .sum::<f64>();

    // Duals from the final basis: solve B^T y = c_B on the original data.
    let kept_rows: Vec<usize> = (0..m).filter(|r| !drop_rows.contains(r)).collect();
    let y_kept = basis_duals(&std, &tab.basis, &kept_rows)?;
    let mut y_std = vec![0.0; m];
    for (k, &r) in kept_rows.iter().enumerate() {
        y_std[r] = y_kept[k];
    }
    let dual_objective = std.shift
        + y_std
            .iter()
            .zip(&std.b)
            .map(|(y, b)| y * b)
            .sum::<f64>();
    let dual: Vec<f64> = (0..std.caller_rows)
        .map(|i| std.flips[i] * y_std[i])
        .collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        primal,
        dual,
        objective,
        dual_objective,
        farkas_ray: None,
    })
}

/// Solve `B^T y = c_B` for the rows actually kept in the tableau.
fn basis_duals(std: &Standardized, basis: &[usize], kept_rows: &[usize]) -> Result<Vec<f64>> {
    let k = kept_rows.len();
    debug_assert_eq!(basis.len(), k);
    let mut bt = vec![vec![0.0; k]; k];
    let mut cb = vec![0.0; k];
    let n = std.c.len();
    for (col_idx, &bi) in basis.iter().enumerate() {
        for (row_idx, &r) in kept_rows.iter().enumerate() {
            // Column bi of [A | I] restricted to the kept rows.
            let v = if bi < n {
                std.a[r][bi]
            } else if bi - n == r {
                1.0
            } else {
                0.0
            };
            bt[col_idx][row_idx] = v;
        }
        cb[col_idx] = if bi < n { std.c[bi] } else { 0.0 };
    }
    solve_dense(&bt, &cb).ok_or_else(|| Error::Internal("singular simplex basis".into()))
}

/// Farkas ray from the phase-I optimal basis.
fn phase1_ray(std: &Standardized, tab: &Tableau, n: usize, m: usize) -> Result<Vec<f64>> {
    // Phase-I costs: 1 on artificials, 0 elsewhere. y = B^{-T} c_B.
    let kept: Vec<usize> = (0..m).collect();
    let k = m;
    let mut bt = vec![vec![0.0; k]; k];
    let mut cb = vec![0.0; k];
    for (col_idx, &bi) in tab.basis.iter().enumerate() {
        for row_idx in 0..k {
            let v = if bi < n {
                std.a[row_idx][bi]
            } else if bi - n == row_idx {
                1.0
            } else {
                0.0
            };
            bt[col_idx][row_idx] = v;
        }
        cb[col_idx] = if bi >= n { 1.0 } else { 0.0 };
    }
    let _ = kept;
    let y = solve_dense(&bt, &cb)
        .ok_or_else(|| Error::Internal("singular phase-I basis".into()))?;
    // The ray proves infeasibility of the caller system when mapped through
    // the row flips; upper-bound rows keep their multipliers internal, which
    // is fine because farkas_certificate rejects bounded-variable programs.
    Ok((0..std.caller_rows)
        .map(|i| std.flips[i] * y[i])
        .collect())
}

/// Farkas certificate for an infeasible program: a row multiplier vector `y`
/// (respecting the row senses) with `y . A <= 0` componentwise and
/// `y . b > 0`. Errors on feasible programs.
pub fn farkas_certificate(lp: &LinearProgram) -> Result<Vec<f64>> {
    if lp
        .bounds
        .iter()
        .any(|b| b.lower != 0.0 || b.upper.is_finite())
    {
        return Err(Error::Unsupported(
            "farkas certificates are only built for programs with x >= 0 bounds".into(),
        ));
    }
    let sol = simplex_solve(lp)?;
    match sol.status {
        LpStatus::Infeasible => {
            let ray = sol
                .farkas_ray
                .ok_or_else(|| Error::Internal("missing farkas ray".into()))?;
            verify_farkas(lp, &ray, 1e-9)?;
            Ok(ray)
        }
        _ => Err(Error::FeasibleProgram),
    }
}

/// Numerically verify the Farkas conditions at tolerance `tol` (after
/// normalizing the ray to unit max-abs).
pub fn verify_farkas(lp: &LinearProgram, ray: &[f64], tol: f64) -> Result<()> {
    if ray.len() != lp.constraints.len() {
        return Err(Error::ShapeMismatch("ray length".into()));
    }
    let scale = ray.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale <= 0.0 {
        return Err(Error::Internal("zero farkas ray".into()));
    }
    for (i, (cst, &yi)) in lp.constraints.iter().zip(ray).enumerate() {
        let yi = yi / scale;
        match cst.sense {
            Sense::Le if yi > tol => {
                return Err(Error::Internal(format!(
                    "ray sign violates `<=` row {i}: {yi:.3e}"
                )))
            }
            Sense::Ge if yi < -tol => {
                return Err(Error::Internal(format!(
                    "ray sign violates `>=` row {i}: {yi:.3e}"
                )))
            }
            _ => {}
        }
    }
    let n = lp.objective.len();
    for j in 0..n {
        let dot: f64 = lp
            .constraints
            .iter()
            .zip(ray)
            .map(|(cst, &yi)| yi / scale * cst.coeffs[j])
            .sum();
        if dot > tol {
            return Err(Error::Internal(format!(
                "ray fails y.A <= 0 at column {j}: {dot:.3e}"
            )));
        }
    }
    let yb: f64 = lp
        .constraints
        .iter()
        .zip(ray)
        .map(|(cst, &yi)| yi / scale * cst.rhs)
        .sum();
    if yb <= tol {
        return Err(Error::Internal(format!("ray fails y.b > 0: {yb:.3e}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimizes_single_variable() {
        // min x s.t. x >= 1
        let lp = LinearProgram::new(
            vec![1.0],
            vec![Constraint::new(vec![1.0], Sense::Ge, 1.0)],
        );
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.primal[0] - 1.0).abs() < 1e-10);
        assert!((sol.objective - 1.0).abs() < 1e-10);
        assert!((sol.dual_objective - sol.objective).abs() < 1e-8);
    }

    #[test]
    fn detects_infeasible_with_certificate() {
        // x >= 1 and x <= 0
        let lp = LinearProgram::new(
            vec![1.0],
            vec![
                Constraint::new(vec![1.0], Sense::Ge, 1.0),
                Constraint::new(vec![1.0], Sense::Le, 0.0),
            ],
        );
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        let ray = farkas_certificate(&lp).unwrap();
        verify_farkas(&lp, &ray, 1e-9).unwrap();
        // Normalized violation margin is exactly the rhs gap.
        let scale = ray.iter().fold(0.0_f64, |s, v| s.max(v.abs()));
        let yb: f64 = ray.iter().zip([1.0, 0.0]).map(|(y, b)| y / scale * b).sum();
        assert!((yb - 1.0).abs() < 1e-9);
    }

    #[test]
    fn farkas_on_feasible_is_an_error() {
        let lp = LinearProgram::new(
            vec![1.0],
            vec![Constraint::new(vec![1.0], Sense::Ge, 1.0)],
        );
        assert!(matches!(
            farkas_certificate(&lp),
            Err(Error::FeasibleProgram)
        ));
    }

    #[test]
    fn detects_unbounded() {
        // min -x s.t. x >= 1
        let lp = LinearProgram::new(
            vec![-1.0],
            vec![Constraint::new(vec![1.0], Sense::Ge, 1.0)],
        );
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn solves_transport_2x2() {
        // Transport LP with cost [[0,1],[1,0]] and uniform marginals: the
        // diagonal plan is optimal with value 0.
        let lp = LinearProgram::new(
            vec![0.0, 1.0, 1.0, 0.0],
            vec![
                Constraint::new(vec![1.0, 1.0, 0.0, 0.0], Sense::Eq, 0.5),
                Constraint::new(vec![0.0, 0.0, 1.0, 1.0], Sense::Eq, 0.5),
                Constraint::new(vec![1.0, 0.0, 1.0, 0.0], Sense::Eq, 0.5),
                Constraint::new(vec![0.0, 1.0, 0.0, 1.0], Sense::Eq, 0.5),
            ],
        );
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!(sol.objective.abs() < 1e-10);
        assert!((sol.primal[0] - 0.5).abs() < 1e-10);
        assert!((sol.primal[3] - 0.5).abs() < 1e-10);
        assert!((sol.dual_objective - sol.objective).abs() < 1e-8);
    }

    #[test]
    fn handles_free_variables_and_bounds() {
        // min y s.t. y >= x - 2, y >= -x, x in [0, 4], y free.
        let lp = LinearProgram::new(
            vec![0.0, 1.0],
            vec![
                Constraint::new(vec![-1.0, 1.0], Sense::Ge, -2.0),
                Constraint::new(vec![1.0, 1.0], Sense::Ge, 0.0),
            ],
        )
        .with_bounds(vec![
            VarBounds {
                lower: 0.0,
                upper: 4.0,
            },
            VarBounds::free(),
        ]);
        let sol = simplex_solve(&lp).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - (-1.0)).abs() < 1e-9, "{}", sol.objective);
        assert!((sol.primal[0] - 1.0).abs() < 1e-9);
        assert!((sol.dual_objective - sol.objective).abs() < 1e-8);
    }

    #[test]
    fn martingale_mean_mismatch_is_infeasible() {
        // Rows of a martingale coupling from {-1,+1} (mass 1/2 each) to {0}:
        // each row must put its mass on 0 yet keep its own barycenter.
        let lp = LinearProgram::new(
            vec![0.0, 0.0],
            vec![
                Constraint::new(vec![1.0, 0.0], Sense::Eq, 0.5),
                Constraint::new(vec![0.0, 1.0], Sense::Eq, 0.5),
                Constraint::new(vec![1.0, 1.0], Sense::Eq, 1.0),
                // barycenter rows: sum_j pi_ij (y_j - x_i) = 0
                Constraint::new(vec![0.0 - (-1.0), 0.0], Sense::Eq, 0.0),
                Constraint::new(vec![0.0, 0.0 - 1.0], Sense::Eq, 0.0),
            ],
        );
        let ray = farkas_certificate(&lp).unwrap();
        verify_farkas(&lp, &ray, 1e-9).unwrap();
    }

    #[test]
    fn strong_duality_on_seeded_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut optimal_seen = 0;
        for _ in 0..40 {
            let n = rng.gen_range(2..6);
            let m = rng.gen_range(1..5);
            let objective: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..3.0)).collect();
            let constraints: Vec<Constraint> = (0..m)
                .map(|_| {
                    let coeffs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..2.0)).collect();
                    let sense = match rng.gen_range(0..3) {
                        0 => Sense::Le,
                        1 => Sense::Ge,
                        _ => Sense::Eq,
                    };
                    Constraint::new(coeffs, sense, rng.gen_range(-1.0..2.0))
                })
                .collect();
            let lp = LinearProgram::new(objective.clone(), constraints);
            let sol = simplex_solve(&lp).unwrap();
            if sol.status == LpStatus::Optimal {
                optimal_seen += 1;
                assert!(
                    (sol.objective - sol.dual_objective).abs() <= 1e-8 * (1.0 + sol.objective.abs()),
                    "duality gap: {} vs {}",
                    sol.objective,
                    sol.dual_objective
                );
                // Primal feasibility.
                for cst in &lp.constraints {
                    let lhs: f64 = cst.coeffs.iter().zip(&sol.primal).map(|(a, x)| a * x).sum();
                    match cst.sense {
                        Sense::Le => assert!(lhs <= cst.rhs + 1e-9),
                        Sense::Ge => assert!(lhs >= cst.rhs - 1e-9),
                        Sense::Eq => assert!((lhs - cst.rhs).abs() <= 1e-9),
                    }
                }
                // Complementary slackness on variables.
                for j in 0..lp.objective.len() {
                    let rc: f64 = lp.objective[j]
                        - lp.constraints
                            .iter()
                            .zip(&sol.dual)
                            .map(|(cst, y)| y * cst.coeffs[j])
                            .sum::<f64>();
                    assert!(
                        (sol.primal[j] * rc).abs() <= 1e-8 * (1.0 + sol.objective.abs()),
                        "complementary slackness violated at {j}"
                    );
                }
            } else if sol.status == LpStatus::Infeasible {
                verify_farkas(&lp, &sol.farkas_ray.unwrap(), 1e-9).unwrap();
            }
        }
        assert!(optimal_seen >= 10, "suite too degenerate: {optimal_seen}");
    }
}
