//! The central API: solve the primal weak transport problem, produce dual
//! certificates through the inf-convolution transform, report duality gaps,
//! and check the backward-transfer representation.
//!
//! A certificate is honest by construction: any dual vector `g` yields a
//! lower bound `-nu(g) + integral rc_g d mu`, so even a truncated ascent
//! returns something verifiable. Strong duality is only ever asserted through
//! the measured gap.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costs::{
    check_property_a, eval_cost, first_variation, rc_transform_with_gap, BoundCost, CostModel,
    ThetaSpec,
};
use crate::engines::{
    concave_ascent, fixed_point_ascent, frank_wolfe, transport_lmo_detailed, wasserstein_1,
    AscentOptions, FwOptions, LineSearch, StartVertex, StepRule,
};
use crate::error::{Error, Result};
use crate::measures::{disintegrate, Coupling, DiscreteMeasure};

/// Options shared by the primal and dual solvers.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub max_iter: usize,
    pub rel_tol: f64,
    /// Line-search override; by default the solver picks exact quadratic
    /// steps for the classical and barycentric families and Armijo for the
    /// rest.
    pub line_search: Option<LineSearch>,
    pub start: StartVertex,
    /// Skip the property-(A) sampling precheck.
    pub skip_property_check: bool,
    pub property_samples: usize,
    pub property_seed: u64,
    /// Iteration budget for the generic dual ascent stages.
    pub ascent_iters: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iter: 100_000,
            rel_tol: 1e-8,
            line_search: None,
            start: StartVertex::NorthWest,
            skip_property_check: false,
            property_samples: 64,
            property_seed: 0xC0_57,
            ascent_iters: 600,
        }
    }
}

/// Primal solution with its gap certificate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution {
    pub coupling: Coupling,
    pub value: f64,
    pub fw_gap: f64,
    pub iterations: usize,
    pub fingerprint: String,
}

/// Dual certificate: a vector `g` on the column support, the transform
/// values on the row support, and the resulting lower bound.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DualCertificate {
    pub g: Vec<f64>,
    pub r_values: Vec<f64>,
    pub dual_value: f64,
    pub fingerprint: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapReport {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
    pub rel_gap: f64,
    pub passed: bool,
}

/// Canonical instance fingerprint over the cost model and both marginals.
pub fn instance_fingerprint(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> String {
    let mut hasher = Sha256::new();
    for m in [mu, nu] {
        hasher.update((m.len() as u64).to_be_bytes());
        for (p, w) in m.points.iter().zip(&m.weights) {
            for c in &p.coords {
                hasher.update(c.to_bits().to_be_bytes());
            }
            hasher.update(w.to_bits().to_be_bytes());
        }
    }
    match model {
        CostModel::Classical { cost } => {
            hasher.update(b"classical");
            for row in cost {
                for c in row {
                    hasher.update(c.to_bits().to_be_bytes());
                }
            }
        }
        CostModel::Barycentric => hasher.update(b"barycentric"),
        CostModel::Entropic { gamma_rows } => {
            hasher.update(b"entropic");
            for row in gamma_rows {
                for c in row {
                    hasher.update(c.to_bits().to_be_bytes());
                }
            }
        }
        CostModel::MonopolyIcx { theta } => {
            hasher.update(b"monopoly_icx");
            match theta {
                ThetaSpec::Norm(name) => hasher.update(name.as_bytes()),
                ThetaSpec::Sampled { samples } => {
                    for s in samples {
                        hasher.update(s[0].to_bits().to_be_bytes());
                        hasher.update(s[1].to_bits().to_be_bytes());
                    }
                }
            }
        }
    }
    let digest = hasher.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

/// Fingerprint for operations that take marginals but no cost model.
pub fn tagged_fingerprint(tag: &str, mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> String {
    let mut hasher = Sha256::new();
    hasher.update(tag.as_bytes());
    for m in [mu, nu] {
        hasher.update((m.len() as u64).to_be_bytes());
        for (p, w) in m.points.iter().zip(&m.weights) {
            for c in &p.coords {
                hasher.update(c.to_bits().to_be_bytes());
            }
            hasher.update(w.to_bits().to_be_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

fn property_precheck(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolveOptions,
) -> Result<()> {
    let bound = BoundCost::new(model, mu, nu)?;
    if opts.skip_property_check {
        return Ok(());
    }
    let report = check_property_a(&bound, opts.property_samples, opts.property_seed);
    if !report.passed {
        return Err(Error::Unsupported(format!(
            "cost model fails the convexity sampling check (defect {:.3e})",
            report.max_convexity_defect
        )));
    }
    Ok(())
}

fn pick_line_search(model: &CostModel, opts: &SolveOptions) -> LineSearch {
    opts.line_search.unwrap_or(match model {
        CostModel::Classical { .. } | CostModel::Barycentric => LineSearch::ExactQuadratic,
        CostModel::Entropic { .. } | CostModel::MonopolyIcx { .. } => LineSearch::Armijo,
    })
}

/// The weak-transport objective and its gradient at a flattened mass matrix.
pub(crate) fn objective_oracle<'a>(
    model: &'a CostModel,
    mu: &'a DiscreteMeasure,
    nu: &'a DiscreteMeasure,
) -> impl FnMut(&[f64]) -> (f64, Vec<f64>) + 'a {
    let m = mu.len();
    let n = nu.len();
    move |mass: &[f64]| {
        let mut value = 0.0;
        let mut grad = vec![0.0; m * n];
        let mut p = vec![0.0; n];
        for i in 0..m {
            let w = mu.weights[i];
            for j in 0..n {
                p[j] = mass[i * n + j] / w;
            }
            value += w * eval_cost(model, mu, nu, i, &p);
            let fv = first_variation(model, mu, nu, i, &p);
            grad[i * n..(i + 1) * n].copy_from_slice(&fv);
        }
        (value, grad)
    }
}

/// Minimize `sum_i mu_i C(x_i, pi_x_i)` over the couplings of `(mu, nu)` by
/// Frank-Wolfe; the returned `fw_gap` bounds the suboptimality.
pub fn solve_primal(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolveOptions,
) -> Result<Solution> {
    property_precheck(model, mu, nu, opts)?;
    if let CostModel::MonopolyIcx { theta } = model {
        // Frank-Wolfe stalls on the kinks of piecewise-linear objectives;
        // those instances are exact epigraph programs instead.
        if crate::costs::theta_is_piecewise_linear(theta, nu.dim()) {
            let out = crate::costs::solve_monopoly_weak_lp(
                theta,
                &mu.points,
                &mu.weights,
                &nu.points,
                &nu.weights,
            )?;
            let coupling = Coupling::new(mu.clone(), nu.clone(), out.mass)?;
            return Ok(Solution {
                fingerprint: instance_fingerprint(model, mu, nu),
                coupling,
                value: out.value,
                fw_gap: 0.0,
                iterations: 0,
            });
        }
    }
    // Quadratic objectives finish with an exact active-set polish after a
    // coarse Frank-Wolfe phase; pure Frank-Wolfe needs tens of thousands of
    // zigzag steps for the last digits on degenerate instances.
    let coarse_quadratic = matches!(model, CostModel::Barycentric);
    let fw_tol = if coarse_quadratic {
        opts.rel_tol.max(1e-5)
    } else {
        opts.rel_tol
    };
    let fw_opts = FwOptions {
        max_iter: opts.max_iter,
        rel_tol: fw_tol,
        line_search: pick_line_search(model, opts),
        start: opts.start,
    };
    let oracle = objective_oracle(model, mu, nu);
    let res = frank_wolfe(oracle, mu, nu, &fw_opts)?;
    let mut value = res.value;
    let mut fw_gap = res.fw_gap;
    let mut coupling = res.coupling;
    if coarse_quadratic && fw_gap > opts.rel_tol * (1.0 + value.abs()) {
        let flat: Vec<f64> = coupling.mass.iter().flatten().copied().collect();
        if let Some((mass, v, gap)) =
            polish_barycentric(mu, nu, &flat, opts.rel_tol)?
        {
            coupling = Coupling::new(mu.clone(), nu.clone(), mass)?;
            value = v;
            fw_gap = gap;
        } else {
            // Polish could not certify; fall back to the full-precision
            // Frank-Wolfe run.
            let fw_opts = FwOptions {
                rel_tol: opts.rel_tol,
                ..fw_opts
            };
            let oracle = objective_oracle(model, mu, nu);
            let res = frank_wolfe(oracle, mu, nu, &fw_opts)?;
            coupling = res.coupling;
            value = res.value;
            fw_gap = res.fw_gap;
        }
    }
    Ok(Solution {
        fingerprint: instance_fingerprint(model, mu, nu),
        coupling,
        value,
        fw_gap,
        iterations: res.iterations,
    })
}

/// Exact finisher for the barycentric primal: active-set iteration on the
/// quadratic over the coupling polytope, starting from a feasible point.
/// Returns `None` when a singular face system prevents certification.
fn polish_barycentric(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    start: &[f64],
    rel_tol: f64,
) -> Result<Option<(Vec<Vec<f64>>, f64, f64)>> {
    use crate::engines::solve_kkt_ridge;
    let m = mu.len();
    let n = nu.len();
    let cells = m * n;
    let mut oracle = objective_oracle(&CostModel::Barycentric, mu, nu);

    // Quadratic data: f(p) = const + lin . p + 1/2 p^T H p with H block
    // diagonal over rows: H[(i,j),(i,j')] = (2 / mu_i) y_j . y_j'.
    let lin: Vec<f64> = (0..cells)
        .map(|k| -2.0 * mu.points[k / n].dot(&nu.points[k % n]))
        .collect();

    let mut current = start.to_vec();
    let mut working: Vec<usize> = (0..cells).filter(|&k| current[k] > 1e-14).collect();
    let lmo_gap = |point: &[f64],
                   oracle: &mut dyn FnMut(&[f64]) -> (f64, Vec<f64>)|
     -> Result<(f64, f64, Vec<usize>)> {
        let (value, grad) = oracle(point);
        let grad_matrix: Vec<Vec<f64>> =
            (0..m).map(|i| grad[i * n..(i + 1) * n].to_vec()).collect();
        let plan = transport_lmo_detailed(
            &grad_matrix,
            &mu.weights,
            &nu.weights,
            StartVertex::NorthWest,
        )?;
        let mut s_dot = 0.0;
        let mut support = Vec::new();
        for i in 0..m {
            for j in 0..n {
                if plan.mass[i][j] > 0.0 {
                    s_dot += plan.mass[i][j] * grad[i * n + j];
                    support.push(i * n + j);
                }
            }
        }
        let x_dot: f64 = point.iter().zip(&grad).map(|(a, b)| a * b).sum();
        Ok((value, x_dot - s_dot, support))
    };

    for _round in 0..200 {
        // Face system: stationarity over the working cells plus both
        // marginal families (rank deficiency handled by the ridge solve).
        let w = working.len();
        let dim = w + m + n;
        let mut sys = vec![vec![0.0; dim]; dim];
        let mut rhs = vec![0.0; dim];
        for (a, &ka) in working.iter().enumerate() {
            let (ia, ja) = (ka / n, ka % n);
            for (b, &kb) in working.iter().enumerate() {
                let (ib, jb) = (kb / n, kb % n);
                if ia == ib {
                    sys[a][b] = 2.0 / mu.weights[ia] * nu.points[ja].dot(&nu.points[jb]);
                }
            }
            sys[a][w + ia] = 1.0;
            sys[w + ia][a] = 1.0;
            sys[a][w + m + ja] = 1.0;
            sys[w + m + ja][a] = 1.0;
            rhs[a] = -lin[ka];
        }
        for i in 0..m {
            rhs[w + i] = mu.weights[i];
        }
        for j in 0..n {
            rhs[w + m + j] = nu.weights[j];
        }
        // The marginal rows must constrain only the working cells; rows are
        // filled above via the symmetric assignments.
        let Some((sol, residual)) = solve_kkt_ridge(&sys, &rhs) else {
            return Ok(None);
        };
        if residual > 1e-7 {
            return Ok(None);
        }
        let mut candidate = vec![0.0; cells];
        for (a, &k) in working.iter().enumerate() {
            candidate[k] = sol[a];
        }
        let negative = working
            .iter()
            .enumerate()
            .filter(|&(a, _)| sol[a] < -1e-12)
            .min_by(|x, y| {
                // Blocking cell: smallest step along the segment.
                let tx = current[*x.1] / (current[*x.1] - sol[x.0]);
                let ty = current[*y.1] / (current[*y.1] - sol[y.0]);
                tx.partial_cmp(&ty).unwrap()
            })
            .map(|(a, &k)| (a, k));
        match negative {
            Some((a, k)) => {
                let t = (current[k] / (current[k] - sol[a])).clamp(0.0, 1.0);
                for (idx, c) in current.iter_mut().enumerate() {
                    *c += t * (candidate[idx] - *c);
                    if *c < 0.0 {
                        *c = 0.0;
                    }
                }
                current[k] = 0.0;
                working.retain(|&kk| kk != k);
            }
            None => {
                for c in candidate.iter_mut() {
                    if *c < 0.0 {
                        *c = 0.0;
                    }
                }
                current = candidate;
                let (value, gap, support) = lmo_gap(&current, &mut oracle)?;
                if gap <= rel_tol * (1.0 + value.abs()) {
                    let mass: Vec<Vec<f64>> =
                        current.chunks(n).map(|r| r.to_vec()).collect();
                    return Ok(Some((mass, value, gap.max(0.0))));
                }
                let mut grew = false;
                for k in support {
                    if !working.contains(&k) {
                        working.push(k);
                        grew = true;
                    }
                }
                if !grew {
                    // The optimal face has ties the ridge solve cannot
                    // split; let the caller fall back.
                    return Ok(None);
                }
            }
        }
    }
    Ok(None)
}

/// Dual objective at `g`, corrected by the inner gaps so the result is a
/// rigorous lower bound; also returns the transform values and the column
/// masses of the argmin laws (the supergradient is `masses - nu`).
fn dual_eval(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    g: &[f64],
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut value = -nu.integrate(|j| g[j]);
    let mut r_values = Vec::with_capacity(mu.len());
    let mut masses = vec![0.0; nu.len()];
    for i in 0..mu.len() {
        let (r, p, gap) = rc_transform_with_gap(model, mu, nu, g, i)?;
        value += mu.weights[i] * (r - gap);
        r_values.push(r);
        for (mj, pj) in masses.iter_mut().zip(&p) {
            *mj += mu.weights[i] * pj;
        }
    }
    Ok((value, r_values, masses))
}

/// Maximize the dual `-nu(g) + integral rc_g d mu`.
///
/// Ascent runs from `g = 0`; for the entropic family the coordinate-exact
/// fixed-point update is used (it reproduces the alternating marginal-fitting
/// potentials). For the other families the diminishing-step ascent is
/// augmented with a warm start read off the primal optimizer's linearization
/// (the transport potentials of the gradient at the optimum) and an adaptive
/// polish; the warm start is what closes nonsmooth duals to 1e-5.
pub fn solve_dual(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolveOptions,
) -> Result<DualCertificate> {
    property_precheck(model, mu, nu, opts)?;
    let fingerprint = instance_fingerprint(model, mu, nu);
    let n = nu.len();

    let mut best_g = vec![0.0; n];
    let (mut best_value, _, _) = dual_eval(model, mu, nu, &best_g)?;

    let consider = |g: Vec<f64>, best_g: &mut Vec<f64>, best_value: &mut f64| -> Result<()> {
        let (v, _, _) = dual_eval(model, mu, nu, &g)?;
        if v > *best_value {
            *best_value = v;
            *best_g = g;
        }
        Ok(())
    };

    match model {
        CostModel::Entropic { gamma_rows } => {
            // Coordinate-exact update: g_j += log(column mass / nu_j), the
            // marginal-fitting step expressed in g alone.
            let value_of =
                |g: &[f64]| dual_eval(model, mu, nu, g).map(|r| r.0).unwrap_or(f64::NAN);
            let update = |g: &[f64]| {
                let mut masses = vec![0.0; n];
                for (i, row) in gamma_rows.iter().enumerate() {
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
                    for (j, (gj, gam)) in g.iter().zip(row).enumerate() {
                        masses[j] += mu.weights[i] * (-gj + gam.ln() - m).exp() / z;
                    }
                }
                g.iter()
                    .zip(&masses)
                    .zip(&nu.weights)
                    .map(|((gj, mj), nj)| gj + (mj / nj).ln())
                    .collect()
            };
            let (g, _, _) = fixed_point_ascent(value_of, update, &best_g, 50_000, 1e-13)?;
            consider(g, &mut best_g, &mut best_value)?;
        }
        _ => {
            // Stage 1: diminishing-step supergradient ascent from zero.
            let oracle = |g: &[f64]| match dual_eval(model, mu, nu, g) {
                Ok((v, _, masses)) => {
                    let s: Vec<f64> = masses
                        .iter()
                        .zip(&nu.weights)
                        .map(|(m, w)| m - w)
                        .collect();
                    (v, s)
                }
                Err(_) => (f64::NAN, vec![]),
            };
            let ascent_opts = AscentOptions {
                max_iter: opts.ascent_iters,
                patience: 120,
                step: StepRule::Diminishing { a: None, b: 10.0 },
                ..AscentOptions::default()
            };
            let (g, _) = concave_ascent(oracle, &best_g, &ascent_opts)?;
            consider(g, &mut best_g, &mut best_value)?;

            // Stage 2: warm start from the primal linearization potentials.
            let primal = solve_primal(model, mu, nu, opts)?;
            let kernel = disintegrate(&primal.coupling);
            let m = mu.len();
            let mut grad = vec![vec![0.0; n]; m];
            for i in 0..m {
                grad[i] = first_variation(model, mu, nu, i, kernel.row(i));
            }
            let plan = transport_lmo_detailed(&grad, &mu.weights, &nu.weights, opts.start)?;
            let warm: Vec<f64> = plan.v.iter().map(|v| -v).collect();
            consider(warm, &mut best_g, &mut best_value)?;

            // Piecewise-linear monopoly costs put optima on kinks where the
            // subgradient choice above is ambiguous; the exact epigraph LP
            // hands out consistent multipliers directly.
            if let CostModel::MonopolyIcx { theta } = model {
                if crate::costs::theta_is_piecewise_linear(theta, nu.dim()) {
                    let out = crate::costs::solve_monopoly_weak_lp(
                        theta,
                        &mu.points,
                        &mu.weights,
                        &nu.points,
                        &nu.weights,
                    )?;
                    consider(out.dual_g, &mut best_g, &mut best_value)?;
                }
            }

            // Stage 3: adaptive polish from the best candidate so far.
            let polish_opts = AscentOptions {
                max_iter: opts.ascent_iters / 4,
                patience: 40,
                step: StepRule::Adaptive,
                ..AscentOptions::default()
            };
            let (g, _) = concave_ascent(oracle, &best_g, &polish_opts)?;
            consider(g, &mut best_g, &mut best_value)?;
        }
    }

    let (dual_value, r_values, _) = dual_eval(model, mu, nu, &best_g)?;
    Ok(DualCertificate {
        g: best_g,
        r_values,
        dual_value,
        fingerprint,
    })
}

/// Gap between a primal solution and a dual certificate of the same instance.
pub fn duality_gap(sol: &Solution, cert: &DualCertificate) -> Result<GapReport> {
    if sol.fingerprint != cert.fingerprint {
        return Err(Error::FingerprintMismatch {
            left: sol.fingerprint.clone(),
            right: cert.fingerprint.clone(),
        });
    }
    let gap = sol.value - cert.dual_value;
    let rel_gap = gap / (1.0 + sol.value.abs());
    Ok(GapReport {
        primal: sol.value,
        dual: cert.dual_value,
        gap,
        rel_gap,
        passed: rel_gap <= 1e-5 && gap >= -1e-7,
    })
}

/// The kernel map of the backward representation:
/// `T(g)(x) = sup_p p(g) - C(x, p) = -rc(-g)(x)`, evaluated on the row atoms.
pub fn legendre_transfer(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    g: &[f64],
) -> Result<Vec<f64>> {
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut out = Vec::with_capacity(mu.len());
    for i in 0..mu.len() {
        let (r, _, _) = rc_transform_with_gap(model, mu, nu, &neg, i)?;
        out.push(-r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferVerdict {
    pub primal: f64,
    /// `sup_g nu(g) - mu(T(g))` at the ascent-optimized test function.
    pub transfer_value: f64,
    pub rel_diff: f64,
    pub passed: bool,
}

/// Check the backward-transfer representation: the supremum of
/// `nu(g) - mu(T(g))` over test functions recovers the primal value.
pub fn verify_transfer_representation(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolveOptions,
) -> Result<TransferVerdict> {
    let primal = solve_primal(model, mu, nu, opts)?;
    let cert = solve_dual(model, mu, nu, opts)?;
    // The transfer test function is the negated dual vector; going through
    // legendre_transfer exercises the representation identity.
    let g: Vec<f64> = cert.g.iter().map(|v| -v).collect();
    let t = legendre_transfer(model, mu, nu, &g)?;
    let transfer_value = nu.integrate(|j| g[j]) - mu.integrate(|i| t[i]);
    let rel_diff = (primal.value - transfer_value).abs() / (1.0 + primal.value.abs());
    Ok(TransferVerdict {
        primal: primal.value,
        transfer_value,
        rel_diff,
        passed: rel_diff <= 1e-4,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerturbationRun {
    pub value: f64,
    pub w1_mu: f64,
    pub w1_nu: f64,
    pub downward_jump: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityReport {
    pub base_value: f64,
    pub scale: f64,
    pub lipschitz: f64,
    pub runs: Vec<PerturbationRun>,
    pub max_downward_jump: f64,
    /// `max(V - V' - L * drift, 0)` over runs; informational.
    pub max_excess: f64,
}

/// Re-solve under random weight perturbations of magnitude `<= scale` and
/// report how the value moves. Informational, not pass/fail.
#[allow(clippy::too_many_arguments)]
pub fn stability_probe(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    n_perturb: usize,
    scale: f64,
    lipschitz: f64,
    seed: u64,
    opts: &SolveOptions,
) -> Result<StabilityReport> {
    use rand::{Rng, SeedableRng};
    let base = solve_primal(model, mu, nu, opts)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut runs = Vec::with_capacity(n_perturb);
    let mut max_jump = 0.0_f64;
    let mut max_excess = 0.0_f64;
    for _ in 0..n_perturb {
        let perturb = |m: &DiscreteMeasure, rng: &mut rand_chacha::ChaCha8Rng| {
            let weights: Vec<f64> = m
                .weights
                .iter()
                .map(|w| (w + scale * rng.gen_range(-1.0..1.0)).max(1e-9))
                .collect();
            DiscreteMeasure::new(m.points.clone(), weights)
        };
        let mu2 = perturb(mu, &mut rng)?;
        let nu2 = perturb(nu, &mut rng)?;
        // Only weights moved, the supports did not, so index-based cost
        // models stay aligned.
        let value = solve_primal(model, &mu2, &nu2, opts)?.value;
        let w1_mu = wasserstein_1(mu, &mu2)?;
        let w1_nu = wasserstein_1(nu, &nu2)?;
        let downward_jump = (base.value - value).max(0.0);
        let excess = (base.value - value - lipschitz * (w1_mu + w1_nu)).max(0.0);
        max_jump = max_jump.max(downward_jump);
        max_excess = max_excess.max(excess);
        runs.push(PerturbationRun {
            value,
            w1_mu,
            w1_nu,
            downward_jump,
        });
    }
    Ok(StabilityReport {
        base_value: base.value,
        scale,
        lipschitz,
        runs,
        max_downward_jump: max_jump,
        max_excess,
    })
}
