//! Entropic transport: log-domain alternating marginal fitting, product-form
//! and pairwise-ratio optimality verifiers, and the constructive two-atom
//! improving perturbation used to refute optimality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{disintegrate, Coupling, DiscreteMeasure};

/// Entries of a coupling below this mass are treated as unsupported by the
/// product-form checks.
pub const SUPPORT_FLOOR: f64 = 1e-12;

/// Strictly positive reference joint with its derived conditionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReferenceJoint {
    /// Full joint, normalized to total mass one.
    pub gamma: Vec<Vec<f64>>,
    /// Row conditionals (each renormalized to a probability vector).
    pub rows: Vec<Vec<f64>>,
    /// First marginal of the joint.
    pub x_marginal: Vec<f64>,
}

impl ReferenceJoint {
    pub fn new(gamma: Vec<Vec<f64>>) -> Result<Self> {
        if gamma.is_empty() || gamma[0].is_empty() {
            return Err(Error::schema("gamma", "empty matrix"));
        }
        let n = gamma[0].len();
        let mut total = 0.0;
        for (i, row) in gamma.iter().enumerate() {
            if row.len() != n {
                return Err(Error::schema(
                    format!("gamma[{i}]"),
                    "ragged reference matrix",
                ));
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() || v <= 0.0 {
                    return Err(Error::schema(
                        format!("gamma[{i}][{j}]"),
                        "reference entries must be strictly positive",
                    ));
                }
                total += v;
            }
        }
        let gamma: Vec<Vec<f64>> = gamma
            .into_iter()
            .map(|row| row.into_iter().map(|v| v / total).collect())
            .collect();
        let x_marginal: Vec<f64> = gamma.iter().map(|row| row.iter().sum()).collect();
        let rows: Vec<Vec<f64>> = gamma
            .iter()
            .zip(&x_marginal)
            .map(|(row, &m)| row.iter().map(|v| v / m).collect())
            .collect();
        Ok(ReferenceJoint {
            gamma,
            rows,
            x_marginal,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.gamma.len(), self.gamma[0].len())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SinkhornResult {
    pub coupling: Coupling,
    /// Log potentials: `mass_ij = gamma_ij * exp(u_i + v_j)`.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub iterations: usize,
    pub marginal_err: f64,
    /// `H(pi | gamma)` at the returned coupling.
    pub value: f64,
    /// Dual objective after each sweep; nondecreasing. The relative entropy
    /// of the iterates themselves climbs toward the constrained minimum
    /// (each iterate projects the reference), so the monotone progress
    /// certificate is this trace, equivalently the decreasing suboptimality.
    pub dual_trace: Vec<f64>,
    pub converged: bool,
}

/// Minimize `H(pi | gamma)` over couplings of `(mu, nu)` by alternating
/// log-domain marginal fitting. Terminates when the sup-norm marginal error
/// drops below `tol`; exceeding `max_iter` is a non-convergence error.
pub fn sinkhorn(
    gamma: &ReferenceJoint,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    tol: f64,
    max_iter: usize,
) -> Result<SinkhornResult> {
    let (m, n) = gamma.shape();
    if mu.len() != m || nu.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "reference is {m}x{n}, marginals are {}x{}",
            mu.len(),
            nu.len()
        )));
    }
    if tol <= 0.0 {
        return Err(Error::schema("tol", "must be positive"));
    }
    let log_gamma: Vec<Vec<f64>> = gamma
        .gamma
        .iter()
        .map(|row| row.iter().map(|v| v.ln()).collect())
        .collect();
    let log_mu: Vec<f64> = mu.weights.iter().map(|w| w.ln()).collect();
    let log_nu: Vec<f64> = nu.weights.iter().map(|w| w.ln()).collect();

    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut dual_trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let dual_value = |u: &[f64], v: &[f64]| -> f64 {
        // mu(u) + nu(v) + 1 - total mass of gamma e^{u + v}.
        let mut mass = 0.0;
        for i in 0..m {
            for j in 0..n {
                mass += (log_gamma[i][j] + u[i] + v[j]).exp();
            }
        }
        mu.weights.iter().zip(u).map(|(w, ui)| w * ui).sum::<f64>()
            + nu.weights.iter().zip(v).map(|(w, vj)| w * vj).sum::<f64>()
            + 1.0
            - mass
    };

    for iter in 0..max_iter {
        for i in 0..m {
            u[i] = log_mu[i] - lse((0..n).map(|j| log_gamma[i][j] + v[j]));
        }
        for j in 0..n {
            v[j] = log_nu[j] - lse((0..m).map(|i| log_gamma[i][j] + u[i]));
        }
        iterations = iter + 1;
        dual_trace.push(dual_value(&u, &v));

        if marginal_error(&log_gamma, &u, &v, mu, nu) <= tol {
            converged = true;
            break;
        }
    }

    let marginal_err = marginal_error(&log_gamma, &u, &v, mu, nu);
    if !converged {
        return Err(Error::NonConvergence {
            what: "sinkhorn",
            detail: format!("marginal error {marginal_err:.3e} after {iterations} iterations"),
        });
    }
    let mass: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..n)
                .map(|j| (log_gamma[i][j] + u[i] + v[j]).exp())
                .collect()
        })
        .collect();
    let value: f64 = mass
        .iter()
        .zip(&gamma.gamma)
        .flat_map(|(mr, gr)| mr.iter().zip(gr))
        .map(|(&p, &g)| if p > 0.0 { p * (p / g).ln() } else { 0.0 })
        .sum();
    let coupling = Coupling {
        row_measure: mu.clone(),
        col_measure: nu.clone(),
        mass,
    };
    Ok(SinkhornResult {
        coupling,
        u,
        v,
        iterations,
        marginal_err,
        value,
        dual_trace,
        converged,
    })
}

fn lse(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn marginal_error(
    log_gamma: &[Vec<f64>],
    u: &[f64],
    v: &[f64],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> f64 {
    let m = u.len();
    let n = v.len();
    let mut err = 0.0_f64;
    for i in 0..m {
        let row: f64 = (0..n).map(|j| (log_gamma[i][j] + u[i] + v[j]).exp()).sum();
        err = err.max((row - mu.weights[i]).abs());
    }
    for j in 0..n {
        let col: f64 = (0..m).map(|i| (log_gamma[i][j] + u[i] + v[j]).exp()).sum();
        err = err.max((col - nu.weights[j]).abs());
    }
    err
}

/// `H(pi | gamma)` between a coupling's mass and a reference joint.
pub fn joint_relative_entropy(c: &Coupling, gamma: &ReferenceJoint) -> f64 {
    c.mass
        .iter()
        .zip(&gamma.gamma)
        .flat_map(|(mr, gr)| mr.iter().zip(gr))
        .map(|(&p, &g)| if p > 0.0 { p * (p / g).ln() } else { 0.0 })
        .sum()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProductFormReport {
    /// Max of the log cross-differences over supported entries.
    pub max_log_deviation: f64,
    /// Row factor per row atom (1 at the anchor row).
    pub f: Vec<f64>,
    /// Column factor per column atom.
    pub g: Vec<f64>,
    pub passed: bool,
}

/// Check whether `mass / gamma` factorizes as `f(x) g(y)` on the support:
/// log cross-differences against a supported anchor must vanish.
pub fn check_product_form(
    c: &Coupling,
    gamma: &ReferenceJoint,
    tol: f64,
) -> Result<ProductFormReport> {
    let (m, n) = gamma.shape();
    if c.rows() != m || c.cols() != n {
        return Err(Error::ShapeMismatch("coupling vs reference shape".into()));
    }
    let log_ratio = |i: usize, j: usize| -> Option<f64> {
        let mass = c.mass[i][j];
        if mass > SUPPORT_FLOOR {
            Some((mass / gamma.gamma[i][j]).ln())
        } else {
            None
        }
    };
    let mut anchor = None;
    'outer: for i in 0..m {
        for j in 0..n {
            if log_ratio(i, j).is_some() {
                anchor = Some((i, j));
                break 'outer;
            }
        }
    }
    let Some((ai, aj)) = anchor else {
        return Err(Error::ShapeMismatch("coupling has empty support".into()));
    };
    let d_anchor = log_ratio(ai, aj).unwrap();
    let mut max_dev = 0.0_f64;
    for i in 0..m {
        for j in 0..n {
            let (Some(dij), Some(dia), Some(daj)) =
                (log_ratio(i, j), log_ratio(i, aj), log_ratio(ai, j))
            else {
                continue;
            };
            max_dev = max_dev.max((dij - dia - daj + d_anchor).abs());
        }
    }
    let f: Vec<f64> = (0..m)
        .map(|i| log_ratio(i, aj).map_or(f64::NAN, |d| (d - d_anchor).exp()))
        .collect();
    let g: Vec<f64> = (0..n)
        .map(|j| log_ratio(ai, j).map_or(f64::NAN, |d| d.exp()))
        .collect();
    Ok(ProductFormReport {
        max_log_deviation: max_dev,
        f,
        g,
        passed: max_dev <= tol,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioPair {
    pub row_a: usize,
    pub row_b: usize,
    /// Proportionality constant between the two density vectors.
    pub alpha: f64,
    pub max_relative_deviation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RatioVerdict {
    pub passed: bool,
    pub pairs: Vec<RatioPair>,
    pub worst: f64,
}

/// For every pair of rows, the conditional densities against the reference
/// conditionals must be proportional. Equivalent to the product-form check
/// but reported pairwise with the constant.
pub fn pairwise_ratio_check(
    c: &Coupling,
    gamma: &ReferenceJoint,
    tol: f64,
) -> Result<RatioVerdict> {
    let (m, n) = gamma.shape();
    if c.rows() != m || c.cols() != n {
        return Err(Error::ShapeMismatch("coupling vs reference shape".into()));
    }
    let kernel = disintegrate(c);
    let densities: Vec<Vec<f64>> = kernel
        .rows
        .iter()
        .zip(&gamma.rows)
        .map(|(k, g)| k.iter().zip(g).map(|(a, b)| a / b).collect())
        .collect();
    let mut pairs = Vec::new();
    let mut worst = 0.0_f64;
    for a in 0..m {
        for b in (a + 1)..m {
            let (da, db) = (&densities[a], &densities[b]);
            let j0 = (0..db.len())
                .max_by(|&x, &y| db[x].partial_cmp(&db[y]).unwrap())
                .unwrap();
            if db[j0] <= 0.0 {
                continue;
            }
            let alpha = da[j0] / db[j0];
            let mut dev = 0.0_f64;
            for (x, y) in da.iter().zip(db) {
                let scale = x.abs().max((alpha * y).abs()).max(1e-30);
                dev = dev.max((x - alpha * y).abs() / scale);
            }
            worst = worst.max(dev);
            pairs.push(RatioPair {
                row_a: a,
                row_b: b,
                alpha,
                max_relative_deviation: dev,
            });
        }
    }
    Ok(RatioVerdict {
        passed: worst <= tol,
        pairs,
        worst,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Perturbation {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    /// Strict decrease of `H(.|gamma1) + H(.|gamma2)` achieved by the move.
    pub decrease: f64,
    /// Atom giving up mass in `q1` and the atom receiving it.
    pub from: usize,
    pub to: usize,
}

/// Constructive refutation of pairwise optimality. Given strictly positive
/// laws whose densities `p_i / gamma_i` are not proportional, moves mass `t`
/// between the extreme-ratio atoms (preserving `q1 + q2 = p1 + p2`) and
/// line-searches `t` for a strict decrease of the entropy sum. Returns
/// `None` when the densities are proportional within 1 + 1e-10.
pub fn improving_perturbation(
    p1: &[f64],
    p2: &[f64],
    gamma1: &[f64],
    gamma2: &[f64],
) -> Option<Perturbation> {
    let n = p1.len();
    assert!(
        p2.len() == n && gamma1.len() == n && gamma2.len() == n,
        "perturbation inputs must share one support"
    );
    debug_assert!(
        p1.iter()
            .chain(p2)
            .chain(gamma1)
            .chain(gamma2)
            .all(|&v| v > 0.0),
        "perturbation inputs must be strictly positive"
    );
    // h = (p1/gamma1) / (p2/gamma2); proportional iff h is constant.
    let h: Vec<f64> = (0..n)
        .map(|j| (p1[j] / gamma1[j]) / (p2[j] / gamma2[j]))
        .collect();
    let (mut amin, mut amax) = (0usize, 0usize);
    for j in 1..n {
        if h[j] < h[amin] {
            amin = j;
        }
        if h[j] > h[amax] {
            amax = j;
        }
    }
    if h[amax] / h[amin] <= 1.0 + 1e-10 {
        return None;
    }
    // Move mass into the low-ratio atom of p1 from the high-ratio atom: the
    // derivative at t = 0 is log h_a - log h_b < 0.
    let (a, b) = (amin, amax);
    let t_max = p1[b].min(p2[a]);
    let entropy_sum = |t: f64| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            let shift = if j == a {
                t
            } else if j == b {
                -t
            } else {
                0.0
            };
            let q1j = p1[j] + shift;
            let q2j = p2[j] - shift;
            s += if q1j > 0.0 {
                q1j * (q1j / gamma1[j]).ln()
            } else {
                0.0
            };
            s += if q2j > 0.0 {
                q2j * (q2j / gamma2[j]).ln()
            } else {
                0.0
            };
        }
        s
    };
    let base = entropy_sum(0.0);
    // Ternary search on the strictly convex section.
    let (mut lo, mut hi) = (0.0_f64, t_max);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if entropy_sum(m1) <= entropy_sum(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t = 0.5 * (lo + hi);
    let decrease = base - entropy_sum(t);
    if !(decrease > 0.0) {
        // Strictly positive non-proportional pairs always admit a strict
        // improvement; reaching this means the ratio spread was borderline.
        return None;
    }
    let mut q1 = p1.to_vec();
    let mut q2 = p2.to_vec();
    q1[a] += t;
    q1[b] -= t;
    q2[a] -= t;
    q2[b] += t;
    Some(Perturbation {
        q1,
        q2,
        decrease,
        from: b,
        to: a,
    })
}
