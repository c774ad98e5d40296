//! Monotonicity of couplings under mass redistribution: optimal
//! redistribution over finite pair collections, subset-sampling checks for
//! couplings, and the classical cyclical special case.
//!
//! The redistribution problem is exact on the pooled support: feasible laws
//! satisfy `q_k <= sum_k p_k` pointwise, so nothing lives off that support.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::costs::{eval_cost, first_variation, CostModel};
use crate::engines::{frank_wolfe, FwOptions, LineSearch, StartVertex};
use crate::error::{Error, Result};
use crate::measures::{disintegrate, Coupling, DiscreteMeasure};

/// A finite family `(x_k, p_k)` with laws over the column support.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairSet {
    /// Row-atom index and law over the full column support, per pair.
    pub pairs: Vec<(usize, Vec<f64>)>,
}

impl PairSet {
    pub fn new(pairs: Vec<(usize, Vec<f64>)>) -> Self {
        PairSet { pairs }
    }

    /// Pooled mass `sum_k p_k` (total mass = number of pairs).
    pub fn pooled(&self) -> Vec<f64> {
        let n = self.pairs[0].1.len();
        let mut pooled = vec![0.0; n];
        for (_, p) in &self.pairs {
            for (o, v) in pooled.iter_mut().zip(p) {
                *o += v;
            }
        }
        pooled
    }

    pub fn from_coupling_rows(c: &Coupling, rows: &[usize]) -> Self {
        let kernel = disintegrate(c);
        PairSet {
            pairs: rows.iter().map(|&i| (i, kernel.rows[i].clone())).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RedistributeOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for RedistributeOptions {
    fn default() -> Self {
        RedistributeOptions {
            rel_tol: 1e-9,
            max_iter: 50_000,
        }
    }
}

/// Minimize `sum_k C(x_k, q_k)` over laws with `sum_k q_k = sum_k p_k`.
///
/// The feasible set is a transport polytope after scaling: rows of unit mass
/// per pair against the pooled column masses. Solved by the same Frank-Wolfe
/// driver as the main problem.
pub fn redistribute_optimal(
    model: &CostModel,
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    pairs: &PairSet,
    opts: &RedistributeOptions,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let k = pairs.pairs.len();
    if k == 0 {
        return Err(Error::ShapeMismatch("empty pair set".into()));
    }
    let n_full = nu.len();
    for (idx, (x_index, p)) in pairs.pairs.iter().enumerate() {
        if *x_index >= mu.len() || p.len() != n_full {
            return Err(Error::ShapeMismatch(format!("pair {idx} out of range")));
        }
    }
    let pooled = pairs.pooled();
    // Restrict to the pooled support; off-support coordinates are forced to
    // zero by the pooled-sum constraint.
    let support: Vec<usize> = (0..n_full).filter(|&j| pooled[j] > 1e-15).collect();
    let ns = support.len();
    if ns == 0 {
        return Err(Error::ShapeMismatch("pair set carries no mass".into()));
    }

    if k == 1 {
        // Nothing to redistribute.
        let (x_index, p) = &pairs.pairs[0];
        let value = eval_cost(model, mu, nu, *x_index, p);
        return Ok((vec![p.clone()], value));
    }

    if let CostModel::MonopolyIcx { theta } = model {
        // Piecewise-linear objectives are exact epigraph programs; the
        // Frank-Wolfe path below would stall on their kinks.
        if crate::costs::theta_is_piecewise_linear(theta, nu.dim()) {
            let scale = k as f64;
            let xs: Vec<_> = pairs
                .pairs
                .iter()
                .map(|(i, _)| mu.points[*i].clone())
                .collect();
            let row_w = vec![1.0 / scale; k];
            let ys: Vec<_> = support.iter().map(|&j| nu.points[j].clone()).collect();
            let col_w: Vec<f64> = support.iter().map(|&j| pooled[j] / scale).collect();
            let out = crate::costs::solve_monopoly_weak_lp(theta, &xs, &row_w, &ys, &col_w)?;
            let mut qs = Vec::with_capacity(k);
            for row in &out.mass {
                let mut q = vec![0.0; n_full];
                for (s, &j) in support.iter().enumerate() {
                    q[j] = (row[s] * scale).max(0.0);
                }
                qs.push(q);
            }
            return Ok((qs, out.value * scale));
        }
    }

    let row_w = vec![1.0 / k as f64; k];
    let col_w: Vec<f64> = support.iter().map(|&j| pooled[j] / k as f64).collect();
    // Synthetic marginals for the driver; the row "points" are placeholders
    // (the oracle only looks at indices).
    let rows_measure = DiscreteMeasure {
        points: (0..k)
            .map(|i| crate::measures::Point::from(i as f64))
            .collect(),
        weights: row_w,
    };
    let cols_measure = DiscreteMeasure {
        points: support
            .iter()
            .map(|&j| nu.points[j].clone())
            .collect(),
        weights: col_w,
    };

    let scale = k as f64;
    let x_of: Vec<usize> = pairs.pairs.iter().map(|(x, _)| *x).collect();
    let oracle = |mass: &[f64]| {
        let mut value = 0.0;
        let mut grad = vec![0.0; k * ns];
        let mut q = vec![0.0; n_full];
        for (kk, &x_index) in x_of.iter().enumerate() {
            q.iter_mut().for_each(|v| *v = 0.0);
            for (s, &j) in support.iter().enumerate() {
                q[j] = mass[kk * ns + s] * scale;
            }
            value += eval_cost(model, mu, nu, x_index, &q);
            let fv = first_variation(model, mu, nu, x_index, &q);
            for (s, &j) in support.iter().enumerate() {
                grad[kk * ns + s] = fv[j] * scale;
            }
        }
        (value, grad)
    };
    let fw_opts = FwOptions {
        max_iter: opts.max_iter,
        rel_tol: opts.rel_tol,
        line_search: match model {
            CostModel::Classical { .. } | CostModel::Barycentric => LineSearch::ExactQuadratic,
            _ => LineSearch::Armijo,
        },
        start: StartVertex::NorthWest,
    };
    let res = frank_wolfe(oracle, &rows_measure, &cols_measure, &fw_opts)?;
    let mut qs = Vec::with_capacity(k);
    for kk in 0..k {
        let mut q = vec![0.0; n_full];
        for (s, &j) in support.iter().enumerate() {
            q[j] = res.coupling.mass[kk][s] * scale;
        }
        qs.push(q);
    }
    Ok((qs, res.value))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityWitness {
    /// Row indices of the violating family.
    pub rows: Vec<usize>,
    /// Redistributed laws achieving the improvement.
    pub q: Vec<Vec<f64>>,
    pub improvement: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonotonicityVerdict {
    pub passed: bool,
    /// Max over checked subsets of (current cost - optimal redistribution).
    pub worst_violation: f64,
    pub witness: Option<MonotonicityWitness>,
    pub subsets_checked: usize,
}

/// Check a coupling for stability under redistributions: samples subsets of
/// rows of sizes `2..=k_max` (all pairs exhaustively when the coupling has at
/// most 12 rows) and redistributes each.
#[allow(clippy::too_many_arguments)]
pub fn check_c_monotone(
    model: &CostModel,
    c: &Coupling,
    k_max: usize,
    n_trials: usize,
    seed: u64,
    tol: f64,
    opts: &RedistributeOptions,
) -> Result<MonotonicityVerdict> {
    let mu = &c.row_measure;
    let nu = &c.col_measure;
    let m = c.rows();
    let kernel = disintegrate(c);

    let mut subsets: Vec<Vec<usize>> = Vec::new();
    if m <= 12 {
        for i in 0..m {
            for j in (i + 1)..m {
                subsets.push(vec![i, j]);
            }
        }
    }
    // Derived per-trial seeds keep the sample set independent of execution
    // order.
    for trial in 0..n_trials {
        let trial_seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let lo = if m <= 12 { 3 } else { 2 };
        let hi = k_max.max(2).min(m);
        if lo > hi {
            break;
        }
        let size = rng.gen_range(lo..=hi);
        let mut rows: Vec<usize> = (0..m).collect();
        for pick in 0..size {
            let swap = rng.gen_range(pick..m);
            rows.swap(pick, swap);
        }
        let mut subset = rows[..size].to_vec();
        subset.sort_unstable();
        subsets.push(subset);
    }

    let mut worst = f64::NEG_INFINITY;
    let mut witness: Option<MonotonicityWitness> = None;
    let mut checked = 0usize;
    for rows in &subsets {
        if rows.len() < 2 {
            continue;
        }
        let pairs = PairSet {
            pairs: rows.iter().map(|&i| (i, kernel.rows[i].clone())).collect(),
        };
        let current: f64 = rows
            .iter()
            .map(|&i| eval_cost(model, mu, nu, i, &kernel.rows[i]))
            .sum();
        let (q, optimal) = redistribute_optimal(model, mu, nu, &pairs, opts)?;
        checked += 1;
        let violation = current - optimal;
        if violation > worst {
            worst = violation;
            if violation > tol {
                witness = Some(MonotonicityWitness {
                    rows: rows.clone(),
                    q,
                    improvement: violation,
                });
            }
        }
    }
    Ok(MonotonicityVerdict {
        passed: worst <= tol,
        worst_violation: worst,
        witness,
        subsets_checked: checked,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CyclicalWitness {
    /// Support cells of the violating tuple.
    pub cells: Vec<(usize, usize)>,
    /// The permutation beating the identity assignment.
    pub sigma: Vec<usize>,
    pub improvement: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CyclicalVerdict {
    pub passed: bool,
    pub worst_violation: f64,
    pub witness: Option<CyclicalWitness>,
    pub tuples_checked: usize,
}

/// Classical cyclical check on the support of a coupling: for sampled tuples
/// of supported cells, no permutation of the targets may beat the identity
/// assignment. All permutations are enumerated for tuples of length <= 6.
#[allow(clippy::too_many_arguments)]
pub fn check_cyclical_monotone(
    cost: &[Vec<f64>],
    c: &Coupling,
    cycle_len: usize,
    n_trials: usize,
    seed: u64,
    tol: f64,
) -> Result<CyclicalVerdict> {
    let m = c.rows();
    let n = c.cols();
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("cost matrix shape".into()));
    }
    let mut support: Vec<(usize, usize)> = Vec::new();
    for (i, row) in c.mass.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            if v > 1e-12 {
                support.push((i, j));
            }
        }
    }
    let ns = support.len();
    let mut tuples: Vec<Vec<usize>> = Vec::new();
    // All pairs first; longer tuples by sampling.
    for a in 0..ns {
        for b in (a + 1)..ns {
            tuples.push(vec![a, b]);
        }
    }
    for trial in 0..n_trials {
        let trial_seed = seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(trial as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(trial_seed);
        let max_len = cycle_len.min(ns);
        if max_len < 3 {
            break;
        }
        let len = rng.gen_range(3..=max_len);
        let mut idx: Vec<usize> = (0..ns).collect();
        for pick in 0..len {
            let swap = rng.gen_range(pick..ns);
            idx.swap(pick, swap);
        }
        let mut tuple = idx[..len].to_vec();
        tuple.sort_unstable();
        tuples.push(tuple);
    }

    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    let mut checked = 0usize;
    for tuple in &tuples {
        let cells: Vec<(usize, usize)> = tuple.iter().map(|&t| support[t]).collect();
        let identity: f64 = cells.iter().map(|&(i, j)| cost[i][j]).sum();
        checked += 1;
        let len = cells.len();
        let mut eval_sigma = |sigma: &[usize]| {
            let permuted: f64 = cells
                .iter()
                .enumerate()
                .map(|(k, &(i, _))| cost[i][cells[sigma[k]].1])
                .sum();
            let violation = identity - permuted;
            if violation > worst {
                worst = violation;
                if violation > tol {
                    witness = Some(CyclicalWitness {
                        cells: cells.clone(),
                        sigma: sigma.to_vec(),
                        improvement: violation,
                    });
                }
            }
        };
        if len <= 6 {
            let mut sigma: Vec<usize> = (0..len).collect();
            permutations(&mut sigma, len, &mut eval_sigma);
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (checked as u64));
            let mut sigma: Vec<usize> = (0..len).collect();
            for _ in 0..64 {
                for k in 0..len {
                    let swap = rng.gen_range(k..len);
                    sigma.swap(k, swap);
                }
                eval_sigma(&sigma);
            }
        }
    }
    Ok(CyclicalVerdict {
        passed: worst <= tol,
        worst_violation: worst,
        witness,
        tuples_checked: checked,
    })
}

fn permutations(sigma: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k <= 1 {
        visit(sigma);
        return;
    }
    for i in 0..k {
        permutations(sigma, k - 1, visit);
        if k % 2 == 0 {
            sigma.swap(i, k - 1);
        } else {
            sigma.swap(0, k - 1);
        }
    }
}
