//! Quadratic projection onto the convex-order lower set: solve the
//! barycentric weak problem, read off the optimal barycenter map and the
//! projected measure, and verify the cycle conditions that characterize
//! graphs of Lipschitz convex gradients.

use serde::{Deserialize, Serialize};

use crate::costs::CostModel;
use crate::engines::{squared_distance_cost, transport_lmo_detailed, StartVertex};
use crate::error::{Error, Result};
use crate::measures::{barycenter_map, Coupling, DiscreteMeasure, Point};
use crate::orders::{check_convex_order, OrderOutcome};
use crate::wot::{solve_primal, SolveOptions};

/// Atoms of the projected measure are merged at this tolerance before the
/// order validation (distinct rows may share one barycenter).
pub const ETA_MERGE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BsSolution {
    /// Optimal squared quadratic projection distance.
    pub value: f64,
    pub coupling: Coupling,
    /// `(x_i, T(x_i))` with `T` the row barycenter map.
    pub map_graph: Vec<(Point, Point)>,
    /// Pushforward of `mu` under `T`, atoms merged.
    pub eta_star: DiscreteMeasure,
    pub fw_gap: f64,
}

/// Solve `inf over couplings of integral |x - barycenter(pi_x)|^2 dmu` and
/// derive the map, the projected measure, and its order validation.
///
/// Two built-in cross-checks run before returning: the projected measure
/// must be convex-order dominated by `nu`, and the value must agree with the
/// squared quadratic transport distance to the projected measure.
pub fn solve_v2(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    opts: &SolveOptions,
) -> Result<BsSolution> {
    let sol = solve_primal(&CostModel::Barycentric, mu, nu, opts)?;
    let barycenters = barycenter_map(&sol.coupling);
    let map_graph: Vec<(Point, Point)> = mu
        .points
        .iter()
        .cloned()
        .zip(barycenters.iter().cloned())
        .collect();
    let eta_star = DiscreteMeasure::with_merge_tol(
        barycenters,
        mu.weights.clone(),
        ETA_MERGE_TOL,
        "eta_star",
    )?;

    match check_convex_order(&eta_star, nu)? {
        OrderOutcome::Holds(_) => {}
        OrderOutcome::Inconclusive { .. } => {}
        OrderOutcome::Fails(cert) => {
            return Err(Error::Internal(format!(
                "projected measure escapes the convex-order lower set (margin {:.3e})",
                cert.margin
            )));
        }
    }

    // The map coupling attains the squared quadratic distance to eta_star.
    let w2 = transport_lmo_detailed(
        &squared_distance_cost(mu, &eta_star),
        &mu.weights,
        &eta_star.weights,
        StartVertex::NorthWest,
    )?;
    if (w2.value - sol.value).abs() > 1e-6 * (1.0 + sol.value.abs()) {
        return Err(Error::Internal(format!(
            "projection value {:.9} disagrees with the transport distance {:.9}",
            sol.value, w2.value
        )));
    }

    Ok(BsSolution {
        value: sol.value,
        coupling: sol.coupling,
        map_graph,
        eta_star,
        fw_gap: sol.fw_gap,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RsVerdict {
    pub pairwise_ok: bool,
    /// `(i, j, defect)` of the worst pair; positive defects are violations.
    pub worst_pair: (usize, usize, f64),
    pub cycles_ok: bool,
    /// Worst cycle and its signed sum (positive = violation).
    pub worst_cycle: (Vec<usize>, f64),
    pub cycles_checked: usize,
}

/// Check a graph of points for the cycle inequalities characterizing
/// gradients of convex functions with `L`-Lipschitz gradient:
/// `sum (x_{i+1} - x_i) . y_i + |y_{i+1} - y_i|^2 / (2L) <= 0` around every
/// cycle (the pair case reduces to
/// `(x - x') . (y - y') >= |y - y'|^2 / L`).
pub fn check_rockafellar_strassen(
    graph: &[(Point, Point)],
    lipschitz: f64,
    cycle_len: usize,
    n_trials: usize,
    seed: u64,
    tol: f64,
) -> Result<RsVerdict> {
    use rand::{Rng, SeedableRng};
    if graph.is_empty() {
        return Err(Error::ShapeMismatch("empty graph".into()));
    }
    if lipschitz <= 0.0 {
        return Err(Error::ShapeMismatch("lipschitz constant must be > 0".into()));
    }
    let n = graph.len();

    // Pairwise reduction, exhaustive.
    let mut worst_pair = (0usize, 0usize, f64::NEG_INFINITY);
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = graph[i].0.sub(&graph[j].0);
            let dy = graph[i].1.sub(&graph[j].1);
            let defect = dy.norm_sq() / lipschitz - dx.dot(&dy);
            if defect > worst_pair.2 {
                worst_pair = (i, j, defect);
            }
        }
    }
    let pairwise_ok = worst_pair.2 <= tol;

    // Cycle sums; exhaustive for small graphs, sampled otherwise.
    let cycle_sum = |cycle: &[usize]| -> f64 {
        let len = cycle.len();
        let mut sum = 0.0;
        for k in 0..len {
            let (xi, yi) = &graph[cycle[k]];
            let (xn, yn) = &graph[cycle[(k + 1) % len]];
            sum += xn.sub(xi).dot(yi) + yn.sub(yi).norm_sq() / (2.0 * lipschitz);
        }
        sum
    };
    let mut worst_cycle = (Vec::new(), f64::NEG_INFINITY);
    let mut checked = 0usize;
    let visit = |cycle: &[usize], worst: &mut (Vec<usize>, f64), checked: &mut usize| {
        *checked += 1;
        let s = cycle_sum(cycle);
        if s > worst.1 {
            *worst = (cycle.to_vec(), s);
        }
    };
    if n <= 7 {
        // All cyclic sequences up to the cap, anchored at their smallest
        // element to skip rotations.
        let max_len = cycle_len.min(n).max(2);
        let mut stack: Vec<usize> = Vec::new();
        fn rec(
            n: usize,
            max_len: usize,
            stack: &mut Vec<usize>,
            visit: &mut impl FnMut(&[usize]),
        ) {
            if stack.len() >= 2 {
                visit(stack);
            }
            if stack.len() == max_len {
                return;
            }
            let anchor = stack.first().copied().unwrap_or(0);
            let start = anchor + 1;
            for next in start..n {
                if stack.contains(&next) {
                    continue;
                }
                stack.push(next);
                rec(n, max_len, stack, visit);
                stack.pop();
            }
        }
        for anchor in 0..n {
            stack.push(anchor);
            rec(n, max_len, &mut stack, &mut |cycle| {
                visit(cycle, &mut worst_cycle, &mut checked)
            });
            stack.pop();
        }
    } else {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..n_trials {
            let len = rng.gen_range(2..=cycle_len.min(n).max(2));
            let mut idx: Vec<usize> = (0..n).collect();
            for pick in 0..len {
                let swap = rng.gen_range(pick..n);
                idx.swap(pick, swap);
            }
            visit(&idx[..len], &mut worst_cycle, &mut checked);
        }
    }
    let cycles_ok = worst_cycle.1 <= tol;

    Ok(RsVerdict {
        pairwise_ok,
        worst_pair,
        cycles_ok,
        worst_cycle,
        cycles_checked: checked,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    /// No two graph points share an `x` with different `y`.
    pub single_valued: bool,
    /// Empirical `max |y - y'| / |x - x'|` over distinct-x pairs.
    pub lipschitz_constant: f64,
    /// `min (x - x') . (y - y')`; nonnegative means monotone.
    pub monotonicity_defect: f64,
    pub pairs_checked: usize,
}

/// Empirical single-valuedness, Lipschitz constant and monotonicity of a
/// graph of points.
pub fn lipschitz_monotone_probe(graph: &[(Point, Point)]) -> Result<LipschitzReport> {
    if graph.is_empty() {
        return Err(Error::ShapeMismatch("empty graph".into()));
    }
    let n = graph.len();
    let mut single_valued = true;
    let mut lipschitz: f64 = 0.0;
    let mut monotone: f64 = f64::INFINITY;
    let mut pairs = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let dx = graph[i].0.sub(&graph[j].0);
            let dy = graph[i].1.sub(&graph[j].1);
            let ndx = dx.norm();
            let ndy = dy.norm();
            pairs += 1;
            if ndx <= 1e-10 {
                if ndy > 1e-10 {
                    single_valued = false;
                }
                continue;
            }
            lipschitz = lipschitz.max(ndy / ndx);
            monotone = monotone.min(dx.dot(&dy));
        }
    }
    if !monotone.is_finite() {
        monotone = 0.0;
    }
    Ok(LipschitzReport {
        single_valued,
        lipschitz_constant: lipschitz,
        monotonicity_defect: monotone,
        pairs_checked: pairs,
    })
}
