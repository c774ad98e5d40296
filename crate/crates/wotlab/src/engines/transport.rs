//! Transport simplex: the linear-minimization oracle over the coupling
//! polytope. Returns a vertex together with certifying dual potentials.
//!
//! Classic MODI scheme — northwest-corner start, spanning-tree potentials,
//! lowest-index (Bland) pivoting — so runs are deterministic and cycle-free.

use crate::error::{Error, Result};
use crate::measures::{Coupling, DiscreteMeasure};

/// A vertex of the transport polytope with its certificate.
#[derive(Debug, Clone)]
pub struct TransportPlan {
    pub mass: Vec<Vec<f64>>,
    /// Row potentials: `u_i + v_j <= c_ij` with equality on the basis.
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub value: f64,
    pub pivots: usize,
    /// Basic cells (a spanning tree; includes degenerate zero-mass cells).
    pub basis: Vec<(usize, usize)>,
}

/// Which corner of the polytope to use as the initial vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StartVertex {
    #[default]
    NorthWest,
    /// Northwest rule with the column order reversed; a different vertex in
    /// general, used to probe optimizer uniqueness.
    SouthEast,
}

pub fn transport_lmo(
    cost: &[Vec<f64>],
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
) -> Result<Coupling> {
    let plan = transport_lmo_detailed(cost, &mu.weights, &nu.weights, StartVertex::NorthWest)?;
    Coupling::new(mu.clone(), nu.clone(), plan.mass)
}

pub fn transport_lmo_detailed(
    cost: &[Vec<f64>],
    row_w: &[f64],
    col_w: &[f64],
    start: StartVertex,
) -> Result<TransportPlan> {
    let m = row_w.len();
    let n = col_w.len();
    if cost.len() != m || cost.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch(format!("cost matrix must be {m}x{n}")));
    }
    let mut max_c = 0.0_f64;
    for row in cost {
        for &c in row {
            if !c.is_finite() {
                return Err(Error::NonFinite("transport cost entry".into()));
            }
            max_c = max_c.max(c.abs());
        }
    }
    let eps = 1e-12 * (1.0 + max_c);

    // Column permutation for the starting corner.
    let perm: Vec<usize> = match start {
        StartVertex::NorthWest => (0..n).collect(),
        StartVertex::SouthEast => (0..n).rev().collect(),
    };

    // Northwest-corner start: m + n - 1 basic cells forming a spanning tree.
    let mut mass = vec![vec![0.0; n]; m];
    let mut in_basis = vec![vec![false; n]; m];
    let mut basis: Vec<(usize, usize)> = Vec::with_capacity(m + n - 1);
    {
        let mut ra = row_w.to_vec();
        let mut rb: Vec<f64> = perm.iter().map(|&j| col_w[j]).collect();
        let (mut i, mut k) = (0usize, 0usize);
        loop {
            let t = ra[i].min(rb[k]);
            let j = perm[k];
            mass[i][j] = t;
            in_basis[i][j] = true;
            basis.push((i, j));
            ra[i] -= t;
            rb[k] -= t;
            if i == m - 1 && k == n - 1 {
                break;
            }
            if (ra[i] <= rb[k] && i < m - 1) || k == n - 1 {
                i += 1;
            } else {
                k += 1;
            }
        }
    }

    let max_pivots = 2000 + 60 * m * n;
    let mut pivots = 0usize;
    loop {
        let (u, v) = potentials(cost, &basis, m, n)?;

        // Bland entering rule: lowest flattened index with negative reduced cost.
        let mut entering: Option<(usize, usize)> = None;
        'scan: for i in 0..m {
            for j in 0..n {
                if !in_basis[i][j] && cost[i][j] - u[i] - v[j] < -eps {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let value = basis
                .iter()
                .map(|&(i, j)| mass[i][j] * cost[i][j])
                .sum::<f64>();
            return Ok(TransportPlan {
                mass,
                u,
                v,
                value,
                pivots,
                basis,
            });
        };

        // Pivot along the unique tree cycle closed by the entering cell.
        let cycle = tree_cycle(&basis, m, n, ei, ej)?;
        let mut theta = f64::INFINITY;
        let mut leave: Option<(usize, usize)> = None;
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 1 {
                let cell_mass = mass[i][j];
                let better = cell_mass < theta - 1e-15
                    || (cell_mass < theta + 1e-15
                        && leave.map_or(true, |(li, lj)| (i, j) < (li, lj)));
                if better {
                    theta = cell_mass;
                    leave = Some((i, j));
                }
            }
        }
        let (li, lj) =
            leave.ok_or_else(|| Error::Internal("transport pivot without leaving cell".into()))?;
        for (k, &(i, j)) in cycle.iter().enumerate() {
            if k % 2 == 0 {
                mass[i][j] += theta;
            } else {
                mass[i][j] -= theta;
            }
        }
        mass[li][lj] = 0.0;
        in_basis[li][lj] = false;
        in_basis[ei][ej] = true;
        let pos = basis
            .iter()
            .position(|&c| c == (li, lj))
            .ok_or_else(|| Error::Internal("leaving cell not basic".into()))?;
        basis[pos] = (ei, ej);

        pivots += 1;
        if pivots > max_pivots {
            return Err(Error::CyclingGuard { pivots });
        }
    }
}

/// Solve `u_i + v_j = c_ij` over the basis tree, anchored at `u_0 = 0`.
fn potentials(
    cost: &[Vec<f64>],
    basis: &[(usize, usize)],
    m: usize,
    n: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut row_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j)) in basis.iter().enumerate() {
        row_adj[i].push(k);
        col_adj[j].push(k);
    }
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    // BFS over tree nodes; true = row node.
    let mut queue = std::collections::VecDeque::new();
    queue.push_back((true, 0usize));
    while let Some((is_row, idx)) = queue.pop_front() {
        let edges = if is_row { &row_adj[idx] } else { &col_adj[idx] };
        for &k in edges {
            let (i, j) = basis[k];
            if is_row && v[j].is_nan() {
                v[j] = cost[i][j] - u[i];
                queue.push_back((false, j));
            } else if !is_row && u[i].is_nan() {
                u[i] = cost[i][j] - v[j];
                queue.push_back((true, i));
            }
        }
    }
    if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
        return Err(Error::Internal("transport basis is not spanning".into()));
    }
    Ok((u, v))
}

/// The alternating cycle produced by adding cell `(ei, ej)` to the tree:
/// starts at the entering cell, alternates sign along the tree path from
/// column `ej` back to row `ei`.
fn tree_cycle(
    basis: &[(usize, usize)],
    m: usize,
    n: usize,
    ei: usize,
    ej: usize,
) -> Result<Vec<(usize, usize)>> {
    // Nodes: rows 0..m, columns m..m+n. Find the path ej-col -> ei-row.
    let total = m + n;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); total]; // (neighbor, basis idx)
    for (k, &(i, j)) in basis.iter().enumerate() {
        adj[i].push((m + j, k));
        adj[m + j].push((i, k));
    }
    let start = m + ej;
    let goal = ei;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; total];
    let mut seen = vec![false; total];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(start);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            break;
        }
        for &(next, k) in &adj[node] {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((node, k));
                queue.push_back(next);
            }
        }
    }
    if !seen[goal] {
        return Err(Error::Internal("transport tree disconnected".into()));
    }
    let mut cells = vec![(ei, ej)];
    let mut node = goal;
    while node != start {
        let (prev, k) = parent[node]
            .ok_or_else(|| Error::Internal("broken tree path".into()))?;
        cells.push(basis[k]);
        node = prev;
    }
    Ok(cells)
}

/// Pairwise cost matrix `f(x_i, y_j)` between the supports.
pub fn cost_matrix(
    mu: &DiscreteMeasure,
    nu: &DiscreteMeasure,
    f: impl Fn(&crate::measures::Point, &crate::measures::Point) -> f64,
) -> Vec<Vec<f64>> {
    mu.points
        .iter()
        .map(|x| nu.points.iter().map(|y| f(x, y)).collect())
        .collect()
}

/// Squared Euclidean distances between supports.
pub fn squared_distance_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<Vec<f64>> {
    cost_matrix(mu, nu, |x, y| x.sub(y).norm_sq())
}

/// Euclidean distances between supports.
pub fn distance_cost(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Vec<Vec<f64>> {
    cost_matrix(mu, nu, |x, y| x.sub(y).norm())
}

/// 1-Wasserstein distance via the transport simplex.
pub fn wasserstein_1(mu: &DiscreteMeasure, nu: &DiscreteMeasure) -> Result<f64> {
    let plan = transport_lmo_detailed(
        &distance_cost(mu, nu),
        &mu.weights,
        &nu.weights,
        StartVertex::NorthWest,
    )?;
    Ok(plan.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::DiscreteMeasure;

    fn check_certificate(cost: &[Vec<f64>], plan: &TransportPlan) {
        let max_c = cost
            .iter()
            .flatten()
            .fold(0.0_f64, |s, v| s.max(v.abs()));
        for (i, row) in cost.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                assert!(
                    plan.u[i] + plan.v[j] <= c + 1e-9 * (1.0 + max_c),
                    "dual feasibility broken at ({i},{j})"
                );
                if plan.mass[i][j] > 1e-12 {
                    assert!(
                        (plan.u[i] + plan.v[j] - c).abs() <= 1e-9 * (1.0 + max_c),
                        "no equality on support at ({i},{j})"
                    );
                }
            }
        }
    }

    #[test]
    fn single_row_is_forced() {
        let plan = transport_lmo_detailed(
            &[vec![3.0, 1.0, 2.0]],
            &[1.0],
            &[0.2, 0.5, 0.3],
            StartVertex::NorthWest,
        )
        .unwrap();
        assert_eq!(plan.mass[0], vec![0.2, 0.5, 0.3]);
        check_certificate(&[vec![3.0, 1.0, 2.0]], &plan);
    }

    #[test]
    fn sorted_quadratic_cost_gives_monotone_plan() {
        // 1D quadratic cost with sorted atoms and uniform marginals: the
        // monotone (northwest) plan is optimal. Oracle: brute force over the
        // vertices of the 3x3 polytope via exhaustive basis enumeration is
        // overkill here; the northwest plan value is the known optimum
        // sum_i |x_i - y_i|^2 / 3.
        let xs = [0.0, 1.0, 2.0];
        let ys = [0.5, 1.5, 3.0];
        let cost: Vec<Vec<f64>> = xs
            .iter()
            .map(|x| ys.iter().map(|y| (x - y) * (x - y)).collect())
            .collect();
        let w = [1.0 / 3.0; 3];
        let plan = transport_lmo_detailed(&cost, &w, &w, StartVertex::NorthWest).unwrap();
        let expected: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - y) * (x - y) / 3.0)
            .sum();
        assert!((plan.value - expected).abs() < 1e-12);
        for i in 0..3 {
            assert!((plan.mass[i][i] - 1.0 / 3.0).abs() < 1e-12);
        }
        check_certificate(&cost, &plan);
    }

    #[test]
    fn zero_cost_gives_zero_value() {
        let cost = vec![vec![0.0; 3]; 2];
        let plan =
            transport_lmo_detailed(&cost, &[0.4, 0.6], &[0.3, 0.3, 0.4], StartVertex::NorthWest)
                .unwrap();
        assert_eq!(plan.value, 0.0);
        check_certificate(&cost, &plan);
    }

    #[test]
    fn agrees_with_dense_simplex_on_seeded_instances() {
        use crate::engines::simplex::{simplex_solve, Constraint, LinearProgram, Sense};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let m = rng.gen_range(2..6);
            let n = rng.gen_range(2..6);
            let cost: Vec<Vec<f64>> = (0..m)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..5.0)).collect())
                .collect();
            let mut a: Vec<f64> = (0..m).map(|_| rng.gen_range(0.1..1.0)).collect();
            let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
            let ta: f64 = a.iter().sum();
            let tb: f64 = b.iter().sum();
            a.iter_mut().for_each(|x| *x /= ta);
            b.iter_mut().for_each(|x| *x /= tb);

            let plan =
                transport_lmo_detailed(&cost, &a, &b, StartVertex::NorthWest).unwrap();
            check_certificate(&cost, &plan);

            // Cross-engine agreement with the dense simplex.
            let mut objective = Vec::with_capacity(m * n);
            for row in &cost {
                objective.extend_from_slice(row);
            }
            let mut constraints = Vec::new();
            for i in 0..m {
                let mut coeffs = vec![0.0; m * n];
                for j in 0..n {
                    coeffs[i * n + j] = 1.0;
                }
                constraints.push(Constraint::new(coeffs, Sense::Eq, a[i]));
            }
            for j in 0..n {
                let mut coeffs = vec![0.0; m * n];
                for i in 0..m {
                    coeffs[i * n + j] = 1.0;
                }
                constraints.push(Constraint::new(coeffs, Sense::Eq, b[j]));
            }
            let sol = simplex_solve(&LinearProgram::new(objective, constraints)).unwrap();
            assert!(
                (sol.objective - plan.value).abs() <= 1e-9 * (1.0 + plan.value.abs()),
                "trial {trial}: simplex {} vs transport {}",
                sol.objective,
                plan.value
            );
        }
    }

    #[test]
    fn southeast_start_reaches_the_same_value() {
        let mu = DiscreteMeasure::from_1d(&[(0.0, 0.3), (1.0, 0.7)]).unwrap();
        let nu = DiscreteMeasure::from_1d(&[(0.0, 0.5), (2.0, 0.5)]).unwrap();
        let cost = squared_distance_cost(&mu, &nu);
        let a = transport_lmo_detailed(&cost, &mu.weights, &nu.weights, StartVertex::NorthWest)
            .unwrap();
        let b = transport_lmo_detailed(&cost, &mu.weights, &nu.weights, StartVertex::SouthEast)
            .unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }
}
