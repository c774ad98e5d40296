//! Small dense linear-algebra helpers for the optimization engines.

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
pub fn solve_dense(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    debug_assert!(a.len() == n && a.iter().all(|r| r.len() == n));
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .zip(b)
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();

    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if m[pivot][col].abs() < 1e-12 {
            return None;
        }
        m.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = m[row][col] / m[col][col];
                if f != 0.0 {
                    for k in col..=n {
                        m[row][k] -= f * m[col][k];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

/// Min-norm-ish solve of a (possibly singular) symmetric system via
/// ridge-damped normal equations; returns the solution and the residual
/// sup-norm of the original system.
pub fn solve_kkt_ridge(a: &[Vec<f64>], b: &[f64]) -> Option<(Vec<f64>, f64)> {
    let n = b.len();
    let mut ata = vec![vec![0.0; n]; n];
    let mut atb = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[k][i] * a[k][j];
            }
            ata[i][j] = acc;
        }
        let mut acc = 0.0;
        for k in 0..n {
            acc += a[k][i] * b[k];
        }
        atb[i] = acc;
    }
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += 1e-12;
    }
    let x = solve_dense(&ata, &atb)?;
    let mut residual = 0.0_f64;
    for i in 0..n {
        let mut acc = 0.0;
        for j in 0..n {
            acc += a[i][j] * x[j];
        }
        residual = residual.max((acc - b[i]).abs());
    }
    Some((x, residual))
}
