//! Generic concave maximization from value/supergradient oracles.

use crate::error::{Error, Result};

/// How proposed steps are sized.
#[derive(Debug, Clone, Copy)]
pub enum StepRule {
    /// Steps `a / (k + b)`; `a` defaults to a first-iteration Armijo probe.
    Diminishing { a: Option<f64>, b: f64 },
    /// Multiplicative step control: grow on accepted steps, shrink on
    /// rejections. Converges much faster on smooth objectives.
    Adaptive,
}

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Terminate once the best value stops improving by more than
    /// `value_tol * (1 + |value|)` over `patience` iterations.
    pub value_tol: f64,
    /// Terminate when the proposed step moves by less than
    /// `step_tol * (1 + |g|)`.
    pub step_tol: f64,
    pub patience: usize,
    pub step: StepRule,
}

impl Default for AscentOptions {
    fn default() -> Self {
        AscentOptions {
            max_iter: 50_000,
            value_tol: 1e-12,
            step_tol: 1e-14,
            patience: 400,
            step: StepRule::Diminishing { a: None, b: 10.0 },
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximize a concave function. The oracle returns the value and a
/// supergradient; the value sequence across accepted steps is nondecreasing
/// and the best iterate is returned.
pub fn concave_ascent(
    mut oracle: impl FnMut(&[f64]) -> (f64, Vec<f64>),
    start: &[f64],
    opts: &AscentOptions,
) -> Result<(Vec<f64>, f64)> {
    let mut g = start.to_vec();
    let (mut value, mut supergrad) = checked(&mut oracle, &g)?;
    let mut best = (g.clone(), value);

    let grad_norm = norm(&supergrad);
    if grad_norm <= opts.step_tol {
        return Ok(best);
    }

    // First-iteration Armijo probe for the base step length.
    let mut step = match opts.step {
        StepRule::Diminishing { a: Some(a), .. } => a,
        _ => {
            let mut t = 1.0 / grad_norm.max(1e-12);
            let mut probe = vec![0.0; g.len()];
            let mut best_t = 0.0;
            let mut best_v = value;
            for _ in 0..60 {
                for ((p, gi), si) in probe.iter_mut().zip(&g).zip(&supergrad) {
                    *p = gi + t * si;
                }
                let (v, _) = checked(&mut oracle, &probe)?;
                if v > best_v {
                    best_v = v;
                    best_t = t;
                    t *= 2.0;
                } else if best_t == 0.0 {
                    t *= 0.5;
                    if t < 1e-18 {
                        break;
                    }
                } else {
                    break;
                }
            }
            if best_t == 0.0 {
                return Ok(best);
            }
            best_t
        }
    };

    let mut since_improvement = 0usize;
    let mut proposal = vec![0.0; g.len()];
    for k in 0..opts.max_iter {
        let t = match opts.step {
            StepRule::Diminishing { b, .. } => step * b / (k as f64 + b),
            StepRule::Adaptive => step,
        };
        let move_norm = t * norm(&supergrad);
        if move_norm <= opts.step_tol * (1.0 + norm(&g)) {
            break;
        }
        for ((p, gi), si) in proposal.iter_mut().zip(&g).zip(&supergrad) {
            *p = gi + t * si;
        }
        let (v, s) = checked(&mut oracle, &proposal)?;
        if v > value {
            g.copy_from_slice(&proposal);
            let improved = v - value > opts.value_tol * (1.0 + v.abs());
            value = v;
            supergrad = s;
            if value > best.1 {
                best = (g.clone(), value);
            }
            if let StepRule::Adaptive = opts.step {
                step *= 1.4;
            }
            if improved {
                since_improvement = 0;
            } else {
                since_improvement += 1;
            }
        } else {
            if let StepRule::Adaptive = opts.step {
                step *= 0.5;
            }
            since_improvement += 1;
        }
        if since_improvement > opts.patience {
            break;
        }
    }
    Ok(best)
}

/// Monotone fixed-point iteration `g <- update(g)` for block-exact ascent
/// schemes whose update is available in closed form. Stops when the value
/// gain and the iterate movement both fall below `tol`.
pub fn fixed_point_ascent(
    mut value_of: impl FnMut(&[f64]) -> f64,
    mut update: impl FnMut(&[f64]) -> Vec<f64>,
    start: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<(Vec<f64>, f64, usize)> {
    let mut g = start.to_vec();
    let mut value = value_of(&g);
    if !value.is_finite() {
        return Err(Error::NonFinite("fixed-point ascent start".into()));
    }
    for iter in 0..max_iter {
        let next = update(&g);
        let next_value = value_of(&next);
        if !next_value.is_finite() {
            return Err(Error::NonFinite("fixed-point ascent update".into()));
        }
        let moved = g
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0_f64, f64::max);
        let gained = next_value - value;
        if next_value >= value {
            g = next;
            value = next_value;
        }
        if gained.abs() <= tol * (1.0 + value.abs()) && moved <= tol * 10.0 {
            return Ok((g, value, iter + 1));
        }
    }
    Ok((g, value, max_iter))
}

fn checked(
    oracle: &mut impl FnMut(&[f64]) -> (f64, Vec<f64>),
    g: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (v, s) = oracle(g);
    if !v.is_finite() || s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("concave ascent oracle".into()));
    }
    Ok((v, s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl_converges() {
        // f(g) = -|g|^2 from g = 1 converges to value 0 within 1e-6.
        let oracle = |g: &[f64]| {
            let v = -g.iter().map(|x| x * x).sum::<f64>();
            let s = g.iter().map(|x| -2.0 * x).collect();
            (v, s)
        };
        let (g, v) = concave_ascent(oracle, &[1.0], &AscentOptions::default()).unwrap();
        assert!(v > -1e-6, "value {v} at {g:?}");

        let adaptive = AscentOptions {
            step: StepRule::Adaptive,
            ..AscentOptions::default()
        };
        let (_, v) = concave_ascent(oracle, &[1.0], &adaptive).unwrap();
        assert!(v > -1e-12, "adaptive value {v}");
    }

    #[test]
    fn constant_function_terminates_immediately() {
        let oracle = |g: &[f64]| (42.0, vec![0.0; g.len()]);
        let (_, v) = concave_ascent(oracle, &[3.0, -1.0], &AscentOptions::default()).unwrap();
        assert_eq!(v, 42.0);
    }

    #[test]
    fn rejects_non_finite_oracles() {
        let oracle = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(concave_ascent(oracle, &[1.0], &AscentOptions::default()).is_err());
    }

    #[test]
    fn fixed_point_mode_is_monotone() {
        // Block-exact update for f(g) = -(g - 3)^2: jump straight to 3.
        let value_of = |g: &[f64]| -(g[0] - 3.0) * (g[0] - 3.0);
        let update = |g: &[f64]| vec![g[0] + 0.5 * (3.0 - g[0])];
        let (g, v, iters) = fixed_point_ascent(value_of, update, &[0.0], 200, 1e-12).unwrap();
        assert!((g[0] - 3.0).abs() < 1e-5);
        assert!(v > -1e-9);
        assert!(iters < 200);
    }
}
