//! Limited-memory quasi-Newton minimization: plain L-BFGS for smooth
//! objectives, and the orthant-wise variant (OWL-QN) when an L1 penalty is
//! present.
//!
//! The caller supplies the smooth part `f(x)` (here: NLL + L2) with its
//! gradient; the optimizer adds `l1·‖x‖₁` itself, steering with the
//! pseudo-gradient and keeping each step inside the orthant chosen at the
//! line-search start. Accepted steps strictly decrease the full objective,
//! so the recorded objective sequence is monotone.

use std::collections::VecDeque;

use super::CrfError;

/// One accepted optimizer step, as written to the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based iteration number.
    pub iteration: usize,
    /// Full objective after the step, including any L1 term.
    pub objective: f64,
    /// Euclidean norm of the (pseudo-)gradient after the step.
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop when the relative objective decrease of an accepted step falls
    /// below this.
    pub tolerance: f64,
    /// Number of (s, y) correction pairs retained.
    pub memory: usize,
    /// L1 coefficient; zero selects plain L-BFGS.
    pub l1: f64,
}

const ARMIJO_C: f64 = 1e-4;
const BACKTRACK: f64 = 0.5;
const MAX_LINE_SEARCH: usize = 50;
const CURVATURE_EPS: f64 = 1e-12;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn l2_norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn l1_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

/// OWL-QN pseudo-gradient of `f(x) + l1·‖x‖₁`: the steepest-descent
/// direction of the non-smooth objective. Equals the plain gradient when
/// `l1 == 0`.
fn pseudo_gradient(x: &[f64], grad: &[f64], l1: f64) -> Vec<f64> {
    if l1 == 0.0 {
        return grad.to_vec();
    }
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| {
            if xi > 0.0 {
                gi + l1
            } else if xi < 0.0 {
                gi - l1
            } else {
                let right = gi + l1;
                let left = gi - l1;
                if left > 0.0 {
                    left
                } else if right < 0.0 {
                    right
                } else {
                    0.0
                }
            }
        })
        .collect()
}

/// Two-loop recursion: applies the implicit inverse-Hessian estimate to `v`.
fn two_loop(v: &[f64], history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = v.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    if let Some((s, y, _)) = history.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    q
}

/// Minimizes `f(x) + l1·‖x‖₁` from `x = 0`. Returns the final point and one
/// record per accepted step. `eval` returns the smooth value and gradient;
/// its errors propagate from the initial evaluation, while a failing trial
/// point during line search just shortens the step.
pub(crate) fn minimize<F>(
    mut eval: F,
    dim: usize,
    config: &OptimizerConfig,
) -> Result<(Vec<f64>, Vec<IterationRecord>), CrfError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), CrfError>,
{
    let l1 = config.l1;
    let mut x = vec![0.0; dim];
    let (smooth, mut grad) = eval(&x)?;
    let mut objective = smooth + l1 * l1_norm(&x);
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut records = Vec::new();

    for iteration in 1..=config.max_iterations {
        let pg = pseudo_gradient(&x, &grad, l1);
        let pg_norm = l2_norm(&pg);
        if pg_norm == 0.0 {
            records.push(IterationRecord {
                iteration,
                objective,
                grad_norm: 0.0,
            });
            break;
        }

        // Search direction from the implicit Hessian, steered by −pg and,
        // for OWL-QN, restricted to the descent orthant.
        let v: Vec<f64> = pg.iter().map(|g| -g).collect();
        let mut direction = two_loop(&v, &history);
        if l1 > 0.0 {
            for (d, vi) in direction.iter_mut().zip(&v) {
                if *d * *vi <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        if dot(&direction, &pg) >= 0.0 {
            // Not a descent direction (degenerate curvature); fall back to
            // steepest descent.
            direction = v.clone();
        }

        // Orthant of the trial points: the sign of x_i, or of the steering
        // direction where x_i = 0.
        let orthant: Vec<f64> = if l1 > 0.0 {
            x.iter()
                .zip(&v)
                .map(|(&xi, &vi)| if xi != 0.0 { xi.signum() } else { vi.signum() })
                .collect()
        } else {
            Vec::new()
        };

        let mut alpha = if history.is_empty() {
            1.0 / l2_norm(&direction).max(1e-12)
        } else {
            1.0
        };

        let mut accepted: Option<(Vec<f64>, f64, Vec<f64>)> = None;
        for _ in 0..MAX_LINE_SEARCH {
            let mut x_new: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(&xi, &di)| xi + alpha * di)
                .collect();
            if l1 > 0.0 {
                // Project back into the chosen orthant: any coordinate that
                // crossed zero is clipped to it.
                for (xn, &sign) in x_new.iter_mut().zip(&orthant) {
                    if *xn * sign < 0.0 {
                        *xn = 0.0;
                    }
                }
            }
            let delta: Vec<f64> = x_new.iter().zip(&x).map(|(n, o)| n - o).collect();
            let descent = dot(&pg, &delta);
            if descent < 0.0 {
                if let Ok((smooth_new, grad_new)) = eval(&x_new) {
                    let objective_new = smooth_new + l1 * l1_norm(&x_new);
                    if objective_new.is_finite()
                        && objective_new <= objective + ARMIJO_C * descent
                    {
                        accepted = Some((x_new, objective_new, grad_new));
                        break;
                    }
                }
            }
            alpha *= BACKTRACK;
        }

        let Some((x_new, objective_new, grad_new)) = accepted else {
            // No acceptable step exists at any tried length; treat as
            // converged at the current point.
            break;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(n, o)| n - o).collect();
        let y: Vec<f64> = grad_new.iter().zip(&grad).map(|(n, o)| n - o).collect();
        let sy = dot(&s, &y);
        if sy > CURVATURE_EPS {
            if history.len() == config.memory {
                history.pop_front();
            }
            history.push_back((s, y, 1.0 / sy));
        }

        let relative_drop = (objective - objective_new) / objective.abs().max(1.0);
        x = x_new;
        grad = grad_new;
        objective = objective_new;
        records.push(IterationRecord {
            iteration,
            objective,
            grad_norm: l2_norm(&pseudo_gradient(&x, &grad, l1)),
        });

        if relative_drop < config.tolerance {
            break;
        }
    }

    Ok((x, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run<F>(eval: F, dim: usize, l1: f64, iters: usize) -> (Vec<f64>, Vec<IterationRecord>)
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), CrfError>,
    {
        minimize(
            eval,
            dim,
            &OptimizerConfig {
                max_iterations: iters,
                tolerance: 1e-12,
                memory: 6,
                l1,
            },
        )
        .unwrap()
    }

    /// `f(x) = 0.5 Σ c_i (x_i − a_i)²` with per-coordinate curvatures.
    fn quadratic(
        a: Vec<f64>,
        c: Vec<f64>,
    ) -> impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), CrfError> {
        move |x: &[f64]| {
            let value = x
                .iter()
                .zip(&a)
                .zip(&c)
                .map(|((xi, ai), ci)| 0.5 * ci * (xi - ai) * (xi - ai))
                .sum();
            let grad = x
                .iter()
                .zip(&a)
                .zip(&c)
                .map(|((xi, ai), ci)| ci * (xi - ai))
                .collect();
            Ok((value, grad))
        }
    }

    #[test]
    fn finds_quadratic_minimum() {
        let a = vec![3.0, -2.0, 0.5, 10.0];
        let (x, records) = run(quadratic(a.clone(), vec![1.0, 4.0, 0.5, 2.0]), 4, 0.0, 200);
        for (xi, ai) in x.iter().zip(&a) {
            assert!((xi - ai).abs() < 1e-6, "{xi} vs {ai}");
        }
        assert!(!records.is_empty());
    }

    #[test]
    fn objective_records_are_monotone_nonincreasing() {
        let (_, records) = run(
            quadratic(vec![5.0, -1.0, 2.0], vec![1.0, 100.0, 0.01]),
            3,
            0.0,
            300,
        );
        for pair in records.windows(2) {
            assert!(pair[1].objective <= pair[0].objective);
        }
    }

    #[test]
    fn l1_yields_soft_threshold_solution() {
        // argmin 0.5(x−a)² + λ|x| = sign(a)·max(0, |a| − λ), coordinate-wise.
        let a = vec![2.0, -0.3, 0.8, -4.0];
        let lambda = 1.0;
        let (x, _) = run(quadratic(a.clone(), vec![1.0; 4]), 4, lambda, 500);
        let expected: Vec<f64> = a
            .iter()
            .map(|ai| ai.signum() * (ai.abs() - lambda).max(0.0))
            .collect();
        for (xi, ei) in x.iter().zip(&expected) {
            assert!((xi - ei).abs() < 1e-6, "{xi} vs {ei}");
        }
        // Coordinates shrunk below the threshold are exactly zero, not tiny.
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn l1_produces_more_zeros_than_smooth_run() {
        let a = vec![0.2, -0.1, 3.0, 0.05, -0.4];
        let (smooth_x, _) = run(quadratic(a.clone(), vec![1.0; 5]), 5, 0.0, 300);
        let (sparse_x, _) = run(quadratic(a, vec![1.0; 5]), 5, 0.5, 300);
        let zeros = |v: &[f64]| v.iter().filter(|x| **x == 0.0).count();
        assert!(zeros(&sparse_x) > zeros(&smooth_x));
    }

    #[test]
    fn tolerance_stops_early() {
        let eval = quadratic(vec![1.0; 10], vec![1.0; 10]);
        let (_, records) = minimize(
            eval,
            10,
            &OptimizerConfig {
                max_iterations: 1000,
                tolerance: 1e-2,
                memory: 6,
                l1: 0.0,
            },
        )
        .unwrap();
        assert!(records.len() < 50);
    }

    #[test]
    fn initial_evaluation_error_propagates() {
        let result = minimize(
            |_: &[f64]| Err(CrfError::NonFinite("boom".to_string())),
            2,
            &OptimizerConfig {
                max_iterations: 10,
                tolerance: 0.0,
                memory: 6,
                l1: 0.0,
            },
        );
        assert!(matches!(result, Err(CrfError::NonFinite(_))));
    }

    #[test]
    fn already_optimal_point_stops_immediately() {
        let (x, records) = run(quadratic(vec![0.0, 0.0], vec![1.0, 1.0]), 2, 0.0, 10);
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(records.len(), 1);
        assert_eq!(records[0].grad_norm, 0.0);
    }
}
