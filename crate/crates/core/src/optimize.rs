//! Thin wrapper around argmin's Nelder–Mead for small smooth problems.

use argmin::core::{CostFunction, Error, Executor, State, TerminationReason, TerminationStatus};
use argmin::solver::neldermead::NelderMead;

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Edge length of the initial simplex along each coordinate.
    pub step: f64,
    /// Stop when the standard deviation of the simplex costs falls below this.
    pub tolerance: f64,
    pub max_iters: u64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { step: 0.3, tolerance: 1e-12, max_iters: 4000 }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: u64,
    pub converged: bool,
}

struct Problem<F>(F);

impl<F: Fn(&[f64]) -> f64> CostFunction for Problem<F> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, Error> {
        Ok((self.0)(p))
    }
}

pub fn minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: SimplexOptions) -> Result<Minimum> {
    let mut simplex = vec![x0.to_vec()];
    for k in 0..x0.len() {
        let mut v = x0.to_vec();
        v[k] += opts.step;
        simplex.push(v);
    }
    let solver = NelderMead::new(simplex)
        .with_sd_tolerance(opts.tolerance)
        .map_err(|e| SimError::Numerical(e.to_string()))?;
    let res = Executor::new(Problem(f), solver)
        .configure(|s| s.max_iters(opts.max_iters))
        .run()
        .map_err(|e| SimError::Numerical(e.to_string()))?;
    let state = res.state();
    let x = state.get_best_param().cloned().unwrap_or_else(|| x0.to_vec());
    let converged = matches!(
        state.get_termination_status(),
        TerminationStatus::Terminated(TerminationReason::SolverConverged)
    );
    Ok(Minimum { x, value: state.get_best_cost(), iterations: state.get_iter(), converged })
}

/// Repeated minimization, each run restarting from the previous optimum,
/// until the value stops improving by more than `tolerance`.
pub fn minimize_restarting<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], opts: SimplexOptions, max_restarts: usize) -> Result<Minimum> {
    let mut best = minimize(&f, x0, opts)?;
    for _ in 0..max_restarts {
        let next = minimize(&f, &best.x, opts)?;
        let improved = best.value - next.value;
        let iterations = best.iterations + next.iterations;
        if next.value < best.value {
            best = Minimum { iterations, ..next };
        }
        if improved <= opts.tolerance {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_quadratic_minimum() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 3.0 * (x[1] + 2.0).powi(2) + 0.5;
        let m = minimize(f, &[0.0, 0.0], SimplexOptions::default()).unwrap();
        assert!(m.converged);
        assert!((m.x[0] - 1.0).abs() < 1e-5 && (m.x[1] + 2.0).abs() < 1e-5);
        assert!((m.value - 0.5).abs() < 1e-10);
    }

    #[test]
    fn rosenbrock_with_restarts() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize_restarting(f, &[-1.2, 1.0], SimplexOptions { step: 0.5, tolerance: 1e-14, max_iters: 5000 }, 3).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
    }
}
