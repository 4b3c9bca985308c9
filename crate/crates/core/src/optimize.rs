//! Levenberg–Marquardt least squares with a finite-difference Jacobian.
//!
//! Callers are expected to pass well-scaled parameters (order one); the
//! Jacobian step and the damping both assume it.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Stop when an accepted step lowers the cost by less than this fraction.
    pub cost_tolerance: f64,
    /// Stop when the infinity norm of the gradient falls below this.
    pub gradient_tolerance: f64,
    /// Stop when the step is this small relative to the parameters.
    pub step_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 10_000,
            cost_tolerance: 1e-10,
            gradient_tolerance: 1e-14,
            step_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    /// Cost after every accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub n_residuals: usize,
    /// `JᵀJ` at the solution.
    pub normal_matrix: DMatrix<f64>,
}

impl LmReport {
    /// Parameter covariance `s² (JᵀJ)⁻¹` with `s² = cost/(m - n)`.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let n = self.params.len();
        let dof = self.n_residuals.saturating_sub(n).max(1) as f64;
        let inv = self.normal_matrix.clone().try_inverse()?;
        Some(inv * (self.cost / dof))
    }

    /// Ratio of extreme eigenvalues of `JᵀJ`; infinite when singular.
    pub fn condition_number(&self) -> f64 {
        symmetric_condition(self.normal_matrix.clone())
    }

    /// Condition number of `JᵀJ` rescaled to unit diagonal, which does not
    /// depend on the units chosen for each parameter.
    pub fn scaled_condition_number(&self) -> f64 {
        let d = self.normal_matrix.diagonal();
        if d.iter().any(|v| *v <= 0.0) {
            return f64::INFINITY;
        }
        let s = d.map(|v| 1.0 / v.sqrt());
        let scaled = DMatrix::from_fn(d.len(), d.len(), |i, j| self.normal_matrix[(i, j)] * s[i] * s[j]);
        symmetric_condition(scaled)
    }
}

fn symmetric_condition(m: DMatrix<f64>) -> f64 {
    let eig = SymmetricEigen::new(m).eigenvalues;
    let max = eig.iter().cloned().fold(f64::MIN, f64::max);
    let min = eig.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn evaluate<F>(f: &F, x: &[f64]) -> Option<(DVector<f64>, f64)>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let r = f(x)?;
    if r.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let r = DVector::from_vec(r);
    let cost = r.norm_squared();
    Some((r, cost))
}

/// Central-difference Jacobian. Returns `None` if a probe leaves the domain
/// of `f` on both sides.
fn jacobian<F>(f: &F, x: &[f64], r0: &DVector<f64>) -> Option<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let m = r0.len();
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut probe = x.to_vec();
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1.0);
        probe[j] = x[j] + h;
        let up = evaluate(f, &probe).map(|(r, _)| r);
        probe[j] = x[j] - h;
        let down = evaluate(f, &probe).map(|(r, _)| r);
        probe[j] = x[j];
        let col = match (up, down) {
            (Some(u), Some(d)) => (u - d) / (2.0 * h),
            (Some(u), None) => (u - r0) / h,
            (None, Some(d)) => (r0 - d) / h,
            (None, None) => return None,
        };
        jac.set_column(j, &col);
    }
    Some(jac)
}

/// Minimises `Σ r_i(x)²` starting from `x0`.
///
/// `residuals` returns `None` (or non-finite values) outside its domain; such
/// trial steps are rejected like any step that raises the cost, so the cost
/// sequence is non-increasing.
pub fn levenberg_marquardt<F>(residuals: F, x0: &[f64], opts: &LmOptions) -> Result<LmReport>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let n = x0.len();
    let (mut r, mut cost) = evaluate(&residuals, x0)
        .ok_or_else(|| Error::invalid("initial_guess", "residuals are not finite at the starting point"))?;
    let m = r.len();
    if m < n {
        return Err(Error::invalid("residuals", format!("{m} residuals for {n} parameters")));
    }
    let mut x = x0.to_vec();
    let mut history = vec![cost];
    let mut jac = jacobian(&residuals, &x, &r)
        .ok_or_else(|| Error::invalid("initial_guess", "Jacobian undefined at the starting point"))?;
    let mut normal = jac.transpose() * &jac;
    let mut grad = jac.transpose() * &r;
    let mut mu = 1e-3 * normal.diagonal().max().max(f64::MIN_POSITIVE);
    let mut nu = 2.0;

    let report = |x: Vec<f64>, cost, iterations, history, normal| LmReport {
        params: x,
        cost,
        iterations,
        cost_history: history,
        n_residuals: m,
        normal_matrix: normal,
    };

    for iter in 1..=opts.max_iterations {
        if cost == 0.0 || grad.amax() <= opts.gradient_tolerance {
            return Ok(report(x, cost, iter - 1, history, normal));
        }
        let mut damped = normal.clone();
        for j in 0..n {
            damped[(j, j)] += mu * normal[(j, j)].max(1e-12);
        }
        let Some(step) = damped.cholesky().map(|c| c.solve(&(-&grad))) else {
            mu *= nu;
            nu *= 2.0;
            continue;
        };
        let x_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step.norm() <= opts.step_tolerance * (x_norm + opts.step_tolerance) {
            return Ok(report(x, cost, iter, history, normal));
        }
        let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
        match evaluate(&residuals, &trial) {
            Some((r_new, cost_new)) if cost_new < cost => {
                let predicted = -(2.0 * grad.dot(&step) + step.dot(&(&normal * &step)));
                let rho = if predicted > 0.0 { (cost - cost_new) / predicted } else { 0.0 };
                let relative_drop = (cost - cost_new) / cost;
                x = trial;
                r = r_new;
                cost = cost_new;
                history.push(cost);
                let Some(j) = jacobian(&residuals, &x, &r) else {
                    return Ok(report(x, cost, iter, history, normal));
                };
                jac = j;
                normal = jac.transpose() * &jac;
                grad = jac.transpose() * &r;
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                if relative_drop < opts.cost_tolerance {
                    return Ok(report(x, cost, iter, history, normal));
                }
            }
            _ => {
                mu *= nu;
                nu *= 2.0;
                if mu > 1e30 {
                    // no descent direction left at working precision
                    return Ok(report(x, cost, iter, history, normal));
                }
            }
        }
    }
    Err(Error::NonConvergence {
        what: "Levenberg-Marquardt",
        iterations: opts.max_iterations,
    })
}
