//! Damped least squares (Levenberg–Marquardt) with a central-difference Jacobian.
//!
//! Callers are expected to pass parameters of order unity; step sizes for the
//! Jacobian and the convergence test are relative to that scale.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative parameter-step tolerance.
    pub xtol: f64,
    /// Relative cost-reduction tolerance.
    pub ftol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            xtol: 1e-8,
            ftol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// `s² (JᵀJ)⁻¹` with `s² = ‖r‖² / (m − n)`.
    pub covariance: DMatrix<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Cost `½‖r‖²` after each accepted step, starting with the initial cost.
    pub cost_history: Vec<f64>,
    pub condition_number: f64,
}

pub fn jacobian<F>(f: &F, x: &[f64], m: usize) -> DMatrix<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x.len();
    let mut jac = DMatrix::zeros(m, n);
    let mut xp = x.to_vec();
    let mut rp = vec![0.0; m];
    let mut rm = vec![0.0; m];
    for i in 0..n {
        let h = 1e-6 * x[i].abs().max(1.0);
        xp[i] = x[i] + h;
        f(&xp, &mut rp);
        xp[i] = x[i] - h;
        f(&xp, &mut rm);
        xp[i] = x[i];
        for k in 0..m {
            jac[(k, i)] = (rp[k] - rm[k]) / (2.0 * h);
        }
    }
    jac
}

fn cost(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Minimizes `½‖f(x)‖²` starting from `x0`; `f` writes `m` residuals.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], m: usize, opts: LmOptions) -> Result<LmReport>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = x0.len();
    if m < n {
        return Err(Error::Input(format!("{m} residuals cannot determine {n} parameters")));
    }
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    f(&x, &mut r);
    let mut c = cost(&r);
    if !c.is_finite() {
        return Err(Error::Input("residuals are not finite at the initial point".into()));
    }
    let mut history = vec![c];
    let mut lambda = -1.0;
    let mut r_new = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;

    'outer: while iterations < opts.max_iterations {
        iterations += 1;
        let jac = jacobian(&f, &x, m);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * DVector::from_column_slice(&r);
        if grad.amax() == 0.0 || c == 0.0 {
            converged = true;
            break;
        }
        if lambda < 0.0 {
            lambda = 1e-3 * jtj.diagonal().max();
        }
        loop {
            let mut a = jtj.clone();
            for i in 0..n {
                a[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let step = match a.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let x_new: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            f(&x_new, &mut r_new);
            let c_new = cost(&r_new);
            let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let small_step = step.norm() <= opts.xtol * (xnorm + opts.xtol);
            if c_new.is_finite() && c_new <= c {
                let reduction = c - c_new;
                x = x_new;
                std::mem::swap(&mut r, &mut r_new);
                c = c_new;
                history.push(c);
                lambda = (lambda / 3.0).max(1e-300);
                if small_step || reduction <= opts.ftol * c {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            if small_step {
                converged = true;
                break 'outer;
            }
            lambda *= 4.0;
            if lambda > 1e300 {
                converged = true;
                break 'outer;
            }
        }
    }

    let residual_norm = (2.0 * c).sqrt();
    if !converged {
        return Err(Error::Convergence {
            iterations,
            residual: residual_norm,
        });
    }

    let jac = jacobian(&f, &x, m);
    let jtj = jac.transpose() * &jac;
    let sv = jtj.clone().singular_values();
    let condition_number = sv.max() / sv.min();
    let dof = (m - n).max(1) as f64;
    let s2 = 2.0 * c / dof;
    let covariance = jtj
        .try_inverse()
        .map(|inv| inv * s2)
        .unwrap_or_else(|| DMatrix::from_element(n, n, f64::INFINITY));
    Ok(LmReport {
        params: x,
        covariance,
        residual_norm,
        iterations,
        cost_history: history,
        condition_number,
    })
}
