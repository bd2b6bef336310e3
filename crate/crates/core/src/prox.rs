//! The perturbed Bregman proximal subproblem
//!
//! ```text
//! x⁺ = argmin_x  φ(x) = f_i(x) − ⟨e, x − x_k⟩ + (1/α) D_h(x, x_k)
//! ```
//!
//! and the explicit mirror step `∇h*(∇h(x) − α v)`.
//!
//! The inexact solver runs mirror descent on `φ` warm-started at `x_k`.
//! Every accepted inner step satisfies the sufficient-decrease test
//! `φ(x⁺) ≤ φ(x) + ⟨∇φ(x), x⁺ − x⟩ + (1/τ) D_h(x⁺, x)`, so `φ` never increases.
//! Inner steps are capped at `τ = α`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::kernels::Kernel;
use crate::linalg::{dot, norm, sub};
use crate::problems::{FiniteSumProblem, PoissonInstance};

/// Halvings allowed when a trial step leaves the domain.
pub const MAX_DOMAIN_HALVINGS: usize = 60;

const MAX_DECREASE_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxMethod {
    ClosedForm,
    InexactDescent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProxResult {
    pub point: Vec<f64>,
    /// `‖∇f_i(x⁺) − e + (1/α)(∇h(x⁺) − ∇h(x_k))‖₂`
    pub stationarity_residual: f64,
    pub inner_iterations: usize,
    pub method: ProxMethod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStepRule {
    /// `τ = α / (1 + α L)`, safe under relative smoothness.
    Fixed,
    /// Start at `τ = α`, halve until sufficient decrease, double after success.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InnerSolverConfig {
    pub tolerance: f64,
    pub max_inner_iterations: usize,
    pub step_rule: InnerStepRule,
}

impl Default for InnerSolverConfig {
    fn default() -> Self {
        InnerSolverConfig {
            tolerance: 1e-8,
            max_inner_iterations: 500,
            step_rule: InnerStepRule::Backtracking,
        }
    }
}

impl InnerSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "inner tolerance must be positive (got {})",
                self.tolerance
            )));
        }
        if self.max_inner_iterations < 1 {
            return Err(Error::InvalidConfig("max_inner_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("stepsize must be positive (got {alpha})")))
    }
}

/// `∇h*(∇h(x) − α v)`
pub fn mirror_step(kernel: &dyn Kernel, x: &[f64], v: &[f64], alpha: f64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    check_len(x.len(), v.len())?;
    let mut y = kernel.mirror(x)?;
    for (yi, vi) in y.iter_mut().zip(v) {
        *yi -= alpha * vi;
    }
    if let Err(e) = kernel.check_dual(&y) {
        return Err(Error::StepOutOfDomain(format!("α = {alpha}: {e}")));
    }
    kernel.inverse_mirror(&y)
}

/// `φ(x)` for component `i`, perturbation `e`, center `x_k`.
pub fn subproblem_value<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    x: &[f64],
) -> Result<f64> {
    Ok(problem.component_value(i, x)? - dot(e, &sub(x, x_k)) + kernel.bregman(x, x_k)? / alpha)
}

/// `∇φ(x) = ∇f_i(x) − e + (1/α)(∇h(x) − ∇h(x_k))`
pub fn subproblem_grad<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    x: &[f64],
) -> Result<Vec<f64>> {
    let mut g = problem.component_grad(i, x)?;
    let hx = kernel.mirror(x)?;
    let hk = kernel.mirror(x_k)?;
    for j in 0..g.len() {
        g[j] += (hx[j] - hk[j]) / alpha - e[j];
    }
    Ok(g)
}

/// `‖∇φ(x)‖₂`, the optimality certificate of a prox point.
pub fn stationarity_residual<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    x: &[f64],
) -> Result<f64> {
    Ok(norm(&subproblem_grad(kernel, problem, i, x_k, e, alpha, x)?))
}

/// Closed-form prox for a diagonal Poisson instance under the Burg kernel.
pub fn solve_prox_separable(
    problem: &PoissonInstance,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
) -> Result<ProxResult> {
    check_alpha(alpha)?;
    check_len(problem.d, x_k.len())?;
    check_len(problem.d, e.len())?;
    let a = problem.matrix.diagonal_entry(i).ok_or_else(|| {
        Error::ClosedFormInapplicable("the design matrix is not diagonal".into())
    })?;
    let b = problem.b[i];
    let mut point = Vec::with_capacity(x_k.len());
    for (j, (&xk, &ej)) in x_k.iter().zip(e).enumerate() {
        let (num, den) = if j == i {
            (b + 1.0 / alpha, a - ej + 1.0 / (alpha * xk))
        } else {
            (1.0, 1.0 / xk - alpha * ej)
        };
        if !(den > 0.0 && den.is_finite()) {
            return Err(Error::ClosedFormInapplicable(format!(
                "denominator {den} at coordinate {j}"
            )));
        }
        point.push(num / den);
    }
    Ok(ProxResult {
        point,
        stationarity_residual: 0.0,
        inner_iterations: 0,
        method: ProxMethod::ClosedForm,
    })
}

/// Mirror descent on `φ`; see the module docs.
pub fn solve_prox_inexact<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    cfg: &InnerSolverConfig,
) -> Result<ProxResult> {
    inner_descent(kernel, problem, i, x_k, e, alpha, cfg, &mut |_| {})
}

/// The sequence `φ(x_0), φ(x_1), …` of inner iterates, ending at the
/// returned point or at the failure.
pub fn inner_descent_values<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    cfg: &InnerSolverConfig,
) -> (Vec<f64>, Result<ProxResult>) {
    let mut values = Vec::new();
    let mut push = |x: &[f64]| {
        if let Ok(v) = subproblem_value(kernel, problem, i, x_k, e, alpha, x) {
            values.push(v);
        }
    };
    let res = inner_descent(kernel, problem, i, x_k, e, alpha, cfg, &mut push);
    (values, res)
}

#[allow(clippy::too_many_arguments)]
fn inner_descent<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    cfg: &InnerSolverConfig,
    visit: &mut dyn FnMut(&[f64]),
) -> Result<ProxResult> {
    check_alpha(alpha)?;
    cfg.validate()?;
    check_len(problem.dim(), x_k.len())?;
    check_len(problem.dim(), e.len())?;
    kernel.check_primal(x_k)?;

    let d = x_k.len();
    let hk = kernel.mirror(x_k)?;
    let mut x = x_k.to_vec();
    let mut hx = hk.clone();
    let mut g = vec![0.0; d];
    let mut dual = vec![0.0; d];
    let mut trial = vec![0.0; d];

    let grad_at = |x: &[f64], hx: &[f64], g: &mut [f64]| -> Result<f64> {
        problem.component_grad_into(i, x, g)?;
        for j in 0..d {
            g[j] += (hx[j] - hk[j]) / alpha - e[j];
        }
        Ok(norm(g))
    };

    let mut tau = match cfg.step_rule {
        InnerStepRule::Fixed => alpha / (1.0 + alpha * problem.rel_smoothness()),
        InnerStepRule::Backtracking => alpha,
    };
    let mut residual = grad_at(&x, &hx, &mut g)?;
    visit(&x);

    for it in 0..cfg.max_inner_iterations {
        if residual <= cfg.tolerance {
            return Ok(ProxResult {
                point: x,
                stationarity_residual: residual,
                inner_iterations: it,
                method: ProxMethod::InexactDescent,
            });
        }
        let mut step = tau;
        let mut domain_halvings = 0;
        let mut decrease_halvings = 0;
        loop {
            for j in 0..d {
                dual[j] = hx[j] - step * g[j];
            }
            let in_domain = kernel.check_dual(&dual).is_ok()
                && kernel.inverse_mirror_into(&dual, &mut trial).is_ok()
                && kernel.check_primal(&trial).is_ok()
                && problem.component_value(i, &trial).is_ok_and(f64::is_finite);
            if !in_domain {
                domain_halvings += 1;
                if domain_halvings > MAX_DOMAIN_HALVINGS {
                    return Err(Error::StepOutOfDomain(format!(
                        "inner step left the domain after {MAX_DOMAIN_HALVINGS} halvings"
                    )));
                }
                step *= 0.5;
                continue;
            }
            if cfg.step_rule == InnerStepRule::Fixed {
                break;
            }
            // φ(x⁺) ≤ φ(x) + ⟨∇φ(x), x⁺ − x⟩ + (1/τ) D_h(x⁺, x) is the same as
            // D_{f_i}(x⁺, x) ≤ (1/τ − 1/α) D_h(x⁺, x); the divergence form
            // stays meaningful long after φ differences drown in rounding.
            let lhs = problem.divergence(i, &trial, &x)?;
            let rhs = (1.0 / step - 1.0 / alpha) * kernel.bregman(&trial, &x)?;
            if lhs <= rhs {
                break;
            }
            decrease_halvings += 1;
            if decrease_halvings > MAX_DECREASE_HALVINGS {
                return Err(Error::InnerSolverDiverged {
                    iterations: it,
                    residual,
                    tolerance: cfg.tolerance,
                });
            }
            step *= 0.5;
        }
        std::mem::swap(&mut x, &mut trial);
        hx.copy_from_slice(&dual);
        residual = grad_at(&x, &hx, &mut g)?;
        visit(&x);
        tau = match cfg.step_rule {
            InnerStepRule::Fixed => step,
            InnerStepRule::Backtracking => (2.0 * step).min(alpha),
        };
    }
    if residual <= cfg.tolerance {
        return Ok(ProxResult {
            point: x,
            stationarity_residual: residual,
            inner_iterations: cfg.max_inner_iterations,
            method: ProxMethod::InexactDescent,
        });
    }
    Err(Error::InnerSolverDiverged {
        iterations: cfg.max_inner_iterations,
        residual,
        tolerance: cfg.tolerance,
    })
}

/// Closed form when the problem offers one for this kernel, else the
/// inexact solver. An inapplicable closed form falls back as well.
pub fn solve_prox<P: FiniteSumProblem + ?Sized>(
    kernel: &dyn Kernel,
    problem: &P,
    i: usize,
    x_k: &[f64],
    e: &[f64],
    alpha: f64,
    cfg: &InnerSolverConfig,
) -> Result<ProxResult> {
    if let Some(id) = kernel.id() {
        match problem.closed_form_prox(id, i, x_k, e, alpha) {
            Some(Err(Error::ClosedFormInapplicable(msg))) => {
                log::debug!("closed-form prox inapplicable ({msg}); using inner solver");
            }
            Some(r) => return r,
            None => {}
        }
    }
    solve_prox_inexact(kernel, problem, i, x_k, e, alpha, cfg)
}
