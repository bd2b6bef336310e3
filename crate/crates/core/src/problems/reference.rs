//! High-accuracy deterministic minimization, used to pin down `F*` when it
//! is not known by construction.
//!
//! Full-gradient Bregman steps `∇h(x⁺) = ∇h(x) − t ∇F(x)` with a
//! relative-smoothness line search: a step is accepted when
//! `F(x⁺) ≤ F(x) + ⟨∇F(x), x⁺ − x⟩ + (1/t) D_h(x⁺, x)`, checked in the
//! equivalent form `D_F(x⁺, x) ≤ (1/t) D_h(x⁺, x)`, otherwise `t` is halved.
//! After every accepted step `t` is doubled.

use serde::{Deserialize, Serialize};

use super::FiniteSumProblem;
use crate::error::{check_len, Error, Result};
use crate::kernels::{DomainKind, Kernel};
use crate::linalg::all_finite;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    pub max_steps: usize,
    /// Target for the scaled stationarity measure.
    pub stationarity_tol: f64,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        ReferenceConfig {
            max_steps: 1_000_000,
            stationarity_tol: 1e-11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolution {
    pub minimizer: Vec<f64>,
    pub value: f64,
    pub steps: usize,
    pub stationarity: f64,
}

/// `‖∇F(x)‖∞` on the full space, `‖x ∘ ∇F(x)‖∞` on the positive orthant
/// (which also vanishes at boundary minimizers).
pub fn stationarity_measure(kernel: &dyn Kernel, x: &[f64], grad: &[f64]) -> f64 {
    match kernel.domain() {
        DomainKind::FullSpace => grad.iter().fold(0.0, |m, g| f64::max(m, g.abs())),
        DomainKind::PositiveOrthant => x
            .iter()
            .zip(grad)
            .fold(0.0, |m, (xi, g)| f64::max(m, (xi * g).abs())),
    }
}

pub fn reference_minimize<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    kernel: &dyn Kernel,
    start: &[f64],
    cfg: &ReferenceConfig,
) -> Result<ReferenceSolution> {
    check_len(problem.dim(), start.len())?;
    if cfg.max_steps == 0 || !(cfg.stationarity_tol > 0.0) {
        return Err(Error::InvalidConfig(
            "reference run needs max_steps >= 1 and a positive tolerance".into(),
        ));
    }
    kernel.check_primal(start)?;

    let mut x = start.to_vec();
    let mut fx = problem.full_value(&x)?;
    let mut g = problem.full_grad(&x)?;
    let mut t = 1.0 / problem.rel_smoothness().max(f64::MIN_POSITIVE);
    let mut dual = vec![0.0; x.len()];
    let mut trial = vec![0.0; x.len()];
    let mut steps = 0;
    let mut stat = stationarity_measure(kernel, &x, &g);

    while steps < cfg.max_steps && stat > cfg.stationarity_tol {
        let mut accepted = false;
        for _ in 0..200 {
            kernel.mirror_into(&x, &mut dual)?;
            for (y, gi) in dual.iter_mut().zip(&g) {
                *y -= t * gi;
            }
            if kernel.check_dual(&dual).is_err()
                || kernel.inverse_mirror_into(&dual, &mut trial).is_err()
                || kernel.check_primal(&trial).is_err()
            {
                t *= 0.5;
                continue;
            }
            let df = match problem.full_divergence(&trial, &x) {
                Ok(v) if v.is_finite() => v,
                _ => {
                    t *= 0.5;
                    continue;
                }
            };
            if df <= kernel.bregman(&trial, &x)? / t {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // The step is at the resolution limit; nothing more to gain.
            break;
        }
        std::mem::swap(&mut x, &mut trial);
        fx = problem.full_value(&x)?;
        problem.full_grad_into(&x, &mut g)?;
        stat = stationarity_measure(kernel, &x, &g);
        steps += 1;
        t *= 2.0;
    }
    if !all_finite(&x) {
        return Err(Error::DomainViolation("reference iterate is not finite".into()));
    }
    Ok(ReferenceSolution {
        minimizer: x,
        value: fx,
        steps,
        stationarity: stat,
    })
}
