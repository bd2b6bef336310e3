//! Finite-sum objectives `F(x) = (1/n) Σ f_i(x)`.

mod poisson;
mod quadratic;
mod reference;

pub use poisson::{
    make_poisson_instance, make_poisson_instance_with_noise, DesignMatrix, PoissonInstance,
    PoissonMode, NOISE_SCALE,
};
pub use quadratic::SeparableQuadratic;
pub use reference::{reference_minimize, ReferenceConfig, ReferenceSolution};

use crate::error::{check_len, Error, Result};
use crate::kernels::KernelId;
use crate::linalg::dot;
use crate::prox::ProxResult;

/// Tolerated negative objective gap coming from reference-run error.
pub const GAP_NEGATIVE_TOLERANCE: f64 = 1e-9;

/// A finite sum of convex, differentiable components.
///
/// `rel_smoothness` and the strong-convexity constants are stated relative
/// to the kernel returned by [`FiniteSumProblem::declared_kernel`].
pub trait FiniteSumProblem: Send + Sync {
    fn n(&self) -> usize;

    fn dim(&self) -> usize;

    fn component_value(&self, i: usize, x: &[f64]) -> Result<f64>;

    fn component_grad_into(&self, i: usize, x: &[f64], out: &mut [f64]) -> Result<()>;

    fn component_grad(&self, i: usize, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.component_grad_into(i, x, &mut g)?;
        Ok(g)
    }

    fn full_value(&self, x: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for i in 0..self.n() {
            s += self.component_value(i, x)?;
        }
        Ok(s / self.n() as f64)
    }

    fn full_grad_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_len(self.dim(), out.len())?;
        out.fill(0.0);
        let mut g = vec![0.0; self.dim()];
        for i in 0..self.n() {
            self.component_grad_into(i, x, &mut g)?;
            for (o, v) in out.iter_mut().zip(&g) {
                *o += v;
            }
        }
        let inv = 1.0 / self.n() as f64;
        out.iter_mut().for_each(|o| *o *= inv);
        Ok(())
    }

    fn full_grad(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.dim()];
        self.full_grad_into(x, &mut g)?;
        Ok(g)
    }

    /// `D_{f_i}(x, y)`. The default is the definitional three-term formula;
    /// problems override it with a form that stays accurate when `x ≈ y`.
    fn divergence(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64> {
        component_divergence(self, i, x, y)
    }

    /// `D_F(x, y)` as the mean of the component divergences.
    fn full_divergence(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for i in 0..self.n() {
            s += self.divergence(i, x, y)?;
        }
        Ok(s / self.n() as f64)
    }

    fn declared_kernel(&self) -> KernelId;

    /// `L` such that every `f_i` is `L`-smooth relative to the declared kernel.
    fn rel_smoothness(&self) -> f64;

    /// `μ`: relative strong convexity of `F`.
    fn rel_strong_convexity(&self) -> f64 {
        0.0
    }

    /// `β`: relative strong convexity shared by every component.
    fn component_strong_convexity(&self) -> f64 {
        0.0
    }

    fn minimizer(&self) -> Option<&[f64]>;

    fn optimal_value(&self) -> Option<f64>;

    /// True when every component is stationary at the minimizer.
    fn is_interpolating(&self) -> bool {
        false
    }

    /// Exact solution of the perturbed proximal subproblem, when one exists
    /// for this problem and kernel. `None` means "use the inexact solver".
    fn closed_form_prox(
        &self,
        _kernel: KernelId,
        _i: usize,
        _x_k: &[f64],
        _e: &[f64],
        _alpha: f64,
    ) -> Option<Result<ProxResult>> {
        None
    }
}

/// `F(x) − F*`.
pub fn objective_gap<P: FiniteSumProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<f64> {
    let fstar = problem
        .optimal_value()
        .ok_or_else(|| Error::MissingReference("optimal value F* is unknown".into()))?;
    let gap = problem.full_value(x)? - fstar;
    if gap < -GAP_NEGATIVE_TOLERANCE {
        log::warn!("objective gap {gap:e} is below -{GAP_NEGATIVE_TOLERANCE:e}; reference value may be inaccurate");
    }
    Ok(gap)
}

/// `D_{f_i}(x, y) = f_i(x) − f_i(y) − ⟨∇f_i(y), x − y⟩`, evaluated literally.
pub fn component_divergence<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    i: usize,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let g = problem.component_grad(i, y)?;
    let lin: f64 = g
        .iter()
        .zip(x.iter().zip(y))
        .map(|(gi, (xi, yi))| gi * (xi - yi))
        .sum();
    Ok(problem.component_value(i, x)? - problem.component_value(i, y)? - lin)
}

/// `D_F(x, y)`
pub fn objective_divergence<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    let g = problem.full_grad(y)?;
    let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(problem.full_value(x)? - problem.full_value(y)? - dot(&g, &diff))
}
