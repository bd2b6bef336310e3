//! Rate constants, stepsize caps, contraction factors and the variance
//! diagnostics the convergence analysis is phrased in.
//!
//! Per-variant constants of the variance assumption:
//!
//! | variant | `A`    | `B` | `ρ`   | `C`      |
//! |---------|--------|-----|-------|----------|
//! | `none`  | `0`    | `1` | `0`   | `0`      |
//! | `saga`  | `2LG`  | `G` | `1/n` | `2L/n`   |
//! | `lsvrg` | `2LG`  | `G` | `p`   | `2pL`    |
//! | `svrp`  | `2LG`  | `G` | `0`   | `0`      |

use serde::{Deserialize, Serialize};

use crate::algorithms::{run_unified, EstimatorState, RunConfig, Variant};
use crate::error::{Error, Result};
use crate::kernels::{Kernel, KernelId};
use crate::problems::{component_divergence, objective_divergence, FiniteSumProblem};

/// Largest `n` for which `E_k[ζ_k]` is enumerated.
pub const N_K_MAX_COMPONENTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    /// Relative smoothness `L`.
    pub l: f64,
    /// Relative strong convexity of `F`.
    pub mu: f64,
    /// Relative strong convexity shared by every component.
    pub beta: f64,
    /// Symmetry coefficient; must be supplied for non-Euclidean kernels.
    pub gamma_h: Option<f64>,
    pub g0: f64,
    pub m0: f64,
    pub n: usize,
    pub p: f64,
    pub m: usize,
}

impl RateConstants {
    /// Constants read off a problem, with `G0 = 1`, `M0 = (n+1) G0`,
    /// `p = 1/n`, `m = n`, and `γ_h = 1` for the Euclidean kernel.
    pub fn for_problem<P: FiniteSumProblem + ?Sized>(
        problem: &P,
        kernel: KernelId,
        gamma_h: Option<f64>,
    ) -> Self {
        let n = problem.n();
        let g0 = 1.0;
        RateConstants {
            l: problem.rel_smoothness(),
            mu: problem.rel_strong_convexity(),
            beta: problem.component_strong_convexity(),
            gamma_h: gamma_h.or((kernel == KernelId::Euclidean).then_some(1.0)),
            g0,
            m0: (n as f64 + 1.0) * g0,
            n,
            p: 1.0 / n as f64,
            m: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [("L", self.l), ("mu", self.mu), ("beta", self.beta), ("G0", self.g0), ("M0", self.m0), ("p", self.p)];
        if let Some((name, v)) = named.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig(format!("{name} must be nonnegative (got {v})")));
        }
        if let Some(g) = self.gamma_h {
            if !(0.0..=1.0).contains(&g) {
                return Err(Error::InvalidConfig(format!("gamma_h must lie in [0, 1] (got {g})")));
            }
        }
        if self.n < 1 || self.m < 1 {
            return Err(Error::InvalidConfig("n and m must be >= 1".into()));
        }
        Ok(())
    }

    fn gamma(&self) -> Result<f64> {
        self.gamma_h.ok_or_else(|| {
            Error::InvalidConfig("gamma_h is not known for this kernel; supply it explicitly".into())
        })
    }
}

/// `A, B, ρ, C` of the variance assumption for a variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceConstants {
    pub a: f64,
    pub b: f64,
    pub rho: f64,
    pub c: f64,
}

pub fn variance_constants(variant: Variant, rc: &RateConstants) -> VarianceConstants {
    let (l, g, n) = (rc.l, rc.g0, rc.n as f64);
    match variant {
        Variant::None => VarianceConstants { a: 0.0, b: 1.0, rho: 0.0, c: 0.0 },
        Variant::Saga => VarianceConstants { a: 2.0 * l * g, b: g, rho: 1.0 / n, c: 2.0 * l / n },
        Variant::Lsvrg => VarianceConstants { a: 2.0 * l * g, b: g, rho: rc.p, c: 2.0 * rc.p * l },
        Variant::Svrp => VarianceConstants { a: 2.0 * l * g, b: g, rho: 0.0, c: 0.0 },
    }
}

/// `G = 1 + 2 M L_h (‖y − x‖ + ‖v‖)`
pub fn gain_proposition1(m: f64, l_h: f64, dist_yx: f64, norm_v: f64) -> f64 {
    1.0 + 2.0 * m * l_h * (dist_yx + norm_v)
}

/// Strict upper bound on a constant stepsize. Vanilla has none.
pub fn stepsize_cap(variant: Variant, rc: &RateConstants) -> Result<f64> {
    rc.validate()?;
    if variant == Variant::None {
        return Ok(f64::INFINITY);
    }
    if !(rc.l > 0.0 && rc.g0 > 0.0) {
        return Err(Error::InvalidConfig("the cap needs L > 0 and G0 > 0".into()));
    }
    let (l, g, m) = (rc.l, rc.g0, rc.m0);
    match variant {
        Variant::Saga => Ok(1.0 / (2.0 * l * (g + m / rc.n as f64))),
        Variant::Lsvrg => Ok(1.0 / (2.0 * l * (g + m * rc.p))),
        Variant::Svrp => Ok(1.0 / (4.0 * l * g)),
        Variant::None => unreachable!(),
    }
}

/// Generic cap `1/(A + M C)`.
pub fn generic_stepsize_cap(variant: Variant, rc: &RateConstants) -> Result<f64> {
    rc.validate()?;
    let v = variance_constants(variant, rc);
    Ok(1.0 / (v.a + rc.m0 * v.c))
}

/// `1/(1/cap + 1)`; for saga this is `1/(2L(G0 + M0/n) + 1)`.
pub fn safe_stepsize(variant: Variant, rc: &RateConstants) -> Result<f64> {
    Ok(1.0 / (1.0 / stepsize_cap(variant, rc)? + 1.0))
}

/// Per-step contraction factor (per epoch for svrp).
pub fn contraction_factor(variant: Variant, rc: &RateConstants, alpha: f64) -> Result<f64> {
    rc.validate()?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidConfig(format!("stepsize must be positive (got {alpha})")));
    }
    let cap = stepsize_cap(variant, rc)?;
    if alpha >= cap {
        return Err(Error::InvalidConfig(format!("stepsize {alpha} is not below the cap {cap}")));
    }
    let (l, g, m) = (rc.l, rc.g0, rc.m0);
    let q = match variant {
        Variant::None => 1.0 / (1.0 + rc.beta * alpha),
        Variant::Saga | Variant::Lsvrg => {
            let gamma = rc.gamma()?;
            let v = variance_constants(variant, rc);
            let first = 1.0 - alpha * gamma * rc.mu * (1.0 - alpha * (v.a + m * v.c));
            let second = 1.0 + v.b / m - v.rho;
            first.max(second)
        }
        Variant::Svrp => {
            let gamma = rc.gamma()?;
            let s = 1.0 - 2.0 * l * alpha * g;
            1.0 / (gamma * rc.mu * alpha * s * rc.m as f64) + 2.0 * l * alpha * g / s
        }
    };
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "{variant} contraction factor {q} is not in (0, 1); adjust the stepsize, M0 or m"
        )));
    }
    Ok(q)
}

/// `s_i(z) = 2L² D_{h*}(∇h(z) − (1/L)(∇f_i(z) − ∇f_i(x*)), ∇h(z))`
pub fn sigma_term<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    kernel: &dyn Kernel,
    i: usize,
    z: &[f64],
    xstar: &[f64],
) -> Result<f64> {
    let l = problem.rel_smoothness();
    let hz = kernel.mirror(z)?;
    let gz = problem.component_grad(i, z)?;
    let gs = problem.component_grad(i, xstar)?;
    let y: Vec<f64> = (0..hz.len()).map(|j| hz[j] - (gz[j] - gs[j]) / l).collect();
    kernel.check_dual(&y)?;
    Ok(2.0 * l * l * kernel.dual_bregman(&y, &hz)?)
}

/// `σ_k² = (1/n) Σ_i s_i(anchor_i)`, by enumeration over `i`.
pub fn sigma_sq_diagnostic<P: FiniteSumProblem + ?Sized>(
    state: &EstimatorState,
    problem: &P,
    kernel: &dyn Kernel,
    xstar: &[f64],
) -> Result<f64> {
    if state.variant() == Variant::None {
        return Err(Error::InvalidConfig("vanilla runs carry no variance state".into()));
    }
    let n = problem.n();
    let mut total = 0.0;
    for i in 0..n {
        let anchor = state.anchor_point(i).ok_or_else(|| {
            Error::MissingReference("saga anchor points were not retained".into())
        })?;
        total += sigma_term(problem, kernel, i, anchor, xstar)?;
    }
    Ok(total / n as f64)
}

/// `2L (1/n) Σ_i D_{f_i}(anchor_i, x*)`, an upper bound on `σ_k²`.
pub fn sigma_sq_upper_bound<P: FiniteSumProblem + ?Sized>(
    state: &EstimatorState,
    problem: &P,
    xstar: &[f64],
) -> Result<f64> {
    let n = problem.n();
    let mut total = 0.0;
    for i in 0..n {
        let anchor = state
            .anchor_point(i)
            .ok_or_else(|| Error::MissingReference("anchor points unavailable".into()))?;
        total += component_divergence(problem, i, anchor, xstar)?;
    }
    Ok(2.0 * problem.rel_smoothness() * total / n as f64)
}

/// Both sides of the one-step variance recursion at a fixed state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecursionCheck {
    /// `E_k[σ_{k+1}²]`, by enumeration.
    pub expected_next: f64,
    /// `(1 − ρ) σ_k² + C D_F(x_k, x*)`.
    pub bound: f64,
}

impl RecursionCheck {
    pub fn slack(&self) -> f64 {
        self.bound - self.expected_next
    }
}

/// Enumerates the next-state distribution (over `i_k` for saga, over
/// `ε_k` for lsvrg) and compares `E_k[σ_{k+1}²]` with the recursion bound.
pub fn sigma_recursion_check<P: FiniteSumProblem + ?Sized>(
    state: &EstimatorState,
    problem: &P,
    kernel: &dyn Kernel,
    x_k: &[f64],
    xstar: &[f64],
) -> Result<RecursionCheck> {
    let n = problem.n();
    let l = problem.rel_smoothness();
    let sigma = sigma_sq_diagnostic(state, problem, kernel, xstar)?;
    let df = objective_divergence(problem, x_k, xstar)?;
    match state {
        EstimatorState::Saga { .. } => {
            let mut streams = crate::algorithms::SamplingStreams::new(0);
            let mut expected = 0.0;
            for i in 0..n {
                let mut next = state.clone();
                next.update(problem, kernel, i, x_k, &mut streams)?;
                expected += sigma_sq_diagnostic(&next, problem, kernel, xstar)?;
            }
            let nf = n as f64;
            Ok(RecursionCheck {
                expected_next: expected / nf,
                bound: (1.0 - 1.0 / nf) * sigma + 2.0 * l / nf * df,
            })
        }
        EstimatorState::Lsvrg { p, .. } => {
            let refreshed = EstimatorState::lsvrg(problem, x_k, *p)?;
            let sigma_refreshed = sigma_sq_diagnostic(&refreshed, problem, kernel, xstar)?;
            Ok(RecursionCheck {
                expected_next: (1.0 - p) * sigma + p * sigma_refreshed,
                bound: (1.0 - p) * sigma + 2.0 * p * l * df,
            })
        }
        _ => Err(Error::InvalidConfig(
            "the variance recursion is stated for saga and lsvrg".into(),
        )),
    }
}

/// `N_k = −(1/(2α²)) D_{h*}(∇h(x_k), ∇h(x_k) − E_k[ζ_k])` with
/// `ζ_k = −2α(∇f_{i_k}(x*) − ∇f_{i_k}(anchor_{i_k}))`.
///
/// `E_k[ζ_k]` is enumerated over `i_k`; `None` when `n` exceeds
/// [`N_K_MAX_COMPONENTS`].
pub fn n_k_diagnostic<P: FiniteSumProblem + ?Sized>(
    state: &EstimatorState,
    problem: &P,
    kernel: &dyn Kernel,
    x_k: &[f64],
    xstar: &[f64],
    alpha: f64,
) -> Result<Option<f64>> {
    let n = problem.n();
    if n > N_K_MAX_COMPONENTS {
        return Ok(None);
    }
    let d = problem.dim();
    let mut ezeta = vec![0.0; d];
    for i in 0..n {
        let gs = problem.component_grad(i, xstar)?;
        let ga = match (state.table_row(i), state.anchor_point(i)) {
            (Some(row), _) => row.to_vec(),
            (None, Some(anchor)) => problem.component_grad(i, anchor)?,
            (None, None) => return Err(Error::InvalidConfig("vanilla runs have no N_k".into())),
        };
        for j in 0..d {
            ezeta[j] += -2.0 * alpha * (gs[j] - ga[j]) / n as f64;
        }
    }
    let hx = kernel.mirror(x_k)?;
    let shifted: Vec<f64> = hx.iter().zip(&ezeta).map(|(h, z)| h - z).collect();
    kernel.check_dual(&shifted)?;
    Ok(Some(-kernel.dual_bregman(&hx, &shifted)? / (2.0 * alpha * alpha)))
}

/// `V_k = (1/α²) D_h(x*, x_k) + M σ_k²`
pub fn lyapunov(alpha: f64, dist_to_xstar: f64, m: f64, sigma_sq: f64) -> f64 {
    dist_to_xstar / (alpha * alpha) + m * sigma_sq
}

/// Empirical stand-in for `σ*²`: the largest `D_h(x_k, z_{k+1})/α_k²` seen
/// over a pilot run of `cfg`, with `z_{k+1}` the explicit step from `x_k`.
/// An estimate, not a certified bound.
pub fn estimate_sigma_star_sq<P: FiniteSumProblem + ?Sized>(
    cfg: &RunConfig,
    problem: &P,
) -> Result<f64> {
    Ok(run_unified(cfg, problem)?.max_step_divergence)
}
