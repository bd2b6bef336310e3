//! Executable properties behind `bsppa verify`.
//!
//! Every property samples inputs from a seeded stream, evaluates both sides
//! of an identity or inequality and keeps the worst violation together with
//! the inputs that produced it. A property passes when the worst violation
//! is within its tolerance. Evaluation errors (for example a dual point
//! leaving the domain) count as an infinite violation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::algorithms::{
    run_unified, EstimatorState, RunConfig, SamplingStreams, StepSchedule, SvrpOuter, Variant,
};
use crate::error::Result;
use crate::kernels::{bregman_definitional, Burg, DomainKind, Euclidean, Kernel, KernelId};
use crate::linalg::{dot, sub};
use crate::problems::{
    make_poisson_instance, FiniteSumProblem, PoissonInstance, PoissonMode, SeparableQuadratic,
};
use crate::prox::{solve_prox_inexact, solve_prox_separable, InnerSolverConfig};
use crate::theory::{
    contraction_factor, sigma_recursion_check, sigma_sq_diagnostic, sigma_sq_upper_bound,
    stepsize_cap, RateConstants,
};

pub const DEFAULT_SAMPLES: usize = 1000;

/// States per variant for the enumeration properties.
const STATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Sampled inputs per sampled property.
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 0,
            samples: DEFAULT_SAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyResult {
    pub name: String,
    /// The kernel the property was evaluated with, if any.
    pub kernel: Option<String>,
    pub passed: bool,
    pub checked: usize,
    pub max_violation: f64,
    pub tolerance: f64,
    /// Inputs of the worst violation, present only on failure.
    pub counterexample: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub samples: usize,
    pub passed: bool,
    pub properties: Vec<PropertyResult>,
}

impl VerifyReport {
    pub fn failures(&self) -> impl Iterator<Item = &PropertyResult> {
        self.properties.iter().filter(|p| !p.passed)
    }
}

struct Tally {
    name: &'static str,
    kernel: Option<String>,
    tolerance: f64,
    checked: usize,
    worst: f64,
    example: Option<Value>,
}

impl Tally {
    fn new(name: &'static str, kernel: Option<&dyn Kernel>, tolerance: f64) -> Self {
        Tally {
            name,
            kernel: kernel.map(|k| k.name().to_string()),
            tolerance,
            checked: 0,
            worst: 0.0,
            example: None,
        }
    }

    /// Records one evaluation; `violation` is how far the check is off.
    fn observe(&mut self, violation: Result<f64>, inputs: impl FnOnce() -> Value) {
        self.checked += 1;
        let (v, err) = match violation {
            Ok(v) if v.is_nan() => (f64::INFINITY, Some("NaN".to_string())),
            Ok(v) => (v, None),
            Err(e) => (f64::INFINITY, Some(e.to_string())),
        };
        if v > self.worst || (self.example.is_none() && v > self.tolerance) {
            self.worst = self.worst.max(v);
            let mut ex = inputs();
            if let (Some(e), Some(obj)) = (err, ex.as_object_mut()) {
                obj.insert("error".into(), Value::String(e));
            }
            self.example = Some(ex);
        }
    }

    fn finish(self) -> PropertyResult {
        let passed = self.worst <= self.tolerance;
        PropertyResult {
            name: self.name.to_string(),
            kernel: self.kernel,
            passed,
            checked: self.checked,
            max_violation: self.worst,
            tolerance: self.tolerance,
            counterexample: if passed { None } else { self.example },
        }
    }
}

fn rng_for(cfg: &VerifyConfig, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(stream);
    rng
}

fn primal(kernel: &dyn Kernel, rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    match kernel.domain() {
        DomainKind::PositiveOrthant => (0..d).map(|_| rng.random_range(0.1..3.0)).collect(),
        DomainKind::FullSpace => (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
    }
}

fn dual(kernel: &dyn Kernel, rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    match kernel.domain() {
        DomainKind::PositiveOrthant => (0..d).map(|_| -1.0 / rng.random_range(0.1..3.0)).collect(),
        DomainKind::FullSpace => (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
    }
}

/// `D(x,z) = D(x,y) + D(y,z) + ⟨∇h(y) − ∇h(z), x − y⟩`
pub fn three_points(kernel: &dyn Kernel, cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 1);
    let mut t = Tally::new("three_points_identity", Some(kernel), 1e-9);
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..=6);
        let (x, y, z) = (primal(kernel, &mut rng, d), primal(kernel, &mut rng, d), primal(kernel, &mut rng, d));
        let v = (|| {
            let lhs = kernel.bregman(&x, &z)?;
            let cross = dot(&sub(&kernel.mirror(&y)?, &kernel.mirror(&z)?), &sub(&x, &y));
            let rhs = kernel.bregman(&x, &y)? + kernel.bregman(&y, &z)? + cross;
            Ok((lhs - rhs).abs())
        })();
        t.observe(v, || json!({"x": x, "y": y, "z": z}));
    }
    t.finish()
}

/// `D_h(x, y) = D_{h*}(∇h(y), ∇h(x))`
pub fn duality(kernel: &dyn Kernel, cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 2);
    let mut t = Tally::new("duality_identity", Some(kernel), 1e-9);
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..=6);
        let (x, y) = (primal(kernel, &mut rng, d), primal(kernel, &mut rng, d));
        let v = (|| {
            let lhs = kernel.bregman(&x, &y)?;
            let rhs = kernel.dual_bregman(&kernel.mirror(&y)?, &kernel.mirror(&x)?)?;
            Ok((lhs - rhs).abs())
        })();
        t.observe(v, || json!({"x": x, "y": y}));
    }
    t.finish()
}

/// `D_h(x, x⁺) ≤ ½[D_{h*}(∇h(x) − g₁, ∇h(x)) + D_{h*}(∇h(x) − g₂, ∇h(x))]`
/// with `∇h(x⁺) = ∇h(x) − (g₁ + g₂)/2`.
pub fn midpoint_bound(kernel: &dyn Kernel, cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 3);
    let mut t = Tally::new("midpoint_bound", Some(kernel), 1e-9);
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..=6);
        let x = primal(kernel, &mut rng, d);
        let hx = match kernel.mirror(&x) {
            Ok(v) => v,
            Err(e) => {
                t.observe(Err(e), || json!({"x": x}));
                continue;
            }
        };
        let mut draw = || -> Vec<f64> {
            match kernel.domain() {
                // Keeps ∇h(x) − g strictly negative for the true mirror map.
                DomainKind::PositiveOrthant => {
                    x.iter().map(|xi| rng.random_range(-0.9..2.0) / xi).collect()
                }
                DomainKind::FullSpace => (0..d).map(|_| rng.random_range(-3.0..3.0)).collect(),
            }
        };
        let (g1, g2) = (draw(), draw());
        let v = (|| {
            let mid: Vec<f64> = (0..d).map(|j| hx[j] - 0.5 * (g1[j] + g2[j])).collect();
            let xp = kernel.inverse_mirror(&mid)?;
            let lhs = kernel.bregman(&x, &xp)?;
            let rhs = 0.5
                * (kernel.dual_bregman(&sub(&hx, &g1), &hx)?
                    + kernel.dual_bregman(&sub(&hx, &g2), &hx)?);
            Ok(lhs - rhs)
        })();
        t.observe(v, || json!({"x": x, "g1": g1, "g2": g2}));
    }
    t.finish()
}

/// `E[D_{h*}(X, u)] = D_{h*}(E[X], u) + E[D_{h*}(X, E[X])]` for a finitely
/// supported `X`, by exact enumeration.
pub fn variance_decomposition(kernel: &dyn Kernel, cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 4);
    let mut t = Tally::new("bregman_variance_decomposition", Some(kernel), 1e-10);
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..=4);
        let atoms: Vec<Vec<f64>> = (0..rng.random_range(1..=8)).map(|_| dual(kernel, &mut rng, d)).collect();
        let raw: Vec<f64> = atoms.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let probs: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let u = dual(kernel, &mut rng, d);
        let v = (|| {
            let mean: Vec<f64> = (0..d)
                .map(|j| atoms.iter().zip(&probs).map(|(a, p)| p * a[j]).sum())
                .collect();
            let mut lhs = 0.0;
            let mut spread = 0.0;
            for (a, p) in atoms.iter().zip(&probs) {
                lhs += p * kernel.dual_bregman(a, &u)?;
                spread += p * kernel.dual_bregman(a, &mean)?;
            }
            Ok((lhs - kernel.dual_bregman(&mean, &u)? - spread).abs())
        })();
        t.observe(v, || json!({"atoms": atoms, "probabilities": probs, "u": u}));
    }
    t.finish()
}

/// `∇h*(∇h(x)) = x`, relative to `max(1, |x|)`.
pub fn mirror_round_trip(kernel: &dyn Kernel, cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 5);
    let mut t = Tally::new("mirror_round_trip", Some(kernel), 1e-12);
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..=6);
        let x = primal(kernel, &mut rng, d);
        let v = (|| {
            let back = kernel.inverse_mirror(&kernel.mirror(&x)?)?;
            Ok(x.iter().zip(&back).map(|(a, b)| (a - b).abs() / a.abs().max(1.0)).fold(0.0, f64::max))
        })();
        t.observe(v, || json!({"x": x}));
    }
    t.finish()
}

/// `D_h(x, y) ≥ 0`, `D_h(x, x) = 0`, and the closed form matches the
/// definitional three-term formula.
pub fn divergence_consistency(kernel: &dyn Kernel, cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 6);
    let mut t = Tally::new("divergence_consistency", Some(kernel), 1e-9);
    for _ in 0..cfg.samples {
        let d = rng.random_range(1..=6);
        let (x, y) = (primal(kernel, &mut rng, d), primal(kernel, &mut rng, d));
        let v = (|| {
            let dxy = kernel.bregman(&x, &y)?;
            let def = bregman_definitional(kernel, &x, &y)?;
            let same = kernel.bregman(&x, &x)?.abs();
            Ok((-dxy).max(same).max((dxy - def).abs() / dxy.abs().max(1.0)))
        })();
        t.observe(v, || json!({"x": x, "y": y}));
    }
    t.finish()
}

/// The kernel-level suite.
pub fn kernel_properties(kernel: &dyn Kernel, cfg: &VerifyConfig) -> Vec<PropertyResult> {
    vec![
        three_points(kernel, cfg),
        duality(kernel, cfg),
        midpoint_bound(kernel, cfg),
        variance_decomposition(kernel, cfg),
        mirror_round_trip(kernel, cfg),
        divergence_consistency(kernel, cfg),
    ]
}

fn poisson(n: usize, d: usize, mode: PoissonMode, cfg: &VerifyConfig) -> Result<PoissonInstance> {
    make_poisson_instance(n, d, mode, cfg.seed)
}

fn failed_setup(name: &'static str, kernel: Option<&dyn Kernel>, e: crate::Error) -> PropertyResult {
    let mut t = Tally::new(name, kernel, 0.0);
    t.observe(Err(e), || json!({}));
    t.finish()
}

/// `D_{f_i}(x, y) ≤ L D_h(x, y)` and `D_{f_i}(x, y) ≥ 0` on a Poisson
/// instance with `n = 50`, `d = 20` under the Burg kernel.
pub fn poisson_smoothness_and_convexity(cfg: &VerifyConfig) -> Vec<PropertyResult> {
    let p = match poisson(50, 20, PoissonMode::Interpolation, cfg) {
        Ok(p) => p,
        Err(e) => return vec![failed_setup("relative_smoothness", Some(&Burg), e)],
    };
    let mut rng = rng_for(cfg, 7);
    let l = p.rel_smoothness();
    let mut smooth = Tally::new("relative_smoothness", Some(&Burg), 1e-9);
    let mut convex = Tally::new("component_convexity", Some(&Burg), 1e-9);
    for _ in 0..cfg.samples {
        let (x, y) = (primal(&Burg, &mut rng, 20), primal(&Burg, &mut rng, 20));
        let dh = Burg.bregman(&x, &y);
        for i in 0..p.n {
            let df = p.divergence(i, &x, &y);
            let s = match (&df, &dh) {
                (Ok(df), Ok(dh)) => Ok(df - l * dh),
                (Err(e), _) | (_, Err(e)) => Err(crate::Error::DomainViolation(e.to_string())),
            };
            smooth.observe(s, || json!({"i": i, "x": x, "y": y, "L": l}));
            convex.observe(df.map(|v| -v), || json!({"i": i, "x": x, "y": y}));
        }
    }
    vec![smooth.finish(), convex.finish()]
}

/// `∇F = (1/n) Σ ∇f_i`, `F = (1/n) Σ f_i`, and component gradients against
/// central differences.
pub fn poisson_gradients(cfg: &VerifyConfig) -> Vec<PropertyResult> {
    let p = match poisson(50, 20, PoissonMode::Noisy, cfg) {
        Ok(p) => p,
        Err(e) => return vec![failed_setup("mean_of_gradients", None, e)],
    };
    let mut rng = rng_for(cfg, 8);
    let mut mean = Tally::new("mean_of_gradients", None, 1e-12);
    let mut fd = Tally::new("finite_difference_gradients", None, 1e-6);
    for s in 0..cfg.samples {
        let x = primal(&Burg, &mut rng, 20);
        if s % 10 == 0 {
            let v = (|| {
                let full = p.full_grad(&x)?;
                let mut acc = vec![0.0; 20];
                let mut val = 0.0;
                for i in 0..p.n {
                    let g = p.component_grad(i, &x)?;
                    acc.iter_mut().zip(&g).for_each(|(a, gi)| *a += gi / p.n as f64);
                    val += p.component_value(i, &x)? / p.n as f64;
                }
                let gerr = full.iter().zip(&acc).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                Ok(gerr.max((p.full_value(&x)? - val).abs()))
            })();
            mean.observe(v, || json!({"x": x}));
        }
        let i = rng.random_range(0..p.n);
        let j = rng.random_range(0..20);
        let v = (|| {
            let g = p.component_grad(i, &x)?;
            let h = 1e-6 * x[j];
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += h;
            xm[j] -= h;
            let est = (p.component_value(i, &xp)? - p.component_value(i, &xm)?) / (2.0 * h);
            Ok((est - g[j]).abs() / (1.0 + g[j].abs()))
        })();
        fd.observe(v, || json!({"i": i, "j": j, "x": x}));
    }
    vec![mean.finish(), fd.finish()]
}

/// A state reached from a random start by a random number of updates at
/// random points.
fn random_state<P: FiniteSumProblem + ?Sized>(
    variant: Variant,
    problem: &P,
    kernel: &dyn Kernel,
    rng: &mut ChaCha8Rng,
) -> Result<(EstimatorState, Vec<f64>)> {
    let (n, d) = (problem.n(), problem.dim());
    let mut streams = SamplingStreams::new(rng.random());
    let x0 = primal(kernel, rng, d);
    let mut state = match variant {
        Variant::None => EstimatorState::none(),
        Variant::Saga => EstimatorState::saga(problem, &x0, true)?,
        Variant::Lsvrg => EstimatorState::lsvrg(problem, &x0, 0.3)?,
        Variant::Svrp => EstimatorState::svrp(problem, &x0, 3, SvrpOuter::RandomIndex, true, &mut streams)?,
    };
    for _ in 0..rng.random_range(0..3 * n) {
        let x = primal(kernel, rng, d);
        state.update(problem, kernel, rng.random_range(0..n), &x, &mut streams)?;
    }
    Ok((state, primal(kernel, rng, d)))
}

/// `(1/n) Σ_i e_k(i) = 0` at random reachable states, every variant.
pub fn unbiasedness(cfg: &VerifyConfig) -> Vec<PropertyResult> {
    let mut out = Vec::new();
    let problems: Vec<(Box<dyn FiniteSumProblem>, &dyn Kernel)> = match (
        poisson(8, 4, PoissonMode::Interpolation, cfg),
        SeparableQuadratic::random(8, 4, 0.5, 2.0, cfg.seed),
    ) {
        (Ok(p), Ok(q)) => vec![(Box::new(p), &Burg), (Box::new(q), &Euclidean)],
        (Err(e), _) | (_, Err(e)) => return vec![failed_setup("unbiasedness", None, e)],
    };
    for (problem, kernel) in &problems {
        let mut rng = rng_for(cfg, 9);
        let mut t = Tally::new("unbiasedness", Some(*kernel), 1e-12);
        for variant in Variant::ALL {
            for _ in 0..STATES {
                let v = (|| {
                    let (state, _) = random_state(variant, problem.as_ref(), *kernel, &mut rng)?;
                    let mut mean = vec![0.0; problem.dim()];
                    for i in 0..problem.n() {
                        let e = state.compute_e(problem.as_ref(), i)?;
                        mean.iter_mut().zip(&e).for_each(|(m, ei)| *m += ei / problem.n() as f64);
                    }
                    Ok(mean.iter().fold(0.0, |m, v| f64::max(m, v.abs())))
                })();
                t.observe(v, || json!({"variant": variant.as_str()}));
            }
        }
        out.push(t.finish());
    }
    out
}

/// The one-step variance recursions for saga and lsvrg, and the upper
/// bound `σ² ≤ 2L (1/n) Σ D_{f_i}(anchor_i, x*)`, by enumeration.
pub fn sigma_properties(cfg: &VerifyConfig) -> Vec<PropertyResult> {
    let mut out = Vec::new();
    let problems: Vec<(Box<dyn FiniteSumProblem>, &dyn Kernel)> = match (
        poisson(8, 4, PoissonMode::Interpolation, cfg),
        SeparableQuadratic::random(8, 4, 0.5, 2.0, cfg.seed),
    ) {
        (Ok(p), Ok(q)) => vec![(Box::new(p), &Burg), (Box::new(q), &Euclidean)],
        (Err(e), _) | (_, Err(e)) => return vec![failed_setup("sigma_recursion", None, e)],
    };
    for (problem, kernel) in &problems {
        let p = problem.as_ref();
        let xstar = p.minimizer().expect("test problems know x*").to_vec();
        let mut rng = rng_for(cfg, 10);
        let mut rec = Tally::new("sigma_recursion", Some(*kernel), 1e-9);
        let mut bound = Tally::new("sigma_upper_bound", Some(*kernel), 1e-9);
        for variant in [Variant::Saga, Variant::Lsvrg] {
            for _ in 0..STATES {
                let drawn = random_state(variant, p, *kernel, &mut rng);
                let (state, x) = match drawn {
                    Ok(s) => s,
                    Err(e) => {
                        rec.observe(Err(e), || json!({"variant": variant.as_str()}));
                        continue;
                    }
                };
                let r = sigma_recursion_check(&state, p, *kernel, &x, &xstar).map(|c| -c.slack());
                rec.observe(r, || json!({"variant": variant.as_str(), "x": x}));
                let b = sigma_sq_diagnostic(&state, p, *kernel, &xstar)
                    .and_then(|s| Ok(s - sigma_sq_upper_bound(&state, p, &xstar)?));
                bound.observe(b, || json!({"variant": variant.as_str()}));
            }
        }
        out.push(rec.finish());
        out.push(bound.finish());
    }
    out
}

/// The incremental saga table mean tracks the recomputed mean after every
/// one of 1000 random updates.
pub fn saga_mean_tracking(cfg: &VerifyConfig) -> PropertyResult {
    let p = match poisson(8, 4, PoissonMode::Noisy, cfg) {
        Ok(p) => p,
        Err(e) => return failed_setup("saga_table_mean", Some(&Burg), e),
    };
    let mut rng = rng_for(cfg, 11);
    let mut t = Tally::new("saga_table_mean", Some(&Burg), 1e-12);
    let mut streams = SamplingStreams::new(cfg.seed);
    let mut state = match EstimatorState::saga(&p, &[1.0; 4], false) {
        Ok(s) => s,
        Err(e) => return failed_setup("saga_table_mean", Some(&Burg), e),
    };
    for step in 0..1000 {
        let x = primal(&Burg, &mut rng, 4);
        let i = rng.random_range(0..p.n);
        let v = state.update(&p, &Burg, i, &x, &mut streams).map(|_| match &state {
            EstimatorState::Saga { table, mean, .. } => (0..4)
                .map(|j| {
                    let exact: f64 = (0..p.n).map(|r| table[r * 4 + j]).sum::<f64>() / p.n as f64;
                    (exact - mean[j]).abs()
                })
                .fold(0.0, f64::max),
            _ => f64::INFINITY,
        });
        t.observe(v, || json!({"step": step}));
    }
    t.finish()
}

/// Root of `a − b/x + (1/α)(1/x_k − 1/x) − e = 0` on `x > 0`.
fn bisect_prox(a: f64, b: f64, xk: f64, e: f64, alpha: f64) -> f64 {
    let s = |x: f64| a - b / x + (1.0 / xk - 1.0 / x) / alpha - e;
    let (mut lo, mut hi) = (f64::MIN_POSITIVE, 1.0);
    while s(hi) < 0.0 {
        hi *= 2.0;
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if s(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// On a diagonal instance (`n = d = 16`) the closed-form prox agrees with a
/// bisection root to `1e-12` and with the inexact solver to ten times its
/// tolerance.
pub fn prox_agreement(cfg: &VerifyConfig) -> Vec<PropertyResult> {
    let p = match poisson(16, 16, PoissonMode::Diagonal, cfg) {
        Ok(p) => p,
        Err(e) => return vec![failed_setup("prox_closed_form", Some(&Burg), e)],
    };
    let inner = InnerSolverConfig::default();
    let mut rng = rng_for(cfg, 12);
    let mut closed = Tally::new("prox_closed_form", Some(&Burg), 1e-12);
    let mut inexact = Tally::new("prox_inexact", Some(&Burg), 10.0 * inner.tolerance);
    for q in 0..cfg.samples.div_ceil(2) {
        let i = rng.random_range(0..16);
        let alpha = rng.random_range(0.01..0.5);
        let xk: Vec<f64> = (0..16).map(|_| rng.random_range(0.5..2.0)).collect();
        let e: Vec<f64> = (0..16).map(|_| rng.random_range(-0.4..0.4)).collect();
        let inputs = || json!({"i": i, "alpha": alpha, "x_k": xk, "e": e});
        let cf = solve_prox_separable(&p, i, &xk, &e, alpha);
        let a = p.matrix.diagonal_entry(i).unwrap_or(f64::NAN);
        closed.observe(
            cf.as_ref().map_err(|e| crate::Error::ClosedFormInapplicable(e.to_string())).map(|r| {
                let root = bisect_prox(a, p.b[i], xk[i], e[i], alpha);
                (r.point[i] - root).abs() / root.max(1.0)
            }),
            inputs,
        );
        if q % 5 == 0 {
            let v = cf.and_then(|r| {
                let s = solve_prox_inexact(&Burg, &p, i, &xk, &e, alpha, &inner)?;
                Ok(r.point.iter().zip(&s.point).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max))
            });
            inexact.observe(v, inputs);
        }
    }
    vec![closed.finish(), inexact.finish()]
}

/// Caps decrease in `L`, `G0`, `M0`; the vanilla factor decreases in `β`
/// and `α`.
pub fn theory_monotonicity(cfg: &VerifyConfig) -> PropertyResult {
    let mut rng = rng_for(cfg, 13);
    let mut t = Tally::new("cap_and_rate_monotonicity", None, 0.0);
    for _ in 0..cfg.samples {
        let n = rng.random_range(1..100);
        let rc = RateConstants {
            l: rng.random_range(0.1..10.0),
            mu: rng.random_range(0.0..1.0),
            beta: rng.random_range(0.01..1.0),
            gamma_h: Some(1.0),
            g0: rng.random_range(1.0..3.0),
            m0: rng.random_range(1.0..200.0),
            n,
            p: rng.random_range(0.01..1.0),
            m: n,
        };
        let s = rng.random_range(1.01..3.0);
        let v = (|| {
            let mut worst = f64::NEG_INFINITY;
            for variant in [Variant::Saga, Variant::Lsvrg, Variant::Svrp] {
                let base = stepsize_cap(variant, &rc)?;
                for bigger in [
                    RateConstants { l: rc.l * s, ..rc },
                    RateConstants { g0: rc.g0 * s, ..rc },
                    RateConstants { m0: rc.m0 * s, ..rc },
                ] {
                    worst = worst.max(stepsize_cap(variant, &bigger)? - base);
                }
            }
            let alpha = rng.random_range(0.01..1.0);
            let q = contraction_factor(Variant::None, &rc, alpha)?;
            let qb = contraction_factor(Variant::None, &RateConstants { beta: rc.beta * s, ..rc }, alpha)?;
            let qa = contraction_factor(Variant::None, &rc, alpha * s)?;
            Ok(worst.max(qb - q).max(qa - q).max(0.0))
        })();
        t.observe(v, || json!({"constants": rc, "scale": s}));
    }
    t.finish()
}

/// Every iterate of a Burg run stays strictly inside the orthant.
pub fn positivity(cfg: &VerifyConfig) -> PropertyResult {
    let mut t = Tally::new("iterate_positivity", Some(&Burg), 0.0);
    let p = match poisson(8, 4, PoissonMode::Noisy, cfg) {
        Ok(p) => p,
        Err(e) => return failed_setup("iterate_positivity", Some(&Burg), e),
    };
    for variant in Variant::ALL {
        let mut run = RunConfig::new(variant, KernelId::Burg, StepSchedule::Constant { alpha: 0.5 }, 400);
        run.seed = cfg.seed;
        run.keep_iterates = true;
        let v = run_unified(&run, &p).map(|tr| {
            let min = tr.iterates.iter().flatten().copied().fold(f64::INFINITY, f64::min);
            if min > 0.0 { 0.0 } else { -min + f64::MIN_POSITIVE }
        });
        t.observe(v, || json!({"variant": variant.as_str()}));
    }
    t.finish()
}

/// The full suite over the given kernels plus the problem, estimator, prox
/// and theory properties.
pub fn run_verify_with_kernels(cfg: &VerifyConfig, kernels: &[&dyn Kernel]) -> VerifyReport {
    let mut properties = Vec::new();
    for k in kernels {
        properties.extend(kernel_properties(*k, cfg));
    }
    properties.extend(poisson_smoothness_and_convexity(cfg));
    properties.extend(poisson_gradients(cfg));
    properties.extend(unbiasedness(cfg));
    properties.extend(sigma_properties(cfg));
    properties.push(saga_mean_tracking(cfg));
    properties.extend(prox_agreement(cfg));
    properties.push(theory_monotonicity(cfg));
    properties.push(positivity(cfg));
    VerifyReport {
        seed: cfg.seed,
        samples: cfg.samples,
        passed: properties.iter().all(|p| p.passed),
        properties,
    }
}

pub fn run_verify(cfg: &VerifyConfig) -> VerifyReport {
    run_verify_with_kernels(cfg, &[&Euclidean, &Burg])
}

/// The Burg kernel with the sign of its mirror map flipped. Everything
/// else, including the closed-form divergences, is unchanged. Used to check
/// that the suite catches a broken kernel.
#[derive(Debug, Clone, Copy, Default)]
pub struct SignFlippedBurg;

impl Kernel for SignFlippedBurg {
    fn name(&self) -> &str {
        "burg_sign_flipped"
    }

    fn id(&self) -> Option<KernelId> {
        None
    }

    fn domain(&self) -> DomainKind {
        Burg.domain()
    }

    fn check_primal(&self, x: &[f64]) -> Result<()> {
        Burg.check_primal(x)
    }

    fn check_dual(&self, y: &[f64]) -> Result<()> {
        Burg.check_dual(y)
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Burg.value(x)
    }

    fn conjugate(&self, y: &[f64]) -> Result<f64> {
        Burg.conjugate(y)
    }

    fn mirror_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        Burg.mirror_into(x, out)?;
        out.iter_mut().for_each(|v| *v = -*v);
        Ok(())
    }

    fn inverse_mirror_into(&self, y: &[f64], out: &mut [f64]) -> Result<()> {
        Burg.inverse_mirror_into(y, out)
    }

    fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        Burg.bregman(x, y)
    }

    fn dual_bregman(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        Burg.dual_bregman(u, v)
    }
}
