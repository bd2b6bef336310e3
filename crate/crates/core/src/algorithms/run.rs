use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::{RunConfig, SamplingStreams, UpdateMode, Variant};
use super::estimator::EstimatorState;
use crate::error::{check_len, Error, Result};
use crate::kernels::Kernel;
use crate::linalg::all_finite;
use crate::problems::FiniteSumProblem;
use crate::prox::{mirror_step, solve_prox};
use crate::theory::sigma_sq_diagnostic;

/// A run whose objective gap exceeds this is stopped as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    Diverged,
    DomainExit,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Diverged => "diverged",
            RunStatus::DomainExit => "domain_exit",
        }
    }
}

/// One trace row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub iteration: usize,
    /// `iteration / n`
    pub epoch: f64,
    /// `F(x_k) − F*`, absent when `F*` is unknown.
    pub objective_gap: Option<f64>,
    /// `D_h(x*, x_k)`, absent when `x*` is unknown.
    pub bregman_dist_to_xstar: Option<f64>,
    pub sigma_sq: Option<f64>,
    /// The stepsize of the step that produced this iterate.
    pub stepsize: f64,
    /// Inner solver iterations spent since the previous record.
    pub inner_iterations: usize,
    pub wallclock_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<RunRecord>,
    pub status: RunStatus,
    /// Why the run stopped early.
    pub message: Option<String>,
    pub steps_taken: usize,
    pub final_iterate: Vec<f64>,
    /// `x_0, …, x_K` when `keep_iterates` is set.
    pub iterates: Vec<Vec<f64>>,
    /// `α_0, …, α_{K−1}` when `keep_iterates` is set.
    pub stepsizes: Vec<f64>,
    /// `max_k D_h(x_k, z_{k+1}) / α_k²` over the run, where
    /// `z_{k+1} = ∇h*(∇h(x_k) − α_k (∇f_{i_k}(x_k) − e_k))` is the explicit
    /// step from `x_k`. Explicit points outside the domain are skipped.
    pub max_step_divergence: f64,
}

/// Runs with the kernel named in the config.
pub fn run_unified<P: FiniteSumProblem + ?Sized>(cfg: &RunConfig, problem: &P) -> Result<Trace> {
    run_unified_with_kernel(cfg, problem, cfg.kernel.kernel())
}

enum StepError {
    Domain(String),
    Diverged(String),
}

fn classify(e: Error) -> std::result::Result<StepError, Error> {
    match e {
        Error::StepOutOfDomain(m) | Error::DomainViolation(m) => Ok(StepError::Domain(m)),
        e @ Error::InnerSolverDiverged { .. } => Ok(StepError::Diverged(e.to_string())),
        e => Err(e),
    }
}

pub fn run_unified_with_kernel<P: FiniteSumProblem + ?Sized>(
    cfg: &RunConfig,
    problem: &P,
    kernel: &dyn Kernel,
) -> Result<Trace> {
    cfg.validate()?;
    let (n, d) = (problem.n(), problem.dim());
    let x0 = cfg.x0_for(d);
    check_len(d, x0.len())?;
    kernel.check_primal(&x0)?;
    let record_every = cfg.record_every_for(n);
    let xstar = problem.minimizer();
    let fstar = problem.optimal_value();
    if cfg.track_sigma && xstar.is_none() {
        return Err(Error::MissingReference("σ² tracking needs a known minimizer".into()));
    }

    let mut streams = SamplingStreams::new(cfg.seed);
    let mut state = match cfg.variant {
        Variant::None => EstimatorState::none(),
        Variant::Saga => EstimatorState::saga(problem, &x0, cfg.track_sigma)?,
        Variant::Lsvrg => EstimatorState::lsvrg(problem, &x0, cfg.lsvrg_prob_for(n))?,
        Variant::Svrp => EstimatorState::svrp(
            problem,
            &x0,
            cfg.svrp_epoch_for(n),
            cfg.svrp_outer,
            cfg.svrp_restart,
            &mut streams,
        )?,
    };

    let start = Instant::now();
    let mut trace = Trace {
        records: Vec::new(),
        status: RunStatus::Completed,
        message: None,
        steps_taken: 0,
        final_iterate: Vec::new(),
        iterates: Vec::new(),
        stepsizes: Vec::new(),
        max_step_divergence: 0.0,
    };
    let mut x = x0;
    if cfg.keep_iterates {
        trace.iterates.push(x.clone());
    }
    let mut e = vec![0.0; d];
    let mut inner_since_record = 0;

    let record = |k: usize, x: &[f64], alpha: f64, inner: usize, state: &EstimatorState| -> Result<(RunRecord, bool)> {
        let value = problem.full_value(x)?;
        let gap = fstar.map(|f| value - f);
        let blown = !value.is_finite() || gap.unwrap_or(value) > DIVERGENCE_THRESHOLD;
        let dist = match xstar {
            Some(xs) => Some(kernel.bregman(xs, x)?),
            None => None,
        };
        let sigma = match (cfg.track_sigma, xstar) {
            (true, Some(xs)) if cfg.variant != Variant::None => {
                Some(sigma_sq_diagnostic(&state, problem, kernel, xs)?)
            }
            _ => None,
        };
        Ok((
            RunRecord {
                iteration: k,
                epoch: k as f64 / n as f64,
                objective_gap: gap,
                bregman_dist_to_xstar: dist,
                sigma_sq: sigma,
                stepsize: alpha,
                inner_iterations: inner,
                wallclock_seconds: cfg.timing.then(|| start.elapsed().as_secs_f64()),
            },
            blown,
        ))
    };

    let (rec, _) = record(0, &x, cfg.schedule.alpha_at(0), 0, &state)?;
    trace.records.push(rec);

    for k in 0..cfg.iterations {
        let alpha = cfg.schedule.alpha_at(k);
        let i = streams.index.random_range(0..n);
        state.compute_e_into(problem, i, &mut e)?;

        let explicit = problem.component_grad(i, &x).and_then(|mut v| {
            for (vj, ej) in v.iter_mut().zip(&e) {
                *vj -= ej;
            }
            mirror_step(kernel, &x, &v, alpha)
        });
        if let Some(dk) = explicit.as_ref().ok().and_then(|z| kernel.bregman(&x, z).ok()) {
            trace.max_step_divergence = trace.max_step_divergence.max(dk / (alpha * alpha));
        }
        let step = match cfg.update_mode {
            UpdateMode::Implicit => solve_prox(kernel, problem, i, &x, &e, alpha, &cfg.inner)
                .map(|r| (r.point, r.inner_iterations)),
            UpdateMode::Explicit => explicit.map(|p| (p, 0)),
        };
        let (next, inner) = match step.map_err(classify) {
            Ok(s) => s,
            Err(Ok(stop)) => {
                let (status, msg) = match stop {
                    StepError::Domain(m) => (RunStatus::DomainExit, m),
                    StepError::Diverged(m) => (RunStatus::Diverged, m),
                };
                log::warn!("run stopped at step {k}: {msg}");
                trace.status = status;
                trace.message = Some(format!("step {k}: {msg}"));
                break;
            }
            Err(Err(e)) => return Err(e),
        };
        if !all_finite(&next) {
            trace.status = RunStatus::Diverged;
            trace.message = Some(format!("step {k}: iterate is not finite"));
            break;
        }
        if let Err(err) = kernel.check_primal(&next) {
            trace.status = RunStatus::DomainExit;
            trace.message = Some(format!("step {k}: {err}"));
            break;
        }
        inner_since_record += inner;

        let restart = state.update(problem, kernel, i, &x, &mut streams)?;
        x = restart.unwrap_or(next);
        trace.steps_taken = k + 1;
        if cfg.keep_iterates {
            trace.iterates.push(x.clone());
            trace.stepsizes.push(alpha);
        }

        if (k + 1) % record_every == 0 || k + 1 == cfg.iterations {
            let (rec, blown) = match record(k + 1, &x, alpha, inner_since_record, &state) {
                Ok(r) => r,
                Err(err) => match classify(err) {
                    Ok(_) => {
                        trace.status = RunStatus::DomainExit;
                        trace.message = Some(format!("step {}: objective undefined", k + 1));
                        break;
                    }
                    Err(e) => return Err(e),
                },
            };
            inner_since_record = 0;
            trace.records.push(rec);
            if blown {
                trace.status = RunStatus::Diverged;
                trace.message = Some(format!(
                    "step {}: objective gap above {DIVERGENCE_THRESHOLD:e}",
                    k + 1
                ));
                break;
            }
        }
    }
    trace.final_iterate = x;
    Ok(trace)
}
