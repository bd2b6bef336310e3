use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::records::{write_trace_file, SCHEMA_VERSION};
use crate::algorithms::{
    run_unified, RunConfig, RunStatus, Trace, Variant, STREAM_BERNOULLI, STREAM_EPOCH,
    STREAM_INDEX,
};
use crate::error::{Error, Result};
use crate::problems::{
    make_poisson_instance_with_noise, FiniteSumProblem, PoissonInstance, PoissonMode,
    ReferenceConfig, SeparableQuadratic, NOISE_SCALE,
};
use crate::theory::{stepsize_cap, RateConstants};

pub const MANIFEST_FORMAT: &str = "bsppa-manifest/1";

/// Where the problem instance comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// A JSON instance file written by `bsppa gen` (Poisson) or a
    /// serialized separable quadratic.
    Instance { path: PathBuf },
    /// A Poisson instance generated on the fly.
    Generate {
        n: usize,
        d: usize,
        mode: PoissonMode,
        seed: u64,
        #[serde(default)]
        noise: Option<f64>,
    },
    /// A random separable quadratic.
    Quadratic {
        n: usize,
        d: usize,
        h_lo: f64,
        h_hi: f64,
        seed: u64,
    },
}

impl ProblemSpec {
    /// Builds the problem. Noisy Poisson instances without a cached `F*`
    /// get one from a reference run.
    pub fn load(&self) -> Result<Box<dyn FiniteSumProblem>> {
        match self {
            ProblemSpec::Instance { path } => {
                let text = std::fs::read_to_string(path)?;
                let value: serde_json::Value = serde_json::from_str(&text)?;
                if value.get("format").is_some() {
                    let mut inst = PoissonInstance::from_json(&text)?;
                    inst.compute_reference(&ReferenceConfig::default())?;
                    Ok(Box::new(inst))
                } else {
                    Ok(Box::new(SeparableQuadratic::from_json(&text)?))
                }
            }
            ProblemSpec::Generate { n, d, mode, seed, noise } => {
                let mut inst = make_poisson_instance_with_noise(
                    *n,
                    *d,
                    *mode,
                    *seed,
                    noise.unwrap_or(NOISE_SCALE),
                )?;
                inst.compute_reference(&ReferenceConfig::default())?;
                Ok(Box::new(inst))
            }
            ProblemSpec::Quadratic { n, d, h_lo, h_hi, seed } => {
                Ok(Box::new(SeparableQuadratic::random(*n, *d, *h_lo, *h_hi, *seed)?))
            }
        }
    }
}

/// A complete, file-expressible description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub run: RunConfig,
    /// Reject stepsizes at or above the theoretical cap.
    #[serde(default)]
    pub enforce_cap: bool,
    /// Symmetry coefficient of the kernel, used for the cap and rates.
    #[serde(default)]
    pub gamma_h: Option<f64>,
}

impl ExperimentConfig {
    /// Reads a config file. A run manifest is accepted too, in which case
    /// the recorded (fully resolved) experiment is returned.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        if value.get("format").and_then(|f| f.as_str()) == Some(MANIFEST_FORMAT) {
            let m: Manifest = serde_json::from_value(value)?;
            return Ok(m.experiment);
        }
        Ok(serde_json::from_value(value)?)
    }

    /// The strict stepsize cap for this variant on `problem`; `None` when
    /// the variant has no cap.
    pub fn stepsize_cap(&self, problem: &dyn FiniteSumProblem) -> Result<Option<f64>> {
        let n = problem.n();
        let mut rc = RateConstants::for_problem(problem, self.run.kernel, self.gamma_h);
        rc.p = self.run.lsvrg_prob_for(n);
        rc.m = self.run.svrp_epoch_for(n);
        let cap = stepsize_cap(self.run.variant, &rc)?;
        Ok(cap.is_finite().then_some(cap))
    }
}

/// Sub-stream ids of the sampling RNG; all streams share `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreamIds {
    pub seed: u64,
    pub index: u64,
    pub bernoulli: u64,
    pub epoch: u64,
}

impl StreamIds {
    pub fn for_seed(seed: u64) -> Self {
        StreamIds {
            seed,
            index: STREAM_INDEX,
            bernoulli: STREAM_BERNOULLI,
            epoch: STREAM_EPOCH,
        }
    }
}

/// Written next to every trace. Feeding it back to `bsppa run --config`
/// reproduces the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub schema_version: u32,
    pub experiment: ExperimentConfig,
    pub streams: StreamIds,
    pub n: usize,
    pub d: usize,
    pub rel_smoothness: f64,
    pub optimal_value: Option<f64>,
    pub stepsize_cap: Option<f64>,
    pub status: RunStatus,
    pub message: Option<String>,
    pub steps_taken: usize,
    pub trace_file: String,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: Trace,
    pub manifest: Manifest,
}

/// `trace.csv` → `trace.manifest.json`
pub fn manifest_path(trace_path: &Path) -> PathBuf {
    trace_path.with_extension("manifest.json")
}

/// Loads the problem, runs, and writes the trace CSV and its manifest.
pub fn execute_run(exp: &ExperimentConfig, out: &Path) -> Result<RunOutcome> {
    let problem = exp.problem.load()?;
    execute_run_on(exp, problem.as_ref(), out)
}

/// As [`execute_run`] on an already loaded problem.
pub fn execute_run_on(
    exp: &ExperimentConfig,
    problem: &dyn FiniteSumProblem,
    out: &Path,
) -> Result<RunOutcome> {
    let (n, d) = (problem.n(), problem.dim());
    let resolved = ExperimentConfig {
        run: exp.run.resolved(n, d),
        ..exp.clone()
    };
    resolved.run.validate()?;
    let cap = match resolved.stepsize_cap(problem) {
        Ok(c) => c,
        Err(e) if resolved.enforce_cap => return Err(e),
        Err(_) => None,
    };
    if resolved.enforce_cap {
        let alpha = resolved.run.schedule.base();
        if let Some(cap) = cap.filter(|c| alpha >= *c) {
            return Err(Error::InvalidConfig(format!(
                "stepsize {alpha} is not below the {} cap {cap}",
                resolved.run.variant
            )));
        }
    }
    if resolved.run.variant == Variant::None && resolved.run.track_sigma {
        log::warn!("vanilla runs have no variance state; sigma_sq stays empty");
    }

    let trace = run_unified(&resolved.run, problem)?;
    write_trace_file(out, &trace)?;

    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        schema_version: SCHEMA_VERSION,
        streams: StreamIds::for_seed(resolved.run.seed),
        n,
        d,
        rel_smoothness: problem.rel_smoothness(),
        optimal_value: problem.optimal_value(),
        stepsize_cap: cap,
        status: trace.status,
        message: trace.message.clone(),
        steps_taken: trace.steps_taken,
        trace_file: out
            .file_name()
            .map(|f| f.to_string_lossy().into_owned())
            .unwrap_or_default(),
        experiment: resolved,
    };
    std::fs::write(manifest_path(out), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunOutcome { trace, manifest })
}
