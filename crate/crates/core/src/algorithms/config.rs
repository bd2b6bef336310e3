use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DomainKind, KernelId};
use crate::prox::InnerSolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    None,
    Saga,
    Lsvrg,
    Svrp,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::None, Variant::Saga, Variant::Lsvrg, Variant::Svrp];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::None => "none",
            Variant::Saga => "saga",
            Variant::Lsvrg => "lsvrg",
            Variant::Svrp => "svrp",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "bsppa" => Ok(Variant::None),
            "saga" | "bsapa" => Ok(Variant::Saga),
            "lsvrg" | "blsvrp" => Ok(Variant::Lsvrg),
            "svrp" | "bsvrp" => Ok(Variant::Svrp),
            other => Err(Error::InvalidConfig(format!(
                "unknown variant '{other}' (expected none, saga, lsvrg or svrp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateMode {
    #[default]
    Implicit,
    Explicit,
}

impl FromStr for UpdateMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "implicit" => Ok(UpdateMode::Implicit),
            "explicit" => Ok(UpdateMode::Explicit),
            other => Err(Error::InvalidConfig(format!("unknown update mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvrpOuter {
    /// `x̃_{s+1} = x_{ξ_s}`, `ξ_s ~ U{0, …, m−1}`.
    #[default]
    RandomIndex,
    /// `x̃_{s+1} = (1/m) Σ_{k<m} x_k`.
    Average,
}

impl FromStr for SvrpOuter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random_index" => Ok(SvrpOuter::RandomIndex),
            "average" => Ok(SvrpOuter::Average),
            other => Err(Error::InvalidConfig(format!("unknown svrp outer rule '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant { alpha: f64 },
    /// `α_k = α₀ / √(k+1)`
    InvSqrt { alpha0: f64 },
    /// `α_k = α₀ / (k+1)`
    InvK { alpha0: f64 },
}

impl StepSchedule {
    pub fn base(&self) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::InvSqrt { alpha0 } | StepSchedule::InvK { alpha0 } => alpha0,
        }
    }

    pub fn alpha_at(&self, k: usize) -> f64 {
        match *self {
            StepSchedule::Constant { alpha } => alpha,
            StepSchedule::InvSqrt { alpha0 } => alpha0 / ((k + 1) as f64).sqrt(),
            StepSchedule::InvK { alpha0 } => alpha0 / (k + 1) as f64,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StepSchedule::Constant { .. } => "constant",
            StepSchedule::InvSqrt { .. } => "inv_sqrt",
            StepSchedule::InvK { .. } => "inv_k",
        }
    }

    pub fn from_parts(kind: &str, alpha: f64) -> Result<Self> {
        match kind {
            "constant" => Ok(StepSchedule::Constant { alpha }),
            "inv_sqrt" => Ok(StepSchedule::InvSqrt { alpha0: alpha }),
            "inv_k" => Ok(StepSchedule::InvK { alpha0: alpha }),
            other => Err(Error::InvalidConfig(format!(
                "unknown schedule '{other}' (expected constant, inv_sqrt or inv_k)"
            ))),
        }
    }
}

/// Stream ids split from the master seed.
pub const STREAM_INDEX: u64 = 0;
pub const STREAM_BERNOULLI: u64 = 1;
pub const STREAM_EPOCH: u64 = 2;

/// Independent generators for `i_k`, `ε_k` and `ξ_s`, all keyed by the
/// master seed. Changing one consumer never shifts another's draws.
#[derive(Debug, Clone)]
pub struct SamplingStreams {
    pub index: ChaCha8Rng,
    pub bernoulli: ChaCha8Rng,
    pub epoch: ChaCha8Rng,
}

impl SamplingStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        SamplingStreams {
            index: stream(STREAM_INDEX),
            bernoulli: stream(STREAM_BERNOULLI),
            epoch: stream(STREAM_EPOCH),
        }
    }
}

fn default_true() -> bool {
    true
}

/// Everything that determines a run besides the problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub variant: Variant,
    #[serde(default)]
    pub update_mode: UpdateMode,
    pub kernel: KernelId,
    pub schedule: StepSchedule,
    /// Iteration budget `K`.
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Anchor refresh probability; defaults to `1/n`.
    #[serde(default)]
    pub lsvrg_prob: Option<f64>,
    /// Epoch length; defaults to `n`.
    #[serde(default)]
    pub svrp_epoch: Option<usize>,
    #[serde(default)]
    pub svrp_outer: SvrpOuter,
    /// Restart the inner loop at the new anchor after each epoch.
    #[serde(default = "default_true")]
    pub svrp_restart: bool,
    #[serde(default)]
    pub inner: InnerSolverConfig,
    /// Record cadence; defaults to `n` (once per epoch).
    #[serde(default)]
    pub record_every: Option<usize>,
    /// Starting point; defaults to ones on the orthant, zeros on the full space.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    /// Compute `σ_k²` at record points (requires a known minimizer).
    #[serde(default)]
    pub track_sigma: bool,
    /// Keep every iterate and stepsize in the trace.
    #[serde(default)]
    pub keep_iterates: bool,
    /// Fill the wall-clock column. Off by default so traces are reproducible
    /// byte for byte.
    #[serde(default)]
    pub timing: bool,
}

impl RunConfig {
    pub fn new(variant: Variant, kernel: KernelId, schedule: StepSchedule, iterations: usize) -> Self {
        RunConfig {
            variant,
            update_mode: UpdateMode::Implicit,
            kernel,
            schedule,
            iterations,
            seed: 0,
            lsvrg_prob: None,
            svrp_epoch: None,
            svrp_outer: SvrpOuter::RandomIndex,
            svrp_restart: true,
            inner: InnerSolverConfig::default(),
            record_every: None,
            x0: None,
            track_sigma: false,
            keep_iterates: false,
            timing: false,
        }
    }

    pub fn lsvrg_prob_for(&self, n: usize) -> f64 {
        self.lsvrg_prob.unwrap_or(1.0 / n as f64)
    }

    pub fn svrp_epoch_for(&self, n: usize) -> usize {
        self.svrp_epoch.unwrap_or(n)
    }

    pub fn record_every_for(&self, n: usize) -> usize {
        self.record_every.unwrap_or(n)
    }

    pub fn x0_for(&self, d: usize) -> Vec<f64> {
        self.x0.clone().unwrap_or_else(|| match self.kernel.kernel().domain() {
            DomainKind::PositiveOrthant => vec![1.0; d],
            DomainKind::FullSpace => vec![0.0; d],
        })
    }

    /// Fills every defaulted field for a problem with `n` components in
    /// dimension `d`, so the result is self-describing.
    pub fn resolved(&self, n: usize, d: usize) -> RunConfig {
        let mut out = self.clone();
        out.lsvrg_prob = Some(self.lsvrg_prob_for(n));
        out.svrp_epoch = Some(self.svrp_epoch_for(n));
        out.record_every = Some(self.record_every_for(n));
        out.x0 = Some(self.x0_for(d));
        out
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.schedule.base();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidConfig(format!("stepsize must be positive (got {a})")));
        }
        if let Some(p) = self.lsvrg_prob {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidConfig(format!("lsvrg_prob must lie in (0, 1] (got {p})")));
            }
        }
        if self.svrp_epoch == Some(0) {
            return Err(Error::InvalidConfig("svrp_epoch must be >= 1".into()));
        }
        if self.record_every == Some(0) {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        self.inner.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn schedules() {
        let s = StepSchedule::InvSqrt { alpha0: 2.0 };
        assert_eq!(s.alpha_at(0), 2.0);
        assert_eq!(s.alpha_at(3), 1.0);
        let s = StepSchedule::InvK { alpha0: 2.0 };
        assert_eq!(s.alpha_at(3), 0.5);
        assert_eq!(StepSchedule::Constant { alpha: 0.3 }.alpha_at(99), 0.3);
        assert!(StepSchedule::from_parts("cosine", 1.0).is_err());
    }

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a = SamplingStreams::new(5);
        let mut b = SamplingStreams::new(5);
        let x: Vec<u64> = (0..4).map(|_| a.index.random()).collect();
        let y: Vec<u64> = (0..4).map(|_| b.index.random()).collect();
        assert_eq!(x, y);
        let z: Vec<u64> = (0..4).map(|_| b.bernoulli.random()).collect();
        assert_ne!(x, z);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::new(Variant::Saga, KernelId::Burg, StepSchedule::Constant { alpha: 0.1 }, 10);
        assert!(c.validate().is_ok());
        c.lsvrg_prob = Some(0.0);
        assert!(c.validate().is_err());
        c.lsvrg_prob = Some(1.0);
        c.svrp_epoch = Some(0);
        assert!(c.validate().is_err());
        c.svrp_epoch = None;
        c.schedule = StepSchedule::Constant { alpha: -1.0 };
        assert!(c.validate().is_err());
    }

    #[test]
    fn defaults_resolve_against_problem_size() {
        let c = RunConfig::new(Variant::Lsvrg, KernelId::Burg, StepSchedule::Constant { alpha: 0.1 }, 10);
        let r = c.resolved(8, 3);
        assert_eq!(r.lsvrg_prob, Some(0.125));
        assert_eq!(r.svrp_epoch, Some(8));
        assert_eq!(r.record_every, Some(8));
        assert_eq!(r.x0, Some(vec![1.0; 3]));
        let e = RunConfig::new(Variant::None, KernelId::Euclidean, StepSchedule::Constant { alpha: 0.1 }, 1);
        assert_eq!(e.x0_for(2), vec![0.0; 2]);
    }

    #[test]
    fn config_json_round_trip() {
        let c = RunConfig::new(Variant::Svrp, KernelId::Euclidean, StepSchedule::InvK { alpha0: 0.5 }, 7);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<RunConfig>(&s).unwrap(), c);
        let minimal = r#"{"variant":"saga","kernel":"burg","schedule":{"kind":"constant","alpha":0.01},"iterations":5}"#;
        let m: RunConfig = serde_json::from_str(minimal).unwrap();
        assert!(m.svrp_restart);
        assert_eq!(m.inner, InnerSolverConfig::default());
    }
}
