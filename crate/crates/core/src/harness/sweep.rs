//! Grids of runs: variants × stepsizes × seeds.
//!
//! Traces go to `<out>/<label>/<alpha>/<seed>.csv` where `label` is the
//! variant name, suffixed with the schedule when it is not constant. The
//! summary is `<out>/summary.csv`, one row per cell in grid order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::experiment::{execute_run_on, ExperimentConfig, ProblemSpec};
use super::records::{format_float, SCHEMA_VERSION};
use crate::algorithms::{RunConfig, StepSchedule, Trace, UpdateMode, Variant};
use crate::error::{Error, Result};
use crate::kernels::KernelId;
use crate::problems::FiniteSumProblem;
use crate::prox::InnerSolverConfig;

/// Caps the number of worker threads.
pub const THREADS_ENV: &str = "BSPPA_THREADS";

pub const SUMMARY_HEADER: [&str; 11] = [
    "schema_version",
    "variant",
    "schedule",
    "alpha",
    "seed",
    "status",
    "final_gap",
    "best_gap",
    "steps_taken",
    "trace",
    "error",
];

fn constant() -> String {
    "constant".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub problem: ProblemSpec,
    pub kernel: KernelId,
    pub variants: Vec<Variant>,
    /// `constant`, `inv_sqrt` or `inv_k`; the alphas are the base stepsizes.
    #[serde(default = "constant")]
    pub schedule: String,
    pub alphas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub iterations: usize,
    #[serde(default)]
    pub update_mode: UpdateMode,
    #[serde(default)]
    pub record_every: Option<usize>,
    #[serde(default)]
    pub lsvrg_prob: Option<f64>,
    #[serde(default)]
    pub svrp_epoch: Option<usize>,
    #[serde(default)]
    pub inner: InnerSolverConfig,
    #[serde(default)]
    pub enforce_cap: bool,
    #[serde(default)]
    pub gamma_h: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub label: String,
    pub experiment: ExperimentConfig,
    /// Relative to the sweep output directory.
    pub trace: PathBuf,
}

impl SweepSpec {
    pub fn from_file(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn label(&self, variant: Variant) -> String {
        if self.schedule == "constant" {
            variant.to_string()
        } else {
            format!("{variant}_{}", self.schedule)
        }
    }

    /// Cells in grid order: variant, then alpha, then seed.
    pub fn cells(&self) -> Result<Vec<SweepCell>> {
        if self.variants.is_empty() || self.alphas.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig("sweep grid has an empty axis".into()));
        }
        let mut out = Vec::new();
        for &variant in &self.variants {
            for &alpha in &self.alphas {
                let schedule = StepSchedule::from_parts(&self.schedule, alpha)?;
                for &seed in &self.seeds {
                    let mut run = RunConfig::new(variant, self.kernel, schedule, self.iterations);
                    run.seed = seed;
                    run.update_mode = self.update_mode;
                    run.record_every = self.record_every;
                    run.lsvrg_prob = self.lsvrg_prob;
                    run.svrp_epoch = self.svrp_epoch;
                    run.inner = self.inner;
                    let label = self.label(variant);
                    let trace: PathBuf =
                        [label.clone(), format_float(alpha), format!("{seed}.csv")].iter().collect();
                    out.push(SweepCell {
                        label,
                        experiment: ExperimentConfig {
                            problem: self.problem.clone(),
                            run,
                            enforce_cap: self.enforce_cap,
                            gamma_h: self.gamma_h,
                        },
                        trace,
                    });
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: String,
    pub schedule: String,
    pub alpha: f64,
    pub seed: u64,
    /// A run status, or `error` when the cell could not run.
    pub status: String,
    pub final_gap: Option<f64>,
    pub best_gap: Option<f64>,
    pub steps_taken: usize,
    pub trace: PathBuf,
    pub error: Option<String>,
}

fn summarize(cell: &SweepCell, result: Result<Trace>) -> SummaryRow {
    let mut row = SummaryRow {
        variant: cell.label.clone(),
        schedule: cell.experiment.run.schedule.name().to_string(),
        alpha: cell.experiment.run.schedule.base(),
        seed: cell.experiment.run.seed,
        status: "error".into(),
        final_gap: None,
        best_gap: None,
        steps_taken: 0,
        trace: cell.trace.clone(),
        error: None,
    };
    match result {
        Ok(trace) => {
            let gaps: Vec<f64> = trace.records.iter().filter_map(|r| r.objective_gap).collect();
            row.status = trace.status.as_str().into();
            row.final_gap = gaps.last().copied();
            row.best_gap = gaps.iter().copied().reduce(f64::min);
            row.steps_taken = trace.steps_taken;
            row.error = trace.message;
        }
        Err(e) => row.error = Some(e.to_string()),
    }
    row
}

/// Worker count: `BSPPA_THREADS` when set to a positive integer, else the
/// available parallelism.
pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&t| t > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every cell and writes the traces, their manifests and the summary.
/// A failing cell is recorded in the summary and does not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, out: &Path) -> Result<Vec<SummaryRow>> {
    let cells = spec.cells()?;
    let problem = spec.problem.load()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    let problem: &dyn FiniteSumProblem = problem.as_ref();
    let rows: Vec<SummaryRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let result = execute_run_on(&cell.experiment, problem, &out.join(&cell.trace));
                if let Err(e) = &result {
                    log::warn!("cell {}: {e}", cell.trace.display());
                }
                summarize(cell, result.map(|o| o.trace))
            })
            .collect()
    });
    write_summary(&out.join("summary.csv"), &rows)?;
    Ok(rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(format_float).unwrap_or_default()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::InvalidConfig(e.to_string()))?;
    let io = |e: csv::Error| Error::InvalidConfig(format!("summary csv: {e}"));
    w.write_record(SUMMARY_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            SCHEMA_VERSION.to_string(),
            r.variant.clone(),
            r.schedule.clone(),
            format_float(r.alpha),
            r.seed.to_string(),
            r.status.clone(),
            opt(r.final_gap),
            opt(r.best_gap),
            r.steps_taken.to_string(),
            r.trace.to_string_lossy().into_owned(),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}
