//! `bsppa`: run, sweep, verify and generate instances from the command line.
//!
//! Exit codes: 0 on success, 1 on a configuration or I/O error, 2 when a
//! run diverged, 3 when a run left the kernel domain. `verify` exits 1 when
//! any property fails.

use std::path::PathBuf;
use std::process::ExitCode;

use bsppa_core::algorithms::{RunConfig, RunStatus, StepSchedule, SvrpOuter, UpdateMode, Variant};
use bsppa_core::harness::verify::{run_verify, VerifyConfig, DEFAULT_SAMPLES};
use bsppa_core::harness::{execute_run, run_sweep, ExperimentConfig, ProblemSpec, SweepSpec};
use bsppa_core::kernels::KernelId;
use bsppa_core::problems::{
    make_poisson_instance_with_noise, PoissonMode, ReferenceConfig, NOISE_SCALE,
};
use bsppa_core::prox::InnerStepRule;
use bsppa_core::{Error, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsppa", version, about = "Bregman stochastic proximal point experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace CSV and manifest.
    Run(RunArgs),
    /// Run a grid of variants, stepsizes and seeds.
    Sweep(SweepArgs),
    /// Check the property suite and write a JSON report.
    Verify(VerifyArgs),
    /// Generate a Poisson instance file.
    Gen(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config or a run manifest; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Instance file written by `bsppa gen`.
    #[arg(long)]
    instance: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    kernel: Option<KernelId>,
    /// constant, inv_sqrt or inv_k.
    #[arg(long)]
    schedule: Option<String>,
    /// Constant stepsize, or the base stepsize of a vanishing schedule.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    update_mode: Option<UpdateMode>,
    #[arg(long)]
    lsvrg_prob: Option<f64>,
    #[arg(long)]
    svrp_epoch: Option<usize>,
    #[arg(long)]
    svrp_outer: Option<SvrpOuter>,
    /// Keep the inner iterate across svrp epochs instead of restarting at the anchor.
    #[arg(long)]
    svrp_no_restart: bool,
    #[arg(long)]
    record_every: Option<usize>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    inner_max_iters: Option<usize>,
    /// Use the fixed inner step instead of backtracking.
    #[arg(long)]
    inner_fixed_step: bool,
    /// Reject stepsizes at or above the theoretical cap.
    #[arg(long)]
    enforce_cap: bool,
    #[arg(long)]
    gamma_h: Option<f64>,
    /// Record the variance diagnostic (needs a known minimizer).
    #[arg(long)]
    track_sigma: bool,
    /// Fill the wall-clock column.
    #[arg(long)]
    timing: bool,
    /// Trace CSV path; the manifest goes next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON sweep spec.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
    /// Report path; printed to stdout when absent.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long, default_value = "interpolation")]
    mode: PoissonMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Log-scale noise of noisy measurements.
    #[arg(long, default_value_t = NOISE_SCALE)]
    noise: f64,
    /// Skip the reference run for noisy instances.
    #[arg(long)]
    no_reference: bool,
    #[arg(long)]
    out: PathBuf,
}

fn missing(flag: &str) -> Error {
    Error::InvalidConfig(format!("--{flag} is required without --config"))
}

fn build_experiment(a: &RunArgs) -> Result<ExperimentConfig> {
    let mut exp = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let problem = ProblemSpec::Instance {
                path: a.instance.clone().ok_or_else(|| missing("instance"))?,
            };
            let schedule = StepSchedule::from_parts(
                a.schedule.as_deref().unwrap_or("constant"),
                a.alpha.ok_or_else(|| missing("alpha"))?,
            )?;
            ExperimentConfig {
                problem,
                run: RunConfig::new(
                    a.variant.ok_or_else(|| missing("variant"))?,
                    a.kernel.ok_or_else(|| missing("kernel"))?,
                    schedule,
                    a.iters.ok_or_else(|| missing("iters"))?,
                ),
                enforce_cap: false,
                gamma_h: None,
            }
        }
    };
    let run = &mut exp.run;
    if let Some(path) = &a.instance {
        exp.problem = ProblemSpec::Instance { path: path.clone() };
    }
    if let Some(v) = a.variant {
        run.variant = v;
    }
    if let Some(k) = a.kernel {
        run.kernel = k;
    }
    if a.schedule.is_some() || a.alpha.is_some() {
        run.schedule = StepSchedule::from_parts(
            a.schedule.as_deref().unwrap_or(run.schedule.name()),
            a.alpha.unwrap_or(run.schedule.base()),
        )?;
    }
    if let Some(k) = a.iters {
        run.iterations = k;
    }
    if let Some(s) = a.seed {
        run.seed = s;
    }
    if let Some(m) = a.update_mode {
        run.update_mode = m;
    }
    if a.lsvrg_prob.is_some() {
        run.lsvrg_prob = a.lsvrg_prob;
    }
    if a.svrp_epoch.is_some() {
        run.svrp_epoch = a.svrp_epoch;
    }
    if let Some(o) = a.svrp_outer {
        run.svrp_outer = o;
    }
    if a.svrp_no_restart {
        run.svrp_restart = false;
    }
    if a.record_every.is_some() {
        run.record_every = a.record_every;
    }
    if let Some(t) = a.inner_tol {
        run.inner.tolerance = t;
    }
    if let Some(m) = a.inner_max_iters {
        run.inner.max_inner_iterations = m;
    }
    if a.inner_fixed_step {
        run.inner.step_rule = InnerStepRule::Fixed;
    }
    run.track_sigma |= a.track_sigma;
    run.timing |= a.timing;
    exp.enforce_cap |= a.enforce_cap;
    if a.gamma_h.is_some() {
        exp.gamma_h = a.gamma_h;
    }
    Ok(exp)
}

fn cmd_run(a: &RunArgs) -> Result<ExitCode> {
    let exp = build_experiment(a)?;
    let out = execute_run(&exp, &a.out)?;
    let last_gap = out.trace.records.last().and_then(|r| r.objective_gap);
    match &out.trace.message {
        Some(m) => eprintln!("{}: {m}", out.trace.status.as_str()),
        None => log::info!("{} after {} steps, final gap {last_gap:?}", out.trace.status.as_str(), out.trace.steps_taken),
    }
    Ok(match out.trace.status {
        RunStatus::Completed => ExitCode::SUCCESS,
        RunStatus::Diverged => ExitCode::from(2),
        RunStatus::DomainExit => ExitCode::from(3),
    })
}

fn cmd_sweep(a: &SweepArgs) -> Result<ExitCode> {
    let spec = SweepSpec::from_file(&a.spec)?;
    let rows = run_sweep(&spec, &a.out)?;
    let failed = rows.iter().filter(|r| r.status != "completed").count();
    eprintln!("{} cells, {failed} not completed; summary in {}", rows.len(), a.out.join("summary.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: &VerifyArgs) -> Result<ExitCode> {
    let report = run_verify(&VerifyConfig { seed: a.seed, samples: a.samples });
    let text = serde_json::to_string_pretty(&report)?;
    match &a.report {
        Some(path) => std::fs::write(path, text)?,
        None => println!("{text}"),
    }
    for p in report.failures() {
        eprintln!("FAIL {} ({}): max violation {:e}", p.name, p.kernel.as_deref().unwrap_or("-"), p.max_violation);
    }
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_gen(a: &GenArgs) -> Result<ExitCode> {
    let mut inst = make_poisson_instance_with_noise(a.n, a.d, a.mode, a.seed, a.noise)?;
    if !a.no_reference {
        inst.compute_reference(&ReferenceConfig::default())?;
    }
    inst.save(&a.out)?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Gen(a) => cmd_gen(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(1)
    })
}
