//! `ptmle`: ATE estimation on trial CSVs and the Monte Carlo studies.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use prognostic_tmle::data::{
    read_augmented_csv, read_historical_csv, read_trial_csv, write_augmented_csv, write_historical_csv,
};
use prognostic_tmle::dgp::{sample_historical, sample_trial, Effect, ScenarioConfig, Shift};
use prognostic_tmle::estimators::DEFAULT_ALPHA;
use prognostic_tmle::learners::LearnerSpec;
use prognostic_tmle::numerics::Rng;
use prognostic_tmle::sim::{
    default_estimators, default_sweep_grid, figure_one_scenarios, run_estimator, run_study, scenario_svg,
    sweep_svg, write_metrics_csv, EstimatorInputs, EstimatorKind, EstimatorSettings, MetricsRow,
    SimulationPlan,
};

const DEFAULT_SEED: u64 = 12345;

#[derive(Parser)]
#[command(name = "ptmle", version, about = "Covariate-adjusted ATE estimation for 1:1 randomized trials")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the ATE on a trial CSV and print the result as JSON.
    Estimate(EstimateArgs),
    /// Run the standard-error study over one or all six scenarios.
    Simulate(SimulateArgs),
    /// Run the power/coverage sweep over trial sizes.
    Sweep(SweepArgs),
    /// Write a simulated trial (with latent columns) as CSV.
    DumpDgp(DumpArgs),
}

#[derive(Args)]
struct LearnerArgs {
    /// Learner library as JSON, e.g. '[{"name":"ols"},{"name":"knn","hyperparameters":{"k":5}}]'.
    #[arg(long)]
    learners: Option<String>,
    /// Cross-fit folds for within-trial and TMLE.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Super learner selection folds.
    #[arg(long, default_value_t = 10)]
    sl_folds: usize,
    /// Cross-fit by leave-one-out instead of v-fold.
    #[arg(long)]
    leave_one_out: bool,
    /// Adjust for the within-trial score only, without the raw covariates.
    #[arg(long)]
    score_only: bool,
    /// Adjust for the raw covariates next to the historical prognostic score.
    #[arg(long)]
    historical_covariates: bool,
}

impl LearnerArgs {
    fn settings(&self) -> Result<EstimatorSettings, CliError> {
        let learners = match &self.learners {
            None => None,
            Some(text) => Some(
                serde_json::from_str::<Vec<LearnerSpec>>(text)
                    .map_err(|e| CliError::Usage(format!("--learners: {e}")))?,
            ),
        };
        Ok(EstimatorSettings {
            learners,
            sl_folds: self.sl_folds,
            cross_fit_folds: self.folds,
            leave_one_out: self.leave_one_out,
            adjust_covariates: !self.score_only,
            historical_covariates: self.historical_covariates,
        })
    }
}

#[derive(Args)]
struct EstimateArgs {
    /// Trial CSV with columns y, a, w1..wp (oracle needs the augmented columns too).
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    estimator: EstimatorKind,
    /// Historical control CSV with columns y, w1..wp.
    #[arg(long)]
    historical: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Randomization probability of the treated arm.
    #[arg(long, default_value_t = 0.5)]
    pi1: f64,
    #[command(flatten)]
    learners: LearnerArgs,
}

#[derive(Args)]
struct StudyArgs {
    /// SimulationPlan JSON; replaces the scenario and learner flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 250)]
    reps: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Comma-separated estimator names; all by default.
    #[arg(long, value_delimiter = ',')]
    estimators: Option<Vec<EstimatorKind>>,
    /// Metrics CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Optional SVG chart.
    #[arg(long)]
    svg: Option<PathBuf>,
    #[arg(long, env = "TRIALADJ_WORKERS")]
    workers: Option<usize>,
    #[command(flatten)]
    learners: LearnerArgs,
}

#[derive(Args)]
struct SimulateArgs {
    /// Effect surface; with neither --effect nor --shift all six scenarios run.
    #[arg(long)]
    effect: Option<Effect>,
    #[arg(long)]
    shift: Option<Shift>,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 4000)]
    n_hist: usize,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, default_value = "heterogeneous")]
    effect: Effect,
    /// Comma-separated trial sizes; n_hist = 10n.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<usize>>,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args)]
struct DumpArgs {
    #[arg(long, default_value = "heterogeneous")]
    effect: Effect,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write historical controls here.
    #[arg(long)]
    historical_out: Option<PathBuf>,
    #[arg(long, default_value = "none")]
    shift: Shift,
    #[arg(long, default_value_t = 4000)]
    n_hist: usize,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Failed(String),
}

impl CliError {
    fn failed(e: impl std::fmt::Display) -> Self {
        CliError::Failed(e.to_string())
    }
}

fn estimate(args: &EstimateArgs) -> Result<(), CliError> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!("--alpha {} outside (0, 1)", args.alpha)));
    }
    let settings = args.learners.settings()?;
    let kind = args.estimator;
    let augmented = if kind == EstimatorKind::Oracle {
        Some(read_augmented_csv(&args.data).map_err(CliError::failed)?)
    } else {
        None
    };
    let trial = match &augmented {
        Some(a) => a.trial.clone(),
        None => read_trial_csv(&args.data).map_err(CliError::failed)?,
    };
    let trial = trial.with_pi1(args.pi1).map_err(CliError::failed)?;
    let augmented = augmented.map(|mut a| {
        a.trial = trial.clone();
        a
    });
    let historical = match (&args.historical, kind.needs_historical()) {
        (Some(p), _) => Some(read_historical_csv(p).map_err(CliError::failed)?),
        (None, true) => return Err(CliError::Usage("prog-historical needs --historical".into())),
        (None, false) => None,
    };
    let library = settings.library().map_err(CliError::failed)?;
    let cross_fit = kind.needs_cross_fit().then(|| {
        settings
            .cross_fit(library.clone(), args.seed)
            .predict(&trial)
            .map_err(|e| e.to_string())
    });
    let inputs = EstimatorInputs {
        trial: &trial,
        historical: historical.as_ref(),
        augmented: augmented.as_ref(),
        cross_fit: cross_fit.as_ref(),
    };
    let mut result = run_estimator(kind, &inputs, &settings, &library, args.seed).map_err(CliError::Failed)?;
    result.set_alpha(args.alpha);
    println!("{}", result.to_json());
    Ok(())
}

impl StudyArgs {
    fn plan(&self, scenarios: Vec<ScenarioConfig>, sweep: Option<Vec<usize>>) -> Result<SimulationPlan, CliError> {
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Failed(format!("{}: {e}", path.display())))?;
            return serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())));
        }
        Ok(SimulationPlan {
            scenarios,
            estimators: self.estimators.clone().unwrap_or_else(default_estimators),
            reps: self.reps,
            master_seed: self.seed,
            alpha: self.alpha,
            sweep,
            settings: self.learners.settings()?,
        })
    }

    fn run(&self, plan: &SimulationPlan, chart: fn(&[MetricsRow]) -> String) -> Result<(), CliError> {
        plan.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let workers = self.workers.unwrap_or_else(prognostic_tmle::sim::default_workers);
        let out = run_study(plan, workers).map_err(CliError::failed)?;
        let file = File::create(&self.out).map_err(|e| io_error(&self.out, e))?;
        write_metrics_csv(&out.rows, BufWriter::new(file)).map_err(CliError::failed)?;
        if let Some(path) = &self.svg {
            std::fs::write(path, chart(&out.rows)).map_err(|e| io_error(path, e))?;
        }
        summarize(&out.rows);
        Ok(())
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Failed(format!("{}: {e}", path.display()))
}

fn summarize(rows: &[MetricsRow]) {
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(
        out,
        "{:<28} {:>4} {:<16} {:>8} {:>8} {:>7} {:>7} {:>5}",
        "scenario", "n", "estimator", "est_se", "emp_se", "power", "cover", "fail"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<28} {:>4} {:<16} {:>8} {:>8} {:>7} {:>7} {:>5}",
            r.scenario,
            r.n,
            r.estimator,
            fmt(r.mean_est_se),
            fmt(r.empirical_se),
            fmt(r.power),
            fmt(r.coverage),
            r.failures
        );
    }
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let scenarios = if args.effect.is_none() && args.shift.is_none() {
        figure_one_scenarios(args.n, args.n_hist)
    } else {
        vec![ScenarioConfig::new(
            args.effect.unwrap_or(Effect::Heterogeneous),
            args.shift.unwrap_or(Shift::None),
            args.n,
            args.n_hist,
        )]
    };
    let plan = args.study.plan(scenarios, None)?;
    args.study.run(&plan, scenario_svg)
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let grid = args.grid.clone().unwrap_or_else(default_sweep_grid);
    let first = *grid.first().ok_or_else(|| CliError::Usage("empty --grid".into()))?;
    let scenario = ScenarioConfig::new(args.effect, Shift::None, first, 10 * first);
    let plan = args.study.plan(vec![scenario], Some(grid))?;
    if plan.sweep.is_none() {
        return Err(CliError::Usage("sweep plan has no sweep sizes".into()));
    }
    args.study.run(&plan, sweep_svg)
}

fn dump(args: &DumpArgs) -> Result<(), CliError> {
    ScenarioConfig::new(args.effect, args.shift, args.n, args.n_hist)
        .validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let aug = sample_trial(args.n, args.effect, &mut Rng::with_stream(args.seed, 0)).map_err(CliError::failed)?;
    write_augmented_csv(&aug, &args.out).map_err(CliError::failed)?;
    if let Some(path) = &args.historical_out {
        let hist = sample_historical(args.n_hist, args.shift, &mut Rng::with_stream(args.seed, 1))
            .map_err(CliError::failed)?;
        write_historical_csv(&hist, path).map_err(CliError::failed)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::DumpDgp(a) => dump(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(CliError::Failed(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
