//! Monte Carlo studies: replicate trials, run every estimator on the same
//! draws, and summarise standard errors, power and coverage.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{AugmentedTrialDataset, DesignSpec, HistoricalDataset, TrialDataset};
use crate::dgp::{sample_historical, sample_trial, true_ate, Effect, ScenarioConfig, Shift};
use crate::estimators::{
    ancova_estimate, oracle_adjust_estimate, prognostic_adjust_estimate, tmle_from_predictions,
    unadjusted_estimate, within_trial_from_predictions, CrossFitConfig, EstimateError,
    EstimateResult, PrognosticConfig, TmleSubmodel, DEFAULT_ALPHA,
};
use crate::learners::{CrossFitPredictions, CrossFitScheme, LearnerLibrary, LearnerSpec};
use crate::numerics::Rng;

mod svg;

pub use svg::{scenario_svg, sweep_svg};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid plan: {0}")]
    Plan(String),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Learner(#[from] crate::learners::LearnerError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Registered estimator identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Unadjusted,
    Ancova,
    ProgHistorical,
    WithinTrial,
    Tmle,
    TmleLinear,
    Oracle,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::Unadjusted,
        EstimatorKind::Ancova,
        EstimatorKind::ProgHistorical,
        EstimatorKind::WithinTrial,
        EstimatorKind::Tmle,
        EstimatorKind::TmleLinear,
        EstimatorKind::Oracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorKind::Unadjusted => "unadjusted",
            EstimatorKind::Ancova => "ancova",
            EstimatorKind::ProgHistorical => "prog-historical",
            EstimatorKind::WithinTrial => "within-trial",
            EstimatorKind::Tmle => "tmle",
            EstimatorKind::TmleLinear => "tmle-linear",
            EstimatorKind::Oracle => "oracle",
        }
    }

    pub fn needs_historical(self) -> bool {
        self == EstimatorKind::ProgHistorical
    }

    pub fn needs_cross_fit(self) -> bool {
        matches!(
            self,
            EstimatorKind::WithinTrial | EstimatorKind::Tmle | EstimatorKind::TmleLinear
        )
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EstimatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = EstimatorKind::ALL.iter().map(|k| k.as_str()).collect();
                format!("unknown estimator '{s}' (expected one of {})", names.join(", "))
            })
    }
}

fn default_folds() -> usize {
    10
}

fn default_true() -> bool {
    true
}

/// Shared configuration of the learner-based estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    /// Candidate library; the built-in default when absent.
    #[serde(default)]
    pub learners: Option<Vec<LearnerSpec>>,
    /// Folds of the super learner's selection step.
    #[serde(default = "default_folds")]
    pub sl_folds: usize,
    /// Folds of the trial cross-fit (within-trial and TMLE).
    #[serde(default = "default_folds")]
    pub cross_fit_folds: usize,
    #[serde(default)]
    pub leave_one_out: bool,
    /// Keep raw covariates next to the within-trial score (and in the
    /// linear fluctuation).
    #[serde(default = "default_true")]
    pub adjust_covariates: bool,
    /// Keep raw covariates next to the historical prognostic score.
    #[serde(default)]
    pub historical_covariates: bool,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            learners: None,
            sl_folds: 10,
            cross_fit_folds: 10,
            leave_one_out: false,
            adjust_covariates: true,
            historical_covariates: false,
        }
    }
}

impl EstimatorSettings {
    pub fn library(&self) -> Result<LearnerLibrary, SimError> {
        let specs = self.learners.clone().unwrap_or_else(LearnerSpec::default_library);
        if specs.is_empty() {
            return Err(SimError::Plan("empty learner library".into()));
        }
        Ok(LearnerLibrary::from_specs(&specs, self.sl_folds)?)
    }

    pub fn cross_fit(&self, library: LearnerLibrary, seed: u64) -> CrossFitConfig {
        CrossFitConfig {
            library,
            scheme: if self.leave_one_out {
                CrossFitScheme::LeaveOneOut
            } else {
                CrossFitScheme::VFold
            },
            folds: self.cross_fit_folds,
            seed,
        }
    }
}

/// Inputs available to one estimator call.
pub struct EstimatorInputs<'a> {
    pub trial: &'a TrialDataset,
    pub historical: Option<&'a HistoricalDataset>,
    pub augmented: Option<&'a AugmentedTrialDataset>,
    /// Cross-fitted predictions shared by within-trial and both TMLEs.
    pub cross_fit: Option<&'a Result<CrossFitPredictions, String>>,
}

/// Runs `kind` with the given settings. Learner-based estimators draw their
/// seeds from `seed`.
pub fn run_estimator(
    kind: EstimatorKind,
    inputs: &EstimatorInputs<'_>,
    settings: &EstimatorSettings,
    library: &LearnerLibrary,
    seed: u64,
) -> Result<EstimateResult, String> {
    let data = inputs.trial;
    let err = |e: EstimateError| e.to_string();
    let cross_fit = || -> Result<&CrossFitPredictions, String> {
        match inputs.cross_fit {
            Some(Ok(p)) => Ok(p),
            Some(Err(e)) => Err(e.clone()),
            None => Err("cross-fit predictions missing".into()),
        }
    };
    match kind {
        EstimatorKind::Unadjusted => unadjusted_estimate(data).map_err(err),
        EstimatorKind::Ancova => ancova_estimate(data, &DesignSpec::main_effects(data.p())).map_err(err),
        EstimatorKind::ProgHistorical => {
            let hist = inputs
                .historical
                .ok_or_else(|| "prog-historical needs historical data".to_string())?;
            let cfg = PrognosticConfig {
                library: library.clone(),
                seed,
                adjust_covariates: settings.historical_covariates,
            };
            prognostic_adjust_estimate(data, hist, &cfg).map_err(err)
        }
        EstimatorKind::WithinTrial => {
            within_trial_from_predictions(data, cross_fit()?, settings.adjust_covariates).map_err(err)
        }
        EstimatorKind::Tmle => {
            let submodel = TmleSubmodel::for_design(data.pi1());
            let mut r = tmle_from_predictions(data, cross_fit()?, submodel, settings.adjust_covariates).map_err(err)?;
            r.estimator = "tmle".into();
            Ok(r.with_diagnostic("submodel", submodel.estimator_name()))
        }
        EstimatorKind::TmleLinear => {
            tmle_from_predictions(data, cross_fit()?, TmleSubmodel::LinearFluctuation, settings.adjust_covariates)
                .map_err(err)
        }
        EstimatorKind::Oracle => {
            let aug = inputs
                .augmented
                .ok_or_else(|| "oracle needs the true conditional means".to_string())?;
            oracle_adjust_estimate(aug).map_err(err)
        }
    }
}

/// Study description, serializable as a JSON plan file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationPlan {
    pub scenarios: Vec<ScenarioConfig>,
    pub estimators: Vec<EstimatorKind>,
    pub reps: usize,
    pub master_seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Trial sizes of a sweep; each scenario is rerun at every n with n_hist = 10n.
    #[serde(default)]
    pub sweep: Option<Vec<usize>>,
    #[serde(default)]
    pub settings: EstimatorSettings,
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

/// Estimators of the default studies, in reporting order.
pub fn default_estimators() -> Vec<EstimatorKind> {
    vec![
        EstimatorKind::Unadjusted,
        EstimatorKind::Ancova,
        EstimatorKind::ProgHistorical,
        EstimatorKind::WithinTrial,
        EstimatorKind::Tmle,
        EstimatorKind::TmleLinear,
        EstimatorKind::Oracle,
    ]
}

/// n = 50, 60, …, 200, 225, …, 400.
pub fn default_sweep_grid() -> Vec<usize> {
    (50..=200).step_by(10).chain((225..=400).step_by(25)).collect()
}

/// The six settings of the standard-error comparison.
pub fn figure_one_scenarios(n: usize, n_hist: usize) -> Vec<ScenarioConfig> {
    let mut out = vec![ScenarioConfig::new(Effect::Homogeneous, Shift::None, n, n_hist)];
    out.extend(Shift::ALL.iter().map(|&s| ScenarioConfig::new(Effect::Heterogeneous, s, n, n_hist)));
    out
}

impl SimulationPlan {
    pub fn scenario_study(reps: usize, master_seed: u64) -> Self {
        Self {
            scenarios: figure_one_scenarios(200, 4000),
            estimators: default_estimators(),
            reps,
            master_seed,
            alpha: DEFAULT_ALPHA,
            sweep: None,
            settings: EstimatorSettings::default(),
        }
    }

    pub fn sweep_study(effect: Effect, grid: Vec<usize>, reps: usize, master_seed: u64) -> Self {
        Self {
            scenarios: vec![ScenarioConfig::new(effect, Shift::None, grid[0], 10 * grid[0])],
            sweep: Some(grid),
            ..Self::scenario_study(reps, master_seed)
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Plan(m));
        if self.reps < 1 {
            return bad("reps must be at least 1".into());
        }
        if self.scenarios.is_empty() {
            return bad("no scenarios".into());
        }
        if self.estimators.is_empty() {
            return bad("no estimators".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} outside (0, 1)", self.alpha));
        }
        for s in &self.scenarios {
            s.validate().map_err(|e| SimError::Plan(e.to_string()))?;
            if self.estimators.contains(&EstimatorKind::ProgHistorical) && s.n_hist < 2 && self.sweep.is_none() {
                return bad(format!("{}: prog-historical needs historical rows", s.label()));
            }
        }
        if let Some(grid) = &self.sweep {
            if grid.is_empty() || grid.windows(2).any(|w| w[0] >= w[1]) {
                return bad("sweep sizes must be strictly increasing".into());
            }
            if grid[0] < 4 {
                return bad("sweep sizes must be at least 4".into());
            }
        }
        if self.settings.sl_folds < 2 || (!self.settings.leave_one_out && self.settings.cross_fit_folds < 2) {
            return bad("fold counts must be at least 2".into());
        }
        self.settings.library()?;
        Ok(())
    }

    /// Scenarios actually simulated: the sweep expands every scenario over its grid.
    pub fn expanded_scenarios(&self) -> Vec<ScenarioConfig> {
        match &self.sweep {
            None => self.scenarios.clone(),
            Some(grid) => self
                .scenarios
                .iter()
                .flat_map(|s| grid.iter().map(move |&n| ScenarioConfig { n, n_hist: 10 * n, ..*s }))
                .collect(),
        }
    }
}

/// One estimator's outcome in one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    pub kind: EstimatorKind,
    pub result: Result<EstimateResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub scenario: ScenarioConfig,
    pub rep: u64,
    pub truth: f64,
    /// Whether a historical sample was drawn.
    pub sampled_historical: bool,
    pub outcomes: Vec<EstimatorOutcome>,
}

/// Per-replication seeds: trial draws, historical draws, learner seeds.
const TRIAL_STREAM: u64 = 0;
const HISTORICAL_STREAM: u64 = 1;
const LEARNER_STREAM: u64 = 2;

/// Runs one replication of several scenarios sharing effect and trial size.
/// All of them see the same trial and cross-fit; each draws its own
/// historical sample. Results equal separate [`run_replication`] calls.
pub fn run_replication_group(
    group: &[ScenarioConfig],
    estimators: &[EstimatorKind],
    settings: &EstimatorSettings,
    rep: u64,
    master_seed: u64,
) -> Result<Vec<ReplicationResult>, SimError> {
    let first = group.first().ok_or_else(|| SimError::Plan("empty scenario group".into()))?;
    if group.iter().any(|s| s.effect != first.effect || s.n != first.n) {
        return Err(SimError::Plan("scenario group mixes effects or trial sizes".into()));
    }
    let library = settings.library()?;
    let truth = true_ate(first.effect).value;
    let mut trial_rng = Rng::for_replication(master_seed, rep, TRIAL_STREAM);
    let mut seeds = Rng::for_replication(master_seed, rep, LEARNER_STREAM);
    let (cf_seed, prog_seed) = (seeds.next_u64(), seeds.next_u64());
    let aug = match sample_trial(first.n, first.effect, &mut trial_rng) {
        Ok(a) => a,
        Err(e) => {
            let msg = format!("trial sampling failed: {e}");
            return Ok(group
                .iter()
                .map(|&scenario| ReplicationResult {
                    scenario,
                    rep,
                    truth,
                    sampled_historical: false,
                    outcomes: estimators
                        .iter()
                        .map(|&kind| EstimatorOutcome {
                            kind,
                            result: Err(msg.clone()),
                        })
                        .collect(),
                })
                .collect());
        }
    };
    let cross_fit = if estimators.iter().any(|k| k.needs_cross_fit()) {
        Some(
            settings
                .cross_fit(library.clone(), cf_seed)
                .predict(&aug.trial)
                .map_err(|e| e.to_string()),
        )
    } else {
        None
    };
    let needs_hist = estimators.iter().any(|k| k.needs_historical());
    let mut out = Vec::with_capacity(group.len());
    for &scenario in group {
        let historical = if needs_hist {
            let mut rng = Rng::for_replication(master_seed, rep, HISTORICAL_STREAM);
            Some(sample_historical(scenario.n_hist, scenario.shift, &mut rng).map_err(|e| e.to_string()))
        } else {
            None
        };
        let hist_ok = historical.as_ref().and_then(|h| h.as_ref().ok());
        let inputs = EstimatorInputs {
            trial: &aug.trial,
            historical: hist_ok,
            augmented: Some(&aug),
            cross_fit: cross_fit.as_ref(),
        };
        let outcomes = estimators
            .iter()
            .map(|&kind| {
                let result = match (&historical, kind.needs_historical()) {
                    (Some(Err(e)), true) => Err(format!("historical sampling failed: {e}")),
                    _ => run_estimator(kind, &inputs, settings, &library, prog_seed),
                };
                EstimatorOutcome { kind, result }
            })
            .collect();
        out.push(ReplicationResult {
            scenario,
            rep,
            truth,
            sampled_historical: historical.is_some(),
            outcomes,
        });
    }
    Ok(out)
}

pub fn run_replication(
    scenario: &ScenarioConfig,
    estimators: &[EstimatorKind],
    settings: &EstimatorSettings,
    rep: u64,
    master_seed: u64,
) -> Result<ReplicationResult, SimError> {
    Ok(run_replication_group(std::slice::from_ref(scenario), estimators, settings, rep, master_seed)?
        .remove(0))
}

/// Summary of one estimator in one scenario. Metrics are absent when no
/// replication succeeded (and `empirical_se` when fewer than two did).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub estimator: String,
    pub scenario: String,
    pub n: usize,
    pub mean_est_se: Option<f64>,
    pub empirical_se: Option<f64>,
    pub power: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_bias: Option<f64>,
    pub reps_used: usize,
    pub failures: usize,
}

/// Summarises one estimator's results over replications against `truth`.
/// Intervals are recomputed at `alpha`.
pub fn aggregate(
    estimator: &str,
    scenario: &str,
    n: usize,
    truth: f64,
    alpha: f64,
    results: &[Result<EstimateResult, String>],
) -> MetricsRow {
    let ok: Vec<EstimateResult> = results
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .map(|r| {
            let mut r = r.clone();
            r.set_alpha(alpha);
            r
        })
        .collect();
    let used = ok.len();
    let frac = |count: usize| count as f64 / used as f64;
    let mean = |v: &mut dyn Iterator<Item = f64>| v.sum::<f64>() / used as f64;
    let (mean_est_se, power, coverage, mean_bias, empirical_se) = if used == 0 {
        (None, None, None, None, None)
    } else {
        let psi_bar = mean(&mut ok.iter().map(|r| r.psi_hat));
        let sd = (used >= 2).then(|| {
            (ok.iter().map(|r| (r.psi_hat - psi_bar).powi(2)).sum::<f64>() / (used - 1) as f64).sqrt()
        });
        (
            Some(mean(&mut ok.iter().map(|r| r.se))),
            Some(frac(ok.iter().filter(|r| r.rejects(alpha)).count())),
            Some(frac(ok.iter().filter(|r| r.covers(truth)).count())),
            Some(psi_bar - truth),
            sd,
        )
    };
    MetricsRow {
        estimator: estimator.to_string(),
        scenario: scenario.to_string(),
        n,
        mean_est_se,
        empirical_se,
        power,
        coverage,
        mean_bias,
        reps_used: used,
        failures: results.len() - used,
    }
}

/// Study output: one row per (scenario, estimator) plus the raw replications.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub rows: Vec<MetricsRow>,
    pub replications: Vec<ReplicationResult>,
}

impl StudyOutput {
    pub fn row(&self, estimator: &str, scenario: &str, n: usize) -> Option<&MetricsRow> {
        self.rows
            .iter()
            .find(|r| r.estimator == estimator && r.scenario == scenario && r.n == n)
    }
}

/// Runs every expanded scenario of `plan` for `plan.reps` replications on
/// `workers` threads. Output is identical for any worker count.
pub fn run_study(plan: &SimulationPlan, workers: usize) -> Result<StudyOutput, SimError> {
    plan.validate()?;
    let scenarios = plan.expanded_scenarios();
    // scenarios sharing (effect, n) reuse one trial and cross-fit per replication
    let mut groups: BTreeMap<(u8, usize), Vec<ScenarioConfig>> = BTreeMap::new();
    let mut group_order = Vec::new();
    for s in &scenarios {
        let key = (s.effect as u8, s.n);
        if !groups.contains_key(&key) {
            group_order.push(key);
        }
        groups.entry(key).or_default().push(*s);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SimError::Plan(format!("thread pool: {e}")))?;
    let mut by_scenario: Vec<Vec<ReplicationResult>> = vec![Vec::new(); scenarios.len()];
    for key in &group_order {
        let group = &groups[key];
        let per_rep: Vec<Vec<ReplicationResult>> = pool.install(|| {
            (0..plan.reps as u64)
                .into_par_iter()
                .map(|rep| run_replication_group(group, &plan.estimators, &plan.settings, rep, plan.master_seed))
                .collect::<Result<Vec<_>, _>>()
        })?;
        for reps in per_rep {
            for r in reps {
                let idx = scenarios.iter().position(|s| *s == r.scenario).expect("known scenario");
                by_scenario[idx].push(r);
            }
        }
    }
    let mut rows = Vec::new();
    for (s, reps) in scenarios.iter().zip(&by_scenario) {
        let truth = true_ate(s.effect).value;
        for (e, kind) in plan.estimators.iter().enumerate() {
            let results: Vec<Result<EstimateResult, String>> =
                reps.iter().map(|r| r.outcomes[e].result.clone()).collect();
            rows.push(aggregate(kind.as_str(), &s.label(), s.n, truth, plan.alpha, &results));
        }
    }
    Ok(StudyOutput {
        rows,
        replications: by_scenario.into_iter().flatten().collect(),
    })
}

/// The standard-error comparison across the scenarios of `plan`.
pub fn run_scenario_study(plan: &SimulationPlan, workers: usize) -> Result<StudyOutput, SimError> {
    if plan.sweep.is_some() {
        return Err(SimError::Plan("scenario study given a sweep plan".into()));
    }
    run_study(plan, workers)
}

/// Power and coverage over the sweep sizes of `plan`.
pub fn run_sweep_study(plan: &SimulationPlan, workers: usize) -> Result<StudyOutput, SimError> {
    if plan.sweep.is_none() {
        return Err(SimError::Plan("sweep study needs sweep sizes".into()));
    }
    run_study(plan, workers)
}

/// Writes metrics as CSV; absent metrics are empty fields.
pub fn write_metrics_csv<W: Write>(rows: &[MetricsRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Worker count from `TRIALADJ_WORKERS`, else the available parallelism.
pub fn default_workers() -> usize {
    std::env::var("TRIALADJ_WORKERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&w: &usize| w >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}
