//! Monte Carlo harness for one-at-a-time parameter sweeps.
//!
//! A sweep runs, for every population size, `graphs_per_size` random graphs
//! and `trials_per_graph` trials per graph at every value of the swept
//! parameter, with the other parameters held at the baseline.
//!
//! Seeds are derived from `master_seed` (see [`crate::seed`]):
//!
//! ```text
//! graph seed  = derive(derive(master, pop_size), graph_index)
//! trial seed  = derive(derive(graph_seed, TRIAL), trial_index)
//! stage seeds = stage(trial_seed, Capture | Recapture | Hash | FalseMatches | Bootstrap)
//! ```
//!
//! Trial seeds do not depend on the swept value, so every value sees the
//! same graphs and the same random streams.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimators::{
    self, BootstrapConfig, EstimateError, EstimateResult, FalseMatchModel, ReplicateReports,
    Variant,
};
use crate::graph::{self, Graph, GraphError};
use crate::hashing::{self, HashAssignment, HashError};
use crate::rds::{self, RdsError, RdsForest, ReportMultiset};
use crate::seed::{self, Stage};
use crate::survey::HashedSample;

const TRIAL_LABEL: u64 = 0x0054_5249_414c;

/// Above this many trials a sweep logs a runtime warning.
pub const LARGE_SWEEP_TRIALS: usize = 10_000;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Rds(#[from] RdsError),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The five field parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Target capture size.
    pub n0: usize,
    /// Seeds.
    pub s: usize,
    /// Coupons per subject.
    pub c: usize,
    /// Maximum reports per subject.
    pub p: usize,
    /// Hash space size.
    pub m: u32,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            n0: 500,
            s: 6,
            c: 3,
            p: 25,
            m: 3_125,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |what: &str| {
            Err(ExperimentError::Config(format!(
                "{what} must be at least 1"
            )))
        };
        if self.n0 == 0 {
            return bad("n0");
        }
        if self.s == 0 {
            return bad("s (seeds)");
        }
        if self.c == 0 {
            return bad("c (coupons)");
        }
        if self.p == 0 {
            return bad("p (reports)");
        }
        if self.m == 0 {
            return bad("m (hash space)");
        }
        if self.s > self.n0 {
            return Err(ExperimentError::Config(format!(
                "seeds s={} exceed capture size n0={}",
                self.s, self.n0
            )));
        }
        Ok(())
    }

    /// Copy with one parameter replaced.
    pub fn with(&self, param: SweepParam, value: u64) -> Result<Self, ExperimentError> {
        let mut out = *self;
        let as_usize = usize::try_from(value)
            .map_err(|_| ExperimentError::Config(format!("value {value} too large")))?;
        match param {
            SweepParam::N0 => out.n0 = as_usize,
            SweepParam::Seeds => out.s = as_usize,
            SweepParam::Coupons => out.c = as_usize,
            SweepParam::Reports => out.p = as_usize,
            SweepParam::HashSize => {
                out.m = u32::try_from(value)
                    .map_err(|_| ExperimentError::Config(format!("m={value} too large")))?
            }
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParam {
    #[serde(rename = "n0")]
    N0,
    #[serde(rename = "s")]
    Seeds,
    #[serde(rename = "c")]
    Coupons,
    #[serde(rename = "p")]
    Reports,
    #[serde(rename = "m")]
    HashSize,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::N0 => "n0",
            SweepParam::Seeds => "s",
            SweepParam::Coupons => "c",
            SweepParam::Reports => "p",
            SweepParam::HashSize => "m",
        }
    }

    /// Default value grid for sweeping this parameter.
    pub fn default_grid(self) -> Vec<u64> {
        match self {
            SweepParam::N0 => vec![200, 400, 600, 800, 1000],
            SweepParam::Seeds => vec![2, 6, 10, 15, 20, 25, 30],
            SweepParam::Coupons => vec![1, 2, 3, 4, 5],
            SweepParam::Reports => vec![1, 2, 5, 10, 15, 20, 25, 30],
            SweepParam::HashSize => vec![100, 500, 1000, 2000, 3125, 4000],
        }
    }

    /// Parse `n0`, `s`, `c`, `p` or `m`.
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "n0" => SweepParam::N0,
            "s" => SweepParam::Seeds,
            "c" => SweepParam::Coupons,
            "p" => SweepParam::Reports,
            "m" => SweepParam::HashSize,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFamily {
    #[default]
    Ba,
    Er,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BootstrapReports {
    /// Replicates keep the recorded reports of their subjects.
    #[default]
    Restrict,
    /// Replicates re-run recapture on the population graph.
    Resample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub population_sizes: Vec<usize>,
    pub graphs_per_size: usize,
    pub trials_per_graph: usize,
    #[serde(default)]
    pub family: GraphFamily,
    /// Edges per new vertex for Barabási–Albert graphs.
    #[serde(default = "default_attach")]
    pub attach: usize,
    /// Mean degree for Erdős–Rényi graphs.
    #[serde(default = "default_mean_degree")]
    pub mean_degree: f64,
    pub master_seed: u64,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<String>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default = "default_false_matches")]
    pub false_matches: String,
    #[serde(default)]
    pub bootstrap_reports: BootstrapReports,
    #[serde(default)]
    pub baseline: Params,
    pub sweep: Sweep,
}

fn default_attach() -> usize {
    3
}
fn default_mean_degree() -> f64 {
    6.0
}
fn default_estimators() -> Vec<String> {
    vec!["n1".into(), "n3".into(), "n3-bootstrap".into()]
}
fn default_alpha() -> f64 {
    0.9
}
fn default_kappa() -> usize {
    100
}
fn default_false_matches() -> String {
    FalseMatchModel::default().to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// 3 graphs × 30 trials at 6,250 and 12,500.
    Desk,
    /// 10 graphs × 100 trials at 6,250 through 50,000.
    Full,
}

impl ExperimentConfig {
    /// Sweep of `param` over its default grid at the given scale.
    pub fn preset(param: SweepParam, scale: Scale) -> Self {
        let (sizes, graphs, trials) = match scale {
            Scale::Desk => (vec![6_250, 12_500], 3, 30),
            Scale::Full => (vec![6_250, 12_500, 25_000, 50_000], 10, 100),
        };
        Self {
            population_sizes: sizes,
            graphs_per_size: graphs,
            trials_per_graph: trials,
            family: GraphFamily::Ba,
            attach: default_attach(),
            mean_degree: default_mean_degree(),
            master_seed: 1,
            estimators: default_estimators(),
            alpha: default_alpha(),
            kappa: default_kappa(),
            false_matches: default_false_matches(),
            bootstrap_reports: BootstrapReports::Restrict,
            baseline: Params::default(),
            sweep: Sweep {
                param,
                values: param.default_grid(),
            },
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        format!(
            "# rds-sweep config v1\n{}",
            toml::to_string(self).expect("config serializes")
        )
    }

    pub fn estimator_set(&self) -> Result<Vec<Variant>, ExperimentError> {
        let mut out = Vec::new();
        for name in &self.estimators {
            let v: Variant = name.parse().map_err(ExperimentError::Config)?;
            if !matches!(v, Variant::N1 | Variant::N3 | Variant::N3Bootstrap) {
                return Err(ExperimentError::Config(format!(
                    "estimator {v} is not available in sweeps (use n1, n3, n3-bootstrap)"
                )));
            }
            if !out.contains(&v) {
                out.push(v);
            }
        }
        if out.is_empty() {
            return Err(ExperimentError::Config("no estimators selected".into()));
        }
        Ok(out)
    }

    pub fn false_match_model(&self) -> Result<FalseMatchModel, ExperimentError> {
        self.false_matches.parse().map_err(ExperimentError::Config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let cfg = |m: String| Err(ExperimentError::Config(m));
        if self.population_sizes.is_empty() {
            return cfg("population_sizes is empty".into());
        }
        if self.graphs_per_size == 0 || self.trials_per_graph == 0 {
            return cfg("graphs_per_size and trials_per_graph must be positive".into());
        }
        if self.sweep.values.is_empty() {
            return cfg("sweep.values is empty".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return cfg(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.kappa == 0 {
            return cfg("kappa must be positive".into());
        }
        self.baseline.validate()?;
        for &v in &self.sweep.values {
            let params = self.baseline.with(self.sweep.param, v)?;
            for &n in &self.population_sizes {
                if params.n0 > n {
                    return cfg(format!("n0={} exceeds population size {n}", params.n0));
                }
            }
        }
        for &n in &self.population_sizes {
            match self.family {
                GraphFamily::Ba if n <= self.attach || self.attach == 0 => {
                    return cfg(format!("population size {n} needs n > attach >= 1"));
                }
                GraphFamily::Er
                    if !(self.mean_degree > 0.0 && self.mean_degree < n as f64 - 1.0) =>
                {
                    return cfg(format!("mean_degree must lie in (0, {})", n - 1));
                }
                _ => {}
            }
        }
        self.estimator_set()?;
        self.false_match_model()?;
        Ok(())
    }

    pub fn total_trials(&self) -> usize {
        self.population_sizes.len()
            * self.graphs_per_size
            * self.trials_per_graph
            * self.sweep.values.len()
    }

    /// Warning text for sweeps above [`LARGE_SWEEP_TRIALS`].
    pub fn runtime_warning(&self) -> Option<String> {
        let total = self.total_trials();
        (total > LARGE_SWEEP_TRIALS)
            .then(|| format!("sweep runs {total} trials (full scale); expect hours of runtime"))
    }

    pub fn trial_options(&self) -> Result<TrialOptions, ExperimentError> {
        Ok(TrialOptions {
            estimators: self.estimator_set()?,
            alpha: self.alpha,
            kappa: self.kappa,
            false_matches: self.false_match_model()?,
            bootstrap_reports: self.bootstrap_reports,
        })
    }

    pub fn generate_graph(&self, n: usize, rng_seed: u64) -> Result<Graph, GraphError> {
        match self.family {
            GraphFamily::Ba => graph::generate_ba(n, self.attach, rng_seed),
            GraphFamily::Er => graph::generate_er(n, self.mean_degree, rng_seed),
        }
    }
}

pub fn graph_seed(master: u64, pop_size: usize, graph_index: usize) -> u64 {
    seed::derive(seed::derive(master, pop_size as u64), graph_index as u64)
}

pub fn trial_seed(graph_seed: u64, trial_index: usize) -> u64 {
    seed::derive(seed::derive(graph_seed, TRIAL_LABEL), trial_index as u64)
}

/// Estimator choices for a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialOptions {
    pub estimators: Vec<Variant>,
    pub alpha: f64,
    pub kappa: usize,
    pub false_matches: FalseMatchModel,
    pub bootstrap_reports: BootstrapReports,
}

impl Default for TrialOptions {
    fn default() -> Self {
        Self {
            estimators: vec![Variant::N1, Variant::N3, Variant::N3Bootstrap],
            alpha: default_alpha(),
            kappa: default_kappa(),
            false_matches: FalseMatchModel::default(),
            bootstrap_reports: BootstrapReports::Restrict,
        }
    }
}

impl TrialOptions {
    pub fn bootstrap_config(&self, params: &Params) -> BootstrapConfig {
        BootstrapConfig {
            alpha: self.alpha,
            kappa: self.kappa,
            seeds: params.s,
            coupons: params.c,
            target: params.n0,
            false_matches: self.false_matches,
        }
    }
}

/// Everything one simulated survey produced.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub forest: RdsForest,
    pub reports: ReportMultiset,
    pub psi: HashAssignment,
    pub sample: HashedSample,
    pub results: Vec<EstimateResult>,
}

/// One capture, recapture and hash draw, followed by the requested
/// estimators: `n1` on raw identities, `n3` and bootstrapped `n3` on the
/// hashed view.
pub fn simulate_trial(
    graph: &Graph,
    params: &Params,
    options: &TrialOptions,
    trial_seed: u64,
) -> Result<TrialRecord, ExperimentError> {
    params.validate()?;
    let forest = rds::rds_capture(
        graph,
        params.s,
        params.c,
        params.n0,
        seed::stage(trial_seed, Stage::Capture),
    )?;
    let reports = rds::recapture(
        graph,
        &forest,
        params.p,
        seed::stage(trial_seed, Stage::Recapture),
    )?;
    let psi = hashing::draw_hash(
        0..graph.vertex_count(),
        params.m,
        seed::stage(trial_seed, Stage::Hash),
    )?;
    let sample = HashedSample::from_simulation(&forest, &reports, &psi)?;

    let mut results = Vec::with_capacity(options.estimators.len());
    for &variant in &options.estimators {
        let result = match variant {
            Variant::N1 => estimators::estimate_n1(&forest, &reports),
            Variant::N3 => estimators::estimate_n3_hashed(
                &sample,
                options.false_matches,
                seed::stage(trial_seed, Stage::FalseMatches),
            ),
            Variant::N3Bootstrap => {
                let replicates = match options.bootstrap_reports {
                    BootstrapReports::Restrict => ReplicateReports::Restrict,
                    BootstrapReports::Resample => ReplicateReports::Resample {
                        graph,
                        psi: &psi,
                        p: params.p,
                    },
                };
                estimators::bootstrap_hashed(
                    &sample,
                    &options.bootstrap_config(params),
                    replicates,
                    seed::stage(trial_seed, Stage::Bootstrap),
                )?
            }
            other => {
                return Err(ExperimentError::Config(format!(
                    "estimator {other} is not computed per trial"
                )))
            }
        };
        results.push(result);
    }
    Ok(TrialRecord {
        forest,
        reports,
        psi,
        sample,
        results,
    })
}

/// Estimates from one trial, in the order of `options.estimators`.
pub fn run_trial(
    graph: &Graph,
    params: &Params,
    options: &TrialOptions,
    trial_seed: u64,
) -> Result<Vec<EstimateResult>, ExperimentError> {
    simulate_trial(graph, params, options, trial_seed).map(|t| t.results)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct FlagCounts {
    pub zero_match: usize,
    pub negative_denominator: usize,
    pub clamped_correction: usize,
    pub exhausted_capture: usize,
    pub unrecoverable_denominator: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellStats {
    /// `None` when every trial was flagged (a failed cell).
    pub mean: Option<f64>,
    /// Sample standard deviation; `None` with fewer than two finite values.
    pub stddev: Option<f64>,
    pub n_trials: usize,
    /// Trials without a finite estimate, excluded from the moments.
    pub n_flagged: usize,
    pub flags: FlagCounts,
}

impl CellStats {
    pub fn failed(&self) -> bool {
        self.mean.is_none()
    }

    /// `stddev / mean`.
    pub fn relative_stddev(&self) -> Option<f64> {
        Some(self.stddev? / self.mean?)
    }
}

/// Mean and sample standard deviation over finite estimates, with flagged
/// trials counted separately.
pub fn aggregate_stats(results: &[EstimateResult]) -> CellStats {
    let mut flags = FlagCounts::default();
    let mut values = Vec::with_capacity(results.len());
    for r in results {
        flags.zero_match += usize::from(r.flags.zero_match);
        flags.negative_denominator += usize::from(r.flags.negative_denominator);
        flags.clamped_correction += usize::from(r.flags.clamped_correction);
        flags.exhausted_capture += usize::from(r.flags.exhausted_capture);
        flags.unrecoverable_denominator += usize::from(r.flags.unrecoverable_denominator);
        if let Some(x) = r.estimate.filter(|x| x.is_finite()) {
            values.push(x);
        }
    }
    let n = values.len();
    let mean = (n > 0).then(|| values.iter().sum::<f64>() / n as f64);
    let stddev = mean
        .filter(|_| n > 1)
        .map(|mu| (values.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt());
    CellStats {
        mean,
        stddev,
        n_trials: results.len(),
        n_flagged: results.len() - n,
        flags,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub pop_size: usize,
    pub param: SweepParam,
    pub value: u64,
    pub estimator: Variant,
    pub stats: CellStats,
    /// Hard failures (trials that raised an error), as `graph/trial: message`.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, pop_size: usize, value: u64, estimator: Variant) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.pop_size == pop_size && c.value == value && c.estimator == estimator)
    }
}

pub const SWEEP_CSV_VERSION: &str = "# rds-sweep results v1";
pub const SWEEP_CSV_HEADER: &str = "pop_size,param,value,estimator,mean,stddev,n_trials,n_flagged";
pub const TRIAL_CSV_VERSION: &str = "# rds-sweep trials v1";

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepCell {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.pop_size,
            self.param.name(),
            self.value,
            self.estimator,
            fmt_opt(self.stats.mean),
            fmt_opt(self.stats.stddev),
            self.stats.n_trials,
            self.stats.n_flagged,
        )
    }
}

/// Output streams for [`run_sweep`]; rows are flushed as cells complete.
#[derive(Default)]
pub struct SweepSinks<'a> {
    pub summary: Option<&'a mut dyn Write>,
    pub trials: Option<&'a mut dyn Write>,
}

/// Run the full grid. Trials within a cell run in parallel and are merged
/// in `(graph, trial)` order, so output does not depend on thread count.
pub fn run_sweep(
    config: &ExperimentConfig,
    mut sinks: SweepSinks<'_>,
) -> Result<SweepResult, ExperimentError> {
    config.validate()?;
    let options = config.trial_options()?;
    if let Some(warning) = config.runtime_warning() {
        log::warn!("{warning}");
    }
    if let Some(out) = sinks.summary.as_mut() {
        writeln!(out, "{SWEEP_CSV_VERSION}")?;
        writeln!(out, "{SWEEP_CSV_HEADER}")?;
        out.flush()?;
    }
    if let Some(out) = sinks.trials.as_mut() {
        writeln!(out, "{TRIAL_CSV_VERSION}")?;
        writeln!(
            out,
            "pop_size,graph,trial,graph_seed,trial_seed,param,value,{}",
            EstimateResult::CSV_HEADER
        )?;
    }

    let mut result = SweepResult::default();
    for &pop_size in &config.population_sizes {
        let graph_seeds: Vec<u64> = (0..config.graphs_per_size)
            .map(|g| graph_seed(config.master_seed, pop_size, g))
            .collect();
        let graphs: Vec<Graph> = graph_seeds
            .par_iter()
            .map(|&s| config.generate_graph(pop_size, s))
            .collect::<Result<_, _>>()?;
        log::info!("population {pop_size}: {} graphs ready", graphs.len());

        for &value in &config.sweep.values {
            let params = config.baseline.with(config.sweep.param, value)?;
            let jobs: Vec<(usize, usize)> = (0..graphs.len())
                .flat_map(|g| (0..config.trials_per_graph).map(move |t| (g, t)))
                .collect();
            let outcomes: Vec<Result<Vec<EstimateResult>, ExperimentError>> = jobs
                .par_iter()
                .map(|&(g, t)| {
                    run_trial(&graphs[g], &params, &options, trial_seed(graph_seeds[g], t))
                })
                .collect();

            if let Some(out) = sinks.trials.as_mut() {
                for (&(g, t), outcome) in jobs.iter().zip(&outcomes) {
                    if let Ok(results) = outcome {
                        for r in results {
                            writeln!(
                                out,
                                "{pop_size},{g},{t},{},{},{},{value},{}",
                                graph_seeds[g],
                                trial_seed(graph_seeds[g], t),
                                config.sweep.param.name(),
                                r.csv_row()
                            )?;
                        }
                    }
                }
                out.flush()?;
            }

            let failures: Vec<String> = jobs
                .iter()
                .zip(&outcomes)
                .filter_map(|(&(g, t), o)| o.as_ref().err().map(|e| format!("{g}/{t}: {e}")))
                .collect();
            for failure in &failures {
                log::warn!(
                    "population {pop_size}, {}={value}: trial {failure}",
                    config.sweep.param.name()
                );
            }
            for (idx, &estimator) in options.estimators.iter().enumerate() {
                let collected: Vec<EstimateResult> = outcomes
                    .iter()
                    .filter_map(|o| o.as_ref().ok().map(|rs| rs[idx].clone()))
                    .collect();
                let cell = SweepCell {
                    pop_size,
                    param: config.sweep.param,
                    value,
                    estimator,
                    stats: aggregate_stats(&collected),
                    failures: failures.clone(),
                };
                if let Some(out) = sinks.summary.as_mut() {
                    writeln!(out, "{}", cell.csv_row())?;
                    out.flush()?;
                }
                result.cells.push(cell);
            }
            log::info!(
                "population {pop_size}, {}={value}: {} trials done",
                config.sweep.param.name(),
                jobs.len()
            );
        }
    }
    Ok(result)
}
