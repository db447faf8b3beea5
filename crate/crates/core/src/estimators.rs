//! Population size estimators.
//!
//! * [`lincoln_peterson`] and [`chapman`]: classical two-sample estimators.
//! * [`estimate_n1`]: `|S|·|(rS)*| / |M(rS, S)*|` on raw identities.
//! * [`estimate_n2`]: the same ratio on hashed multisets, using masses.
//! * [`estimate_n3`]: `n2` with the expected false matches removed from the
//!   denominator and the report support recovered by
//!   [`unique_count_correction`].
//! * [`bootstrapped_estimate`]: `n3` with the denominator replaced by the
//!   average positive denominator over truncated replays of the referral
//!   forest.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::factorial::ln_binomial;
use thiserror::Error;

use crate::graph::Graph;
use crate::hashing::{HashAssignment, HashError};
use crate::multiset::Multiset;
use crate::rds::{self, RdsError, RdsForest, ReportMultiset};
use crate::seed::{self, Stage};
use crate::survey::HashedSample;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error("overlap {overlap} exceeds min(capture {capture}, recapture {recapture})")]
    OverlapTooLarge {
        capture: u64,
        recapture: u64,
        overlap: u64,
    },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error(transparent)]
    Hash(#[from] HashError),
    #[error(transparent)]
    Rds(#[from] RdsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Variant {
    #[serde(rename = "lincoln-petersen")]
    LincolnPetersen,
    #[serde(rename = "chapman")]
    Chapman,
    #[serde(rename = "n1")]
    N1,
    #[serde(rename = "n2")]
    N2,
    #[serde(rename = "n3")]
    N3,
    #[serde(rename = "n3-bootstrap")]
    N3Bootstrap,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::LincolnPetersen => "lincoln-petersen",
            Variant::Chapman => "chapman",
            Variant::N1 => "n1",
            Variant::N2 => "n2",
            Variant::N3 => "n3",
            Variant::N3Bootstrap => "n3-bootstrap",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.trim() {
            "lincoln-petersen" | "lp" => Variant::LincolnPetersen,
            "chapman" => Variant::Chapman,
            "n1" => Variant::N1,
            "n2" => Variant::N2,
            "n3" => Variant::N3,
            "n3-bootstrap" => Variant::N3Bootstrap,
            other => return Err(format!("unknown estimator {other:?}")),
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Flags {
    pub zero_match: bool,
    pub negative_denominator: bool,
    pub clamped_correction: bool,
    pub exhausted_capture: bool,
    pub unrecoverable_denominator: bool,
}

impl Flags {
    pub fn names(&self) -> Vec<&'static str> {
        [
            (self.zero_match, "zero-match"),
            (self.negative_denominator, "negative-denominator"),
            (self.clamped_correction, "clamped-correction"),
            (self.exhausted_capture, "exhausted-capture"),
            (self.unrecoverable_denominator, "unrecoverable-denominator"),
        ]
        .into_iter()
        .filter_map(|(on, name)| on.then_some(name))
        .collect()
    }

    pub fn any(&self) -> bool {
        !self.names().is_empty()
    }
}

/// Bootstrap bookkeeping attached to an `n3-bootstrap` result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BootstrapSummary {
    pub alpha: f64,
    pub kappa: usize,
    /// Replicates whose corrected denominator was positive (`|D|`).
    pub accepted: usize,
    /// `Ave(D)`, when `D` is non-empty.
    pub mean_denominator: Option<f64>,
    /// Mean of every replicate denominator, positive or not.
    pub mean_raw_denominator: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub variant: Variant,
    /// `None` when a flag explains why no finite estimate exists.
    pub estimate: Option<f64>,
    /// `|S|` or `<ψS>`.
    pub capture_size: f64,
    /// `|(rS)*|` for unhashed variants, `<ψrS>` for `n2`, `|(ψrS)*|` for `n3`.
    pub recapture_size: f64,
    /// Raw match size: `|M*|` unhashed, `<M(ψrS, ψS)>` hashed.
    pub match_size: f64,
    pub false_match_correction: f64,
    /// Denominator after the false-match correction.
    pub denominator: f64,
    /// Recovered report support for `n3` variants.
    pub unique_count: Option<f64>,
    /// Chapman-style `+1` estimate reported when `n1` has no matches.
    pub fallback_estimate: Option<f64>,
    pub bootstrap: Option<BootstrapSummary>,
    pub flags: Flags,
}

impl EstimateResult {
    fn new(variant: Variant) -> Self {
        Self {
            variant,
            estimate: None,
            capture_size: 0.0,
            recapture_size: 0.0,
            match_size: 0.0,
            false_match_correction: 0.0,
            denominator: 0.0,
            unique_count: None,
            fallback_estimate: None,
            bootstrap: None,
            flags: Flags::default(),
        }
    }

    pub const CSV_HEADER: &'static str = "variant,estimate,capture_size,recapture_size,match_size,false_match_correction,denominator,unique_count,fallback_estimate,flags";

    /// One CSV row matching [`Self::CSV_HEADER`]; missing values are empty
    /// and flags are `|`-separated.
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.variant,
            opt(self.estimate),
            self.capture_size,
            self.recapture_size,
            self.match_size,
            self.false_match_correction,
            self.denominator,
            opt(self.unique_count),
            opt(self.fallback_estimate),
            self.flags.names().join("|"),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.estimate.is_some_and(f64::is_finite)
    }
}

fn check_overlap(capture: u64, recapture: u64, overlap: u64) -> Result<(), EstimateError> {
    if overlap > capture.min(recapture) {
        return Err(EstimateError::OverlapTooLarge {
            capture,
            recapture,
            overlap,
        });
    }
    Ok(())
}

/// `capture · recapture / overlap`. Zero overlap yields no estimate and the
/// zero-match flag.
pub fn lincoln_peterson(
    capture: u64,
    recapture: u64,
    overlap: u64,
) -> Result<EstimateResult, EstimateError> {
    check_overlap(capture, recapture, overlap)?;
    let mut out = EstimateResult::new(Variant::LincolnPetersen);
    out.capture_size = capture as f64;
    out.recapture_size = recapture as f64;
    out.match_size = overlap as f64;
    out.denominator = overlap as f64;
    if overlap == 0 {
        out.flags.zero_match = true;
    } else {
        out.estimate = Some(capture as f64 * recapture as f64 / overlap as f64);
    }
    Ok(out)
}

/// `(capture+1)(recapture+1)/(overlap+1) − 1`, defined at zero overlap.
pub fn chapman(
    capture: u64,
    recapture: u64,
    overlap: u64,
) -> Result<EstimateResult, EstimateError> {
    check_overlap(capture, recapture, overlap)?;
    let mut out = EstimateResult::new(Variant::Chapman);
    out.capture_size = capture as f64;
    out.recapture_size = recapture as f64;
    out.match_size = overlap as f64;
    out.denominator = overlap as f64 + 1.0;
    out.flags.zero_match = overlap == 0;
    out.estimate =
        Some((capture as f64 + 1.0) * (recapture as f64 + 1.0) / (overlap as f64 + 1.0) - 1.0);
    Ok(out)
}

/// `n1 = |S|·|(rS)*| / |M(rS, S)*|` on raw identities.
pub fn estimate_n1(forest: &RdsForest, reports: &ReportMultiset) -> EstimateResult {
    let mut out = EstimateResult::new(Variant::N1);
    let capture = forest.len() as f64;
    let support = reports.reports().support_len() as f64;
    let matches = reports
        .reports()
        .filter(&forest.subject_set())
        .support_len() as f64;
    out.capture_size = capture;
    out.recapture_size = support;
    out.match_size = matches;
    out.denominator = matches;
    out.flags.exhausted_capture = forest.exhausted();
    if matches == 0.0 {
        out.flags.zero_match = true;
        out.fallback_estimate = Some(capture * (support + 1.0) / (matches + 1.0));
    } else {
        out.estimate = Some(capture * support / matches);
    }
    out
}

/// `n2 = <ψS>·<ψrS> / <M(ψrS, ψS)>`.
pub fn estimate_n2(psi_s: &Multiset<u32>, psi_rs: &Multiset<u32>) -> EstimateResult {
    let mut out = EstimateResult::new(Variant::N2);
    let capture = psi_s.mass() as f64;
    let reports = psi_rs.mass() as f64;
    let matches = psi_rs.filter(psi_s).mass() as f64;
    out.capture_size = capture;
    out.recapture_size = reports;
    out.match_size = matches;
    out.denominator = matches;
    if matches == 0.0 {
        out.flags.zero_match = true;
    } else {
        out.estimate = Some(capture * reports / matches);
    }
    out
}

/// Closed-form expected false-match mass for a set `A` of size `a` and a
/// disjoint multiset `B` with `b_support` distinct elements of total mass
/// `b_mass`, hashed uniformly into `m` codes:
///
/// ```text
/// <B>/|B*| · Σ_{k=1}^{min(a, |B*|, m)} k·C(a,k)·C(|B*|,k)·(k/m)^{2k}·((m−k)/m)^{a+|B*|−2k}
/// ```
///
/// Terms are evaluated in log space; `0^0 = 1`.
pub fn expected_false_matches_closed(a: u64, b_support: u64, b_mass: u64, m: u64) -> f64 {
    if a == 0 || b_support == 0 || m == 0 {
        return 0.0;
    }
    let mf = m as f64;
    let kmax = a.min(b_support).min(m);
    let mut sum = 0.0;
    for k in 1..=kmax {
        let rest = a + b_support - 2 * k;
        let ln_rest = if rest == 0 {
            0.0
        } else if k == m {
            f64::NEG_INFINITY
        } else {
            rest as f64 * (-(k as f64) / mf).ln_1p()
        };
        let ln_term = ln_binomial(a, k)
            + ln_binomial(b_support, k)
            + 2.0 * k as f64 * (k as f64 / mf).ln()
            + ln_rest;
        sum += k as f64 * ln_term.exp();
    }
    b_mass as f64 / b_support as f64 * sum
}

/// Per-trial false-match masses: a fresh set of `a` elements and a disjoint
/// multiset with multiplicities `report_profile` are hashed into `1..=m`,
/// and each trial records `<ψB | ψA>`, the mass of `ψB` landing on codes
/// occupied by `ψA`.
pub fn false_match_samples(
    a: u64,
    report_profile: &[u64],
    m: u64,
    trials: usize,
    rng_seed: u64,
) -> Vec<u64> {
    let mut rng = seed::rng(rng_seed);
    let mut occupied: Vec<u64> = Vec::with_capacity(a as usize);
    (0..trials)
        .map(|_| {
            occupied.clear();
            occupied.extend((0..a).map(|_| rng.gen_range(1..=m)));
            occupied.sort_unstable();
            occupied.dedup();
            report_profile
                .iter()
                .filter(|_| occupied.binary_search(&rng.gen_range(1..=m)).is_ok())
                .sum()
        })
        .collect()
}

/// Monte Carlo estimate of the expected false-match mass; see
/// [`false_match_samples`].
pub fn expected_false_matches_mc(
    a: u64,
    report_profile: &[u64],
    m: u64,
    trials: usize,
    rng_seed: u64,
) -> f64 {
    if trials == 0 || m == 0 {
        return 0.0;
    }
    let samples = false_match_samples(a, report_profile, m, trials, rng_seed);
    samples.iter().sum::<u64>() as f64 / trials as f64
}

/// How the false-match expectation is computed from hashed data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FalseMatchModel {
    /// The closed-form series, with `|B*|` taken as the unique-count
    /// corrected report support.
    ClosedForm,
    /// Simulation over `trials` independent hashings, using the observed
    /// multiplicity profile of `ψrS`.
    MonteCarlo { trials: usize },
}

impl Default for FalseMatchModel {
    fn default() -> Self {
        FalseMatchModel::MonteCarlo { trials: 50 }
    }
}

impl fmt::Display for FalseMatchModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FalseMatchModel::ClosedForm => f.write_str("closed-form"),
            FalseMatchModel::MonteCarlo { trials } => write!(f, "monte-carlo:{trials}"),
        }
    }
}

impl FromStr for FalseMatchModel {
    type Err = String;

    /// `closed-form`, `monte-carlo` or `monte-carlo:<trials>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "closed-form" {
            return Ok(FalseMatchModel::ClosedForm);
        }
        if s == "monte-carlo" {
            return Ok(FalseMatchModel::default());
        }
        if let Some(trials) = s.strip_prefix("monte-carlo:") {
            let trials: usize = trials
                .parse()
                .map_err(|_| format!("bad trial count in {s:?}"))?;
            if trials == 0 {
                return Err("monte-carlo trial count must be positive".into());
            }
            return Ok(FalseMatchModel::MonteCarlo { trials });
        }
        Err(format!(
            "unknown false-match model {s:?} (expected closed-form or monte-carlo[:N])"
        ))
    }
}

impl FalseMatchModel {
    /// Expected false-match mass for a capture of `capture_size` subjects
    /// whose hashed reports are `psi_rs`.
    pub fn expectation(
        &self,
        capture_size: u64,
        psi_rs: &Multiset<u32>,
        m: u32,
        rng_seed: u64,
    ) -> f64 {
        match *self {
            FalseMatchModel::ClosedForm => {
                let support = unique_count_correction(psi_rs.support_len() as u64, m)
                    .value
                    .round() as u64;
                expected_false_matches_closed(capture_size, support, psi_rs.mass(), u64::from(m))
            }
            FalseMatchModel::MonteCarlo { trials } => {
                let profile: Vec<u64> = psi_rs.multiplicities().collect();
                expected_false_matches_mc(capture_size, &profile, u64::from(m), trials, rng_seed)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniqueCount {
    pub value: f64,
    /// The observed support equalled the hash space and was clamped to
    /// `m − 1`.
    pub clamped: bool,
}

/// Recover the pre-hash support size from the observed hashed support by
/// inverting the expected number of empty boxes:
/// `log(1 − observed/m) / log(1 − 1/m)`.
pub fn unique_count_correction(observed_support: u64, m: u32) -> UniqueCount {
    let m64 = u64::from(m);
    if observed_support == 0 {
        return UniqueCount {
            value: 0.0,
            clamped: false,
        };
    }
    if m <= 1 {
        return UniqueCount {
            value: observed_support as f64,
            clamped: observed_support >= m64,
        };
    }
    let clamped = observed_support >= m64;
    let x = if clamped { m64 - 1 } else { observed_support };
    let mf = f64::from(m);
    let value = (-(x as f64) / mf).ln_1p() / (-1.0 / mf).ln_1p();
    UniqueCount { value, clamped }
}

/// `n3 = <ψS> / (<M(ψrS, ψS)> − E[F]) · correction(|(ψrS)*|, m)`.
pub fn estimate_n3(
    psi_s: &Multiset<u32>,
    psi_rs: &Multiset<u32>,
    false_match_expectation: f64,
    m: u32,
) -> EstimateResult {
    let mut out = EstimateResult::new(Variant::N3);
    let capture = psi_s.mass() as f64;
    let matches = psi_rs.filter(psi_s).mass() as f64;
    let unique = unique_count_correction(psi_rs.support_len() as u64, m);
    out.capture_size = capture;
    out.recapture_size = psi_rs.support_len() as f64;
    out.match_size = matches;
    out.false_match_correction = false_match_expectation;
    out.denominator = matches - false_match_expectation;
    out.unique_count = Some(unique.value);
    out.flags.clamped_correction = unique.clamped;
    out.flags.zero_match = matches == 0.0;
    if out.denominator > 0.0 {
        out.estimate = Some(capture / out.denominator * unique.value);
    } else {
        out.flags.negative_denominator = true;
    }
    out
}

/// Raw `n3` on a hashed sample, with the false-match expectation taken from
/// `model`.
pub fn estimate_n3_hashed(
    sample: &HashedSample,
    model: FalseMatchModel,
    rng_seed: u64,
) -> EstimateResult {
    let psi_s = sample.psi_subjects();
    let psi_rs = sample.psi_reports();
    let expectation = model.expectation(psi_s.mass(), &psi_rs, sample.space(), rng_seed);
    let mut out = estimate_n3(&psi_s, &psi_rs, expectation, sample.space());
    out.flags.exhausted_capture = sample.forest().exhausted();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BootstrapConfig {
    /// Fraction of the target capture size replayed per replicate.
    pub alpha: f64,
    /// Number of replicates.
    pub kappa: usize,
    /// Seeds used by each replay.
    pub seeds: usize,
    /// Coupons per subject in each replay.
    pub coupons: usize,
    /// Nominal capture size `n0`; replays target `⌈alpha·n0⌉`.
    pub target: usize,
    pub false_matches: FalseMatchModel,
}

impl BootstrapConfig {
    pub fn new(seeds: usize, coupons: usize, target: usize) -> Self {
        Self {
            alpha: 0.9,
            kappa: 100,
            seeds,
            coupons,
            target,
            false_matches: FalseMatchModel::default(),
        }
    }

    fn validate(&self) -> Result<(), EstimateError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(EstimateError::InvalidParameters(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.kappa == 0 || self.seeds == 0 || self.coupons == 0 || self.target == 0 {
            return Err(EstimateError::InvalidParameters(
                "kappa, seeds, coupons and target must all be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Where replicate report multisets come from.
#[derive(Debug, Clone, Copy)]
pub enum ReplicateReports<'a> {
    /// Keep the recorded reports of replicate subjects. Needs no further
    /// access to the population.
    Restrict,
    /// Re-run recapture on the population graph for each replicate forest,
    /// then hash with `psi`. Sample keys must be vertex ids.
    Resample {
        graph: &'a Graph,
        psi: &'a HashAssignment,
        p: usize,
    },
}

/// Bootstrapped `n3` on a hashed sample.
///
/// Each replicate replays respondent-driven capture over the referral forest
/// itself (viewed as an undirected graph) with target `⌈alpha·n0⌉`, derives
/// the replicate reports, and computes `d = <M(ψrS', ψS')> − E[F(S', rS')]`.
/// Positive `d` values form `D`; the estimate is
/// `<ψS> / Ave(D) · correction(|(ψrS)*|, m)`.
///
/// Replicate `i` draws from seeds derived from `(rng_seed, i)`, so the
/// result does not depend on scheduling.
pub fn bootstrap_hashed(
    sample: &HashedSample,
    config: &BootstrapConfig,
    replicates: ReplicateReports<'_>,
    rng_seed: u64,
) -> Result<EstimateResult, EstimateError> {
    config.validate()?;
    let forest = sample.forest();
    if forest.is_empty() {
        return Err(EstimateError::InvalidParameters(
            "empty capture sample".into(),
        ));
    }
    let m = sample.space();
    let tree = forest.tree_graph();
    let target = ((config.alpha * config.target as f64).ceil() as usize).max(1);
    let seeds = config.seeds.min(target).min(forest.len());

    let denominators: Vec<f64> = (0..config.kappa as u64)
        .into_par_iter()
        .map(|i| -> Result<f64, EstimateError> {
            let rep_seed = seed::derive(rng_seed, i);
            let local = rds::rds_capture(
                &tree,
                seeds,
                config.coupons,
                target,
                seed::stage(rep_seed, Stage::Capture),
            )?;
            let replicate = local.relabel(|idx| forest.subjects()[idx])?;
            let psi_s = sample.psi_of(replicate.subjects());
            let psi_rs = match replicates {
                ReplicateReports::Restrict => sample.psi_reports_of(replicate.subjects()),
                ReplicateReports::Resample { graph, psi, p } => {
                    let reports = rds::recapture(
                        graph,
                        &replicate,
                        p,
                        seed::stage(rep_seed, Stage::Recapture),
                    )?;
                    psi.apply(reports.reports())?
                }
            };
            let matches = psi_rs.filter(&psi_s).mass() as f64;
            let expectation = config.false_matches.expectation(
                psi_s.mass(),
                &psi_rs,
                m,
                seed::stage(rep_seed, Stage::FalseMatches),
            );
            Ok(matches - expectation)
        })
        .collect::<Result<_, _>>()?;

    let accepted: Vec<f64> = denominators.iter().copied().filter(|d| *d > 0.0).collect();
    let psi_s = sample.psi_subjects();
    let psi_rs = sample.psi_reports();
    let unique = unique_count_correction(psi_rs.support_len() as u64, m);

    let mut out = EstimateResult::new(Variant::N3Bootstrap);
    out.capture_size = psi_s.mass() as f64;
    out.recapture_size = psi_rs.support_len() as f64;
    out.match_size = psi_rs.filter(&psi_s).mass() as f64;
    out.unique_count = Some(unique.value);
    out.flags.clamped_correction = unique.clamped;
    out.flags.exhausted_capture = forest.exhausted();
    let mean_denominator =
        (!accepted.is_empty()).then(|| accepted.iter().sum::<f64>() / accepted.len() as f64);
    out.bootstrap = Some(BootstrapSummary {
        alpha: config.alpha,
        kappa: config.kappa,
        accepted: accepted.len(),
        mean_denominator,
        mean_raw_denominator: denominators.iter().sum::<f64>() / denominators.len() as f64,
    });
    match mean_denominator {
        Some(ave) => {
            out.denominator = ave;
            out.false_match_correction = out.match_size - ave;
            out.estimate = Some(out.capture_size / ave * unique.value);
        }
        None => out.flags.unrecoverable_denominator = true,
    }
    Ok(out)
}

/// Bootstrapped `n3` from a simulated capture, recapture and hash.
pub fn bootstrapped_estimate(
    forest: &RdsForest,
    reports: &ReportMultiset,
    psi: &HashAssignment,
    config: &BootstrapConfig,
    replicates: ReplicateReports<'_>,
    rng_seed: u64,
) -> Result<EstimateResult, EstimateError> {
    let sample = HashedSample::from_simulation(forest, reports, psi)?;
    bootstrap_hashed(&sample, config, replicates, rng_seed)
}
