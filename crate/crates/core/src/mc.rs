//! Seeded Monte Carlo experiments comparing the Peng and bias-reduced mean
//! estimators: bias and RMSE, normality of the replicated estimates, and
//! confidence-interval coverage.
//!
//! Replication `r` at sample size `n` draws from the stream keyed by
//! `(seed, n, r)`, so a row never depends on which other sizes are run.
//! Aggregation always walks replications in index order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classic::{k_opt, peng_mean};
use crate::cml::{br_mean_from, cml_solve, confidence_interval, ConfidenceInterval};
use crate::dist::HeavyTailModel;
use crate::error::{Error, Result};
use crate::gof::{normality_battery, TestKind, TestResult};
use crate::ksel::{reiss_thomas_default, DEFAULT_THETA};
use crate::rng::derive_seed;

/// Fraction of skipped replications above which a row is flagged.
pub const UNRELIABLE_SKIP_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy", content = "k")]
pub enum KPolicy {
    ReissThomas,
    Fixed(usize),
    TheoreticalOpt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: HeavyTailModel,
    pub sizes: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub level: f64,
    pub theta: f64,
    pub k_policy: KPolicy,
    /// Run replications on the rayon pool. Results do not depend on it, so
    /// reports leave it out.
    #[serde(skip, default = "default_parallel")]
    pub parallel: bool,
}

fn default_parallel() -> bool {
    true
}

impl ExperimentConfig {
    pub fn new(model: HeavyTailModel, sizes: Vec<usize>, seed: u64) -> Self {
        ExperimentConfig {
            model,
            sizes,
            replications: 200,
            seed,
            level: 0.95,
            theta: DEFAULT_THETA,
            k_policy: KPolicy::ReissThomas,
            parallel: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Config("at least one sample size is required".into()));
        }
        if let Some(n) = self.sizes.iter().find(|&&n| n < 50) {
            return Err(Error::Config(format!("sample size {n} is below 50")));
        }
        if self.replications < 2 {
            return Err(Error::Config(format!("{} replications; at least 2 are required", self.replications)));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("level {} is outside (0, 1)", self.level)));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return Err(Error::Config(format!("theta {} must be a nonnegative number", self.theta)));
        }
        match self.k_policy {
            KPolicy::Fixed(k) => {
                if let Some(n) = self.sizes.iter().find(|&&n| k < 2 || k >= n) {
                    return Err(Error::Config(format!("fixed k = {k} must lie in [2, {}) for n = {n}", n)));
                }
            }
            KPolicy::TheoreticalOpt => {
                self.model
                    .hall_constants()
                    .map_err(|e| Error::Config(format!("theoretical k is unavailable: {e}")))?;
            }
            KPolicy::ReissThomas => {}
        }
        self.true_mean()?;
        Ok(())
    }

    fn true_mean(&self) -> Result<f64> {
        self.model.true_mean().map_err(|e| Error::Config(format!("model has no finite mean: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    PengMean,
    BrMean,
}

impl Estimator {
    pub const ALL: [Estimator; 2] = [Estimator::PengMean, Estimator::BrMean];

    pub fn label(self) -> &'static str {
        match self {
            Estimator::PengMean => "peng_mean",
            Estimator::BrMean => "br_mean",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// The sample fraction could not be chosen.
    KSelection,
    /// Tail index estimate at or below 1.
    InfiniteMean,
    NonConvergence,
    /// The root has `β` next to `α`, so `ĉ` and `d̂` are not identified.
    UnidentifiedRoot,
    /// The root implies `ĉ ≤ 0`.
    InvalidEstimate,
    /// The asymptotic variance is undefined at the estimates.
    NoVariance,
    Other,
}

impl SkipReason {
    fn of(e: &Error) -> Self {
        match e {
            Error::InfiniteMean { .. } | Error::UndefinedMean { .. } => SkipReason::InfiniteMean,
            Error::Unidentified { .. } => SkipReason::UnidentifiedRoot,
            Error::NonConvergence { .. } => SkipReason::NonConvergence,
            Error::InvalidEstimate(_) => SkipReason::InvalidEstimate,
            _ => SkipReason::Other,
        }
    }
}

/// Everything one replication produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Replication {
    pub index: usize,
    pub k: Option<usize>,
    pub peng_mean: std::result::Result<f64, SkipReason>,
    pub br_mean: std::result::Result<f64, SkipReason>,
    pub alpha_hat: Option<f64>,
    pub beta_hat: Option<f64>,
    pub degenerate_root: bool,
    pub ci: std::result::Result<ConfidenceInterval, SkipReason>,
}

impl Replication {
    pub fn estimate(&self, est: Estimator) -> std::result::Result<f64, SkipReason> {
        match est {
            Estimator::PengMean => self.peng_mean,
            Estimator::BrMean => self.br_mean,
        }
    }
}

/// Runs replication `index` at sample size `n`.
pub fn replicate(config: &ExperimentConfig, n: usize, index: usize) -> Replication {
    let sample = config.model.sample(n, derive_seed(config.seed, &[n as u64, index as u64]));
    let mut rep = Replication {
        index,
        k: None,
        peng_mean: Err(SkipReason::KSelection),
        br_mean: Err(SkipReason::KSelection),
        alpha_hat: None,
        beta_hat: None,
        degenerate_root: false,
        ci: Err(SkipReason::KSelection),
    };
    let k = match config.k_policy {
        KPolicy::Fixed(k) => Ok(k),
        KPolicy::TheoreticalOpt => config.model.hall_constants().and_then(|h| k_opt(&h, n)),
        KPolicy::ReissThomas => reiss_thomas_default(&sample, config.theta).map(|s| s.k_star),
    };
    let Ok(k) = k else { return rep };
    rep.k = Some(k);
    rep.peng_mean = peng_mean(&sample, k).map(|p| p.mean_hat).map_err(|e| SkipReason::of(&e));
    let br = cml_solve(&sample, k).and_then(|cml| {
        rep.alpha_hat = Some(cml.alpha_hat);
        rep.beta_hat = Some(cml.beta_hat);
        rep.degenerate_root = cml.degenerate;
        br_mean_from(&sample, &cml)
    });
    match br {
        Ok(est) => {
            rep.br_mean = Ok(est.mean_hat);
            rep.ci = confidence_interval(&est, k, n, config.level).map_err(|_| SkipReason::NoVariance);
        }
        Err(e) => {
            rep.br_mean = Err(SkipReason::of(&e));
            rep.ci = Err(SkipReason::of(&e));
        }
    }
    rep
}

/// All replications at one sample size, in index order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeRecords {
    pub n: usize,
    pub replications: Vec<Replication>,
}

/// Simulates every size in `config`. Identical output with or without
/// parallelism.
pub fn simulate(config: &ExperimentConfig) -> Result<Vec<SizeRecords>> {
    config.validate()?;
    Ok(config
        .sizes
        .iter()
        .map(|&n| {
            let replications = if config.parallel {
                (0..config.replications).into_par_iter().map(|r| replicate(config, n, r)).collect()
            } else {
                (0..config.replications).map(|r| replicate(config, n, r)).collect()
            };
            SizeRecords { n, replications }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    BiasRmse,
    Normality,
    Coverage,
}

/// Mean, bias and RMSE of one estimator against the true mean. `None`
/// fields mean no replication was usable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorRow {
    pub estimator: Estimator,
    pub used: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub unreliable: bool,
    pub mean: Option<f64>,
    /// `|mean − true mean|`.
    pub bias: Option<f64>,
    pub rmse: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normality: Option<NormalityOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalityOutcome {
    Tests(BTreeMap<TestKind, TestResult>),
    /// The battery could not run; the row is unusable.
    Unusable(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub used: usize,
    pub skipped: BTreeMap<SkipReason, usize>,
    pub unreliable: bool,
    pub mean_lower: Option<f64>,
    pub mean_point: Option<f64>,
    pub mean_upper: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_length: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeReport {
    pub n: usize,
    pub estimators: Vec<EstimatorRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageRow>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<Vec<Replication>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub config: ExperimentConfig,
    pub true_mean: f64,
    /// KS and CvM p-values use the asymptotic laws with no correction for
    /// the studentization, so they are conservative.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub rows: Vec<SizeReport>,
}

/// `(mean, |mean − truth|, rmse about truth)`; `None` for no values.
pub fn aggregate(values: &[f64], truth: f64) -> Option<(f64, f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let m = values.len() as f64;
    let mean = values.iter().sum::<f64>() / m;
    let mse = values.iter().map(|v| (v - truth).powi(2)).sum::<f64>() / m;
    Some((mean, (mean - truth).abs(), mse.sqrt()))
}

fn count_skips<'a>(reasons: impl Iterator<Item = &'a SkipReason>) -> BTreeMap<SkipReason, usize> {
    let mut out = BTreeMap::new();
    for r in reasons {
        *out.entry(*r).or_insert(0) += 1;
    }
    out
}

fn unreliable(skipped: &BTreeMap<SkipReason, usize>, total: usize) -> bool {
    skipped.values().sum::<usize>() as f64 > UNRELIABLE_SKIP_FRACTION * total as f64
}

fn estimator_row(records: &SizeRecords, est: Estimator, truth: f64, with_normality: bool) -> EstimatorRow {
    let outcomes: Vec<_> = records.replications.iter().map(|r| r.estimate(est)).collect();
    let values: Vec<f64> = outcomes.iter().filter_map(|o| o.ok()).collect();
    let skipped = count_skips(outcomes.iter().filter_map(|o| o.as_ref().err()));
    let agg = aggregate(&values, truth);
    let normality = with_normality.then(|| match normality_battery(&values) {
        Ok(tests) => NormalityOutcome::Tests(tests),
        Err(e) => NormalityOutcome::Unusable(e.to_string()),
    });
    EstimatorRow {
        estimator: est,
        used: values.len(),
        unreliable: unreliable(&skipped, outcomes.len()),
        skipped,
        mean: agg.map(|a| a.0),
        bias: agg.map(|a| a.1),
        rmse: agg.map(|a| a.2),
        normality,
    }
}

fn coverage_row(records: &SizeRecords, truth: f64) -> CoverageRow {
    let cis: Vec<ConfidenceInterval> = records.replications.iter().filter_map(|r| r.ci.ok()).collect();
    let skipped = count_skips(records.replications.iter().filter_map(|r| r.ci.as_ref().err()));
    let m = cis.len() as f64;
    let avg = |f: &dyn Fn(&ConfidenceInterval) -> f64| (!cis.is_empty()).then(|| cis.iter().map(f).sum::<f64>() / m);
    CoverageRow {
        used: cis.len(),
        unreliable: unreliable(&skipped, records.replications.len()),
        skipped,
        mean_lower: avg(&|c| c.lower),
        mean_point: avg(&|c| c.point),
        mean_upper: avg(&|c| c.upper),
        coverage: avg(&|c| if c.contains(truth) { 1.0 } else { 0.0 }),
        mean_length: avg(&|c| c.length()),
    }
}

/// Builds a report from simulated records. `full` keeps the per-replication
/// records in the output.
pub fn report(
    config: &ExperimentConfig,
    experiment: Experiment,
    records: &[SizeRecords],
    full: bool,
) -> Result<ExperimentReport> {
    let truth = config.true_mean()?;
    if experiment == Experiment::Normality && config.replications < 20 {
        return Err(Error::Config(format!(
            "normality needs at least 20 replications, got {}",
            config.replications
        )));
    }
    let rows = records
        .iter()
        .map(|rec| {
            let estimators = match experiment {
                Experiment::Coverage => vec![estimator_row(rec, Estimator::BrMean, truth, false)],
                _ => Estimator::ALL
                    .iter()
                    .map(|&e| estimator_row(rec, e, truth, experiment == Experiment::Normality))
                    .collect(),
            };
            SizeReport {
                n: rec.n,
                estimators,
                coverage: (experiment == Experiment::Coverage).then(|| coverage_row(rec, truth)),
                replications: full.then(|| rec.replications.clone()),
            }
        })
        .collect();
    let note = (experiment == Experiment::Normality).then(|| {
        "KS and CvM p-values use asymptotic null laws without correction for studentization (conservative)"
            .to_string()
    });
    Ok(ExperimentReport { experiment, config: config.clone(), true_mean: truth, note, rows })
}

pub fn run(config: &ExperimentConfig, experiment: Experiment, full: bool) -> Result<ExperimentReport> {
    if experiment == Experiment::Normality && config.replications < 20 {
        return Err(Error::Config(format!(
            "normality needs at least 20 replications, got {}",
            config.replications
        )));
    }
    let records = simulate(config)?;
    report(config, experiment, &records, full)
}

pub fn run_bias_rmse(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run(config, Experiment::BiasRmse, false)
}

pub fn run_normality(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run(config, Experiment::Normality, false)
}

pub fn run_coverage(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run(config, Experiment::Coverage, false)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn skip_total(s: &BTreeMap<SkipReason, usize>) -> usize {
    s.values().sum()
}

impl ExperimentReport {
    /// One row per size per estimator (per size for coverage).
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self.experiment {
            Experiment::BiasRmse => {
                out.push_str("n,estimator,used,skipped,unreliable,mean,bias,rmse\n");
                for row in &self.rows {
                    for e in &row.estimators {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{},{}",
                            row.n,
                            e.estimator.label(),
                            e.used,
                            skip_total(&e.skipped),
                            e.unreliable,
                            cell(e.mean),
                            cell(e.bias),
                            cell(e.rmse)
                        );
                    }
                }
            }
            Experiment::Normality => {
                out.push_str("n,estimator,used,cvm_p,ks_p,sw_p,pearson_p,status\n");
                for row in &self.rows {
                    for e in &row.estimators {
                        let (ps, status) = match &e.normality {
                            Some(NormalityOutcome::Tests(t)) => (
                                TestKind::ALL.map(|k| cell(t.get(&k).map(|r| r.p_value))),
                                "ok".to_string(),
                            ),
                            Some(NormalityOutcome::Unusable(msg)) => {
                                (Default::default(), format!("\"unusable: {}\"", msg.replace('"', "'")))
                            }
                            None => (Default::default(), "missing".to_string()),
                        };
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{}",
                            row.n,
                            e.estimator.label(),
                            e.used,
                            ps.join(","),
                            status
                        );
                    }
                }
            }
            Experiment::Coverage => {
                out.push_str("n,used,skipped,unreliable,mean_lower,mean_point,mean_upper,coverage,mean_length\n");
                for row in &self.rows {
                    let Some(c) = &row.coverage else { continue };
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{},{},{}",
                        row.n,
                        c.used,
                        skip_total(&c.skipped),
                        c.unreliable,
                        cell(c.mean_lower),
                        cell(c.mean_point),
                        cell(c.mean_upper),
                        cell(c.coverage),
                        cell(c.mean_length)
                    );
                }
            }
        }
        out
    }
}
