//! Monte Carlo experiment driver.
//!
//! Runs R replications of generate, fit, estimate, bootstrap for a panel of
//! methods and aggregates bias, spread, and interval quality against the
//! scenario's known truth. Replication r generates with derive_seed(master,
//! 2r) and bootstraps with derive_seed(master, 2r + 1), so the report depends
//! only on the configuration and never on the parallel schedule.
//!
//! Within one replication every method shares the same B bootstrap resamples
//! and the same per-resample propensity refit; only the final estimator step
//! differs. That keeps the panel comparable across methods and does one
//! logistic fit per resample instead of one per method per resample.

use crate::dgp::{generate_seeded, interaction_expand, GeneratedData, PsForm, ScenarioKind, ScenarioSpec};
use crate::estimators::{
    dr, ipw, kernel_match_ate, kernel_match_att, nn_match, Estimand, NnMetric,
    ObservationalSample,
};
use crate::kernels::{KernelFamily, KernelSpec};
use crate::propensity::{fit_logistic, DesignMatrix, FitOptions};
use crate::resampling::{normal_z, percentile_interval, sample_sd, CiMethod};
use crate::seeding::{derive_seed, stream_rng};
use rand::Rng;
use rayon::prelude::*;

/// All harness intervals are at the 95% level used throughout the studies.
const LEVEL: f64 = 0.95;
/// Retry budget for one-sided bootstrap resamples, as in `resampling`.
const MAX_REDRAWS: usize = 10;

/// Where a method's propensity scores come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsSource {
    /// The generator's exact assignment probabilities.
    True,
    /// Logistic fit on intercept plus covariates, refit on every resample.
    Estimated,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MethodKind {
    /// Kernel matching on propensity scores.
    KernelMatch { kernel: KernelSpec<f64>, ps: PsSource },
    /// Nearest-neighbor matching on standardized covariates.
    NnCovariates { k: usize },
    /// Nearest-neighbor matching on propensity scores.
    NnPscore { k: usize, ps: PsSource },
    Ipw { ps: PsSource },
    DoublyRobust { ps: PsSource },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub estimand: Estimand,
    pub kind: MethodKind,
    /// Interval construction for this method's bootstrap.
    pub ci: CiMethod,
}

impl MethodSpec {
    fn needs_estimated_ps(&self) -> bool {
        matches!(
            self.kind,
            MethodKind::KernelMatch { ps: PsSource::Estimated, .. }
                | MethodKind::NnPscore { ps: PsSource::Estimated, .. }
                | MethodKind::Ipw { ps: PsSource::Estimated }
                | MethodKind::DoublyRobust { ps: PsSource::Estimated }
        )
    }
}

/// The six-method comparison panel: three k=1 matching baselines with
/// normal-approximation intervals, then kernel matching, IPW, and doubly
/// robust on estimated scores with percentile intervals.
pub fn standard_panel(estimand: Estimand, h: f64) -> Vec<MethodSpec> {
    let spec = |label: &str, kind, ci| MethodSpec {
        label: label.to_string(),
        estimand,
        kind,
        ci,
    };
    vec![
        spec(
            "Covariates",
            MethodKind::NnCovariates { k: 1 },
            CiMethod::NormalApprox,
        ),
        spec(
            "True PS",
            MethodKind::NnPscore { k: 1, ps: PsSource::True },
            CiMethod::NormalApprox,
        ),
        spec(
            "Estimated PS",
            MethodKind::NnPscore { k: 1, ps: PsSource::Estimated },
            CiMethod::NormalApprox,
        ),
        spec(
            "Proposed",
            MethodKind::KernelMatch {
                kernel: KernelSpec::gaussian(h),
                ps: PsSource::Estimated,
            },
            CiMethod::Percentile,
        ),
        spec("IPW", MethodKind::Ipw { ps: PsSource::Estimated }, CiMethod::Percentile),
        spec(
            "Doubly Robust",
            MethodKind::DoublyRobust { ps: PsSource::Estimated },
            CiMethod::Percentile,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSpec,
    pub methods: Vec<MethodSpec>,
    pub reps: usize,
    /// Bootstrap replicates per replication; 0 disables intervals.
    pub bootstrap_b: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub label: String,
    pub estimand: Estimand,
    pub bias: f64,
    pub sd: f64,
    pub rmse: f64,
    pub aw: Option<f64>,
    pub cp: Option<f64>,
    /// Replications this method could not complete (point or interval).
    pub failures: usize,
    /// More than 5% failures marks the whole row as unusable.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport {
    pub scenario: String,
    pub n: usize,
    pub reps: usize,
    pub bootstrap_b: usize,
    pub true_ate: f64,
    pub true_att: f64,
    pub methods: Vec<MethodReport>,
}

/// One method's outputs for one replication.
#[derive(Debug, Clone)]
struct MethodOutcome {
    point: Option<f64>,
    ci: Option<(f64, f64)>,
}

/// Tabled defaults for the three study sizes; otherwise the square-root rate
/// rounded to two decimals, never exceeding the N^(-1/4) guideline cap.
pub fn default_bandwidth(n: usize) -> f64 {
    assert!(n > 0, "bandwidth needs a positive sample size");
    match n {
        200 => 0.07,
        500 => 0.05,
        1000 => 0.03,
        _ => {
            let nf = n as f64;
            let cap = nf.powf(-0.25);
            let root = nf.sqrt().recip();
            let rounded = (root * 100.0).round() / 100.0;
            // Rounding very large N to 0.00 would kill the kernel; fall back
            // to the unrounded rate there.
            let h = if rounded > 0.0 { rounded } else { root };
            h.min(cap)
        }
    }
}

pub fn run(config: &ExperimentConfig) -> MonteCarloReport {
    assert!(config.reps >= 1, "need at least one replication");
    assert!(!config.methods.is_empty(), "method panel is empty");
    let ps_form = fitted_ps_form(&config.scenario.kind);

    let outcomes: Vec<(GeneratedData, Vec<MethodOutcome>)> = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let gen_seed = derive_seed(config.master_seed, 2 * r as u64);
            let boot_seed = derive_seed(config.master_seed, 2 * r as u64 + 1);
            let data = generate_seeded(&config.scenario, gen_seed);
            let outcome =
                replicate(&data, &config.methods, ps_form, config.bootstrap_b, boot_seed);
            (data, outcome)
        })
        .collect();

    let (true_ate, true_att) = {
        let first = &outcomes[0].0;
        (first.true_ate, first.true_att)
    };
    let with_intervals = config.bootstrap_b > 0;
    let methods = config
        .methods
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let truth = match spec.estimand {
                Estimand::Ate => true_ate,
                Estimand::Att => true_att,
            };
            let per_rep: Vec<&MethodOutcome> =
                outcomes.iter().map(|(_, reps)| &reps[m]).collect();
            aggregate_method(spec, &per_rep, truth, with_intervals)
        })
        .collect();

    MonteCarloReport {
        scenario: config.scenario.kind.to_string(),
        n: config.scenario.n,
        reps: config.reps,
        bootstrap_b: config.bootstrap_b,
        true_ate,
        true_att,
        methods,
    }
}

/// Point estimates plus shared-resample bootstrap intervals for one drawn
/// data set.
fn replicate(
    data: &GeneratedData,
    methods: &[MethodSpec],
    ps_form: PsForm,
    bootstrap_b: usize,
    boot_seed: u64,
) -> Vec<MethodOutcome> {
    let est_scores = estimate_scores(&data.sample, methods, ps_form);
    let points: Vec<Option<f64>> = methods
        .iter()
        .map(|m| method_point(m, &data.sample, &data.true_scores, est_scores.as_deref()))
        .collect();

    if bootstrap_b == 0 {
        return points
            .into_iter()
            .map(|point| MethodOutcome { point, ci: None })
            .collect();
    }

    // One shared draw and one shared refit per resample; per-method values
    // land in [method][replicate] order.
    let n = data.sample.len();
    let replicate_values: Vec<Vec<Option<f64>>> = (0..bootstrap_b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(boot_seed, rep as u64);
            let mut idx = vec![0usize; n];
            let mut redraws = 0usize;
            loop {
                for slot in idx.iter_mut() {
                    *slot = rng.random_range(0..n);
                }
                let true_sub: Vec<f64> =
                    idx.iter().map(|&i| data.true_scores[i]).collect();
                match data.sample.gather(&idx) {
                    Ok(resample) => {
                        let est_sub = estimate_scores(&resample, methods, ps_form);
                        return methods
                            .iter()
                            .map(|m| {
                                method_point(m, &resample, &true_sub, est_sub.as_deref())
                            })
                            .collect();
                    }
                    Err(_) if redraws < MAX_REDRAWS => redraws += 1,
                    Err(_) => return vec![None; methods.len()],
                }
            }
        })
        .collect();

    methods
        .iter()
        .enumerate()
        .map(|(m, spec)| {
            let values: Vec<f64> = replicate_values
                .iter()
                .filter_map(|per_method| per_method[m])
                .collect();
            let ci = method_interval(spec.ci, points[m], &values, bootstrap_b);
            MethodOutcome { point: points[m], ci }
        })
        .collect()
}

/// Interval from one method's bootstrap replicates, or None when the method
/// failed on more than 10% of resamples or has no point estimate.
fn method_interval(
    style: CiMethod,
    point: Option<f64>,
    values: &[f64],
    bootstrap_b: usize,
) -> Option<(f64, f64)> {
    let point = point?;
    if (bootstrap_b - values.len()) * 10 > bootstrap_b {
        return None;
    }
    match style {
        CiMethod::Percentile => Some(percentile_interval(values, LEVEL)),
        CiMethod::NormalApprox => {
            let z = normal_z(LEVEL);
            let se = sample_sd(values);
            Some((point - z * se, point + z * se))
        }
    }
}

/// Which design the logistic fit should use for a scenario. Only the
/// misspecification study widens it; everything else fits the plain linear
/// index.
fn fitted_ps_form(kind: &ScenarioKind) -> PsForm {
    match kind {
        ScenarioKind::Misspec { ps_form } => *ps_form,
        _ => PsForm::Linear,
    }
}

/// Fit the logistic model once per data set if any method wants estimated
/// scores; None either when nobody needs them or when the fit fails.
pub(crate) fn estimate_scores(
    sample: &ObservationalSample<f64>,
    methods: &[MethodSpec],
    ps_form: PsForm,
) -> Option<Vec<f64>> {
    if !methods.iter().any(MethodSpec::needs_estimated_ps) {
        return None;
    }
    let (n, d) = (sample.len(), sample.dim());
    let design = match ps_form {
        PsForm::Linear => DesignMatrix::with_intercept(n, d, sample.x()),
        PsForm::LinearPlusInteractions => {
            let (wide, cols) = interaction_expand(sample.x(), n, d);
            DesignMatrix::with_intercept(n, cols, &wide)
        }
    };
    fit_logistic(&design, sample.w(), FitOptions::default())
        .ok()
        .map(|fit| fit.scores)
}

pub(crate) fn method_point(
    method: &MethodSpec,
    sample: &ObservationalSample<f64>,
    true_scores: &[f64],
    est_scores: Option<&[f64]>,
) -> Option<f64> {
    let pick = |ps: PsSource| -> Option<&[f64]> {
        match ps {
            PsSource::True => Some(true_scores),
            PsSource::Estimated => est_scores,
        }
    };
    let estimate = match &method.kind {
        MethodKind::KernelMatch { kernel, ps } => {
            let scores = pick(*ps)?;
            match method.estimand {
                Estimand::Ate => kernel_match_ate(sample, scores, *kernel),
                Estimand::Att => kernel_match_att(sample, scores, *kernel),
            }
        }
        MethodKind::NnCovariates { k } => {
            nn_match(sample, NnMetric::Covariates, None, method.estimand, *k)
        }
        MethodKind::NnPscore { k, ps } => {
            nn_match(sample, NnMetric::PScore, Some(pick(*ps)?), method.estimand, *k)
        }
        MethodKind::Ipw { ps } => ipw(sample, pick(*ps)?, method.estimand),
        MethodKind::DoublyRobust { ps } => dr(sample, pick(*ps)?, method.estimand),
    };
    estimate.ok().map(|e| e.point).filter(|v| v.is_finite())
}

/// Aggregate one method's replications against the truth. SD uses the
/// population divisor (the valid replication count) so that
/// rmse^2 = bias^2 + sd^2 holds exactly.
fn aggregate_method(
    spec: &MethodSpec,
    per_rep: &[&MethodOutcome],
    truth: f64,
    with_intervals: bool,
) -> MethodReport {
    let mut points = Vec::with_capacity(per_rep.len());
    let mut intervals = Vec::with_capacity(per_rep.len());
    let mut failures = 0usize;
    for outcome in per_rep {
        let complete = match (outcome.point, outcome.ci) {
            (Some(p), Some(ci)) => {
                points.push(p);
                intervals.push(ci);
                true
            }
            (Some(p), None) if !with_intervals => {
                points.push(p);
                true
            }
            _ => false,
        };
        if !complete {
            failures += 1;
        }
    }

    let failed = failures * 20 > per_rep.len() || points.is_empty();
    let (bias, sd, rmse) = if points.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        summarize_errors(&points, truth)
    };
    let (aw, cp) = if with_intervals && !intervals.is_empty() {
        let mut width = 0.0;
        let mut hits = 0usize;
        for &(lo, hi) in &intervals {
            width += hi - lo;
            if lo <= truth && truth <= hi {
                hits += 1;
            }
        }
        let count = intervals.len() as f64;
        (Some(width / count), Some(hits as f64 / count))
    } else {
        (None, None)
    };

    MethodReport {
        label: spec.label.clone(),
        estimand: spec.estimand,
        bias,
        sd,
        rmse,
        aw,
        cp,
        failures,
        failed,
    }
}

fn summarize_errors(points: &[f64], truth: f64) -> (f64, f64, f64) {
    let r = points.len() as f64;
    let mean = points.iter().sum::<f64>() / r;
    let bias = mean - truth;
    let var = points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / r;
    let msq = points.iter().map(|p| (p - truth).powi(2)).sum::<f64>() / r;
    (bias, var.sqrt(), msq.sqrt())
}

/// One cell of a bandwidth/kernel sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub n: usize,
    pub h: f64,
    pub kernel: KernelFamily,
    pub estimand: Estimand,
    pub bias: f64,
    pub rmse: f64,
    pub failures: usize,
}

/// Bias and RMSE of the kernel estimator over an (N, h, kernel) grid, R
/// replications per cell, no bootstrap. A one-cell grid reproduces the
/// corresponding `run` row exactly because each cell derives its seeds the
/// same way.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    scenario: &ScenarioSpec,
    ns: &[usize],
    hs: &[f64],
    kernels: &[KernelFamily],
    estimand: Estimand,
    reps: usize,
    master_seed: u64,
) -> Vec<SweepCell> {
    assert!(
        !ns.is_empty() && !hs.is_empty() && !kernels.is_empty(),
        "sweep grids must be nonempty"
    );
    let mut cells = Vec::with_capacity(ns.len() * hs.len() * kernels.len());
    for &n in ns {
        for &h in hs {
            for &kernel in kernels {
                let config = ExperimentConfig {
                    scenario: ScenarioSpec::new(scenario.kind.clone(), n, scenario.seed),
                    methods: vec![MethodSpec {
                        label: "Proposed".to_string(),
                        estimand,
                        kind: MethodKind::KernelMatch {
                            kernel: KernelSpec::new(kernel, h),
                            ps: PsSource::Estimated,
                        },
                        ci: CiMethod::Percentile,
                    }],
                    reps,
                    bootstrap_b: 0,
                    master_seed,
                };
                let report = run(&config);
                let row = &report.methods[0];
                cells.push(SweepCell {
                    n,
                    h,
                    kernel,
                    estimand,
                    bias: row.bias,
                    rmse: row.rmse,
                    failures: row.failures,
                });
            }
        }
    }
    cells
}
