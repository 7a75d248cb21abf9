//! Point estimators of average treatment effects: kernel matching on the
//! propensity score, nearest-neighbor matching, normalized inverse
//! probability weighting, and the doubly robust combination.
//!
//! All estimators are pure functions of (sample, scores). Sums run in fixed
//! index order, so results do not depend on any parallel schedule upstream.

use crate::kernels::{KernelFamily, KernelSpec};
use crate::num::Real;
use crate::numeric::linalg::{ols, LinalgError};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Observed data: outcomes, binary treatment, and row-major covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationalSample<F> {
    y: Vec<F>,
    w: Vec<bool>,
    x: Vec<F>,
    d: usize,
    n_treated: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SampleError {
    #[error("inconsistent lengths: y has {y}, w has {w}, x has {x} values for d = {d}")]
    LengthMismatch { y: usize, w: usize, x: usize, d: usize },
    #[error("non-finite value in row {row}")]
    NonFinite { row: usize },
    #[error("sample needs at least one treated and one control unit")]
    OneSided,
}

impl<F: Real> ObservationalSample<F> {
    pub fn try_new(y: Vec<F>, w: Vec<bool>, x: Vec<F>, d: usize) -> Result<Self, SampleError> {
        let n = y.len();
        if w.len() != n || x.len() != n * d {
            return Err(SampleError::LengthMismatch { y: n, w: w.len(), x: x.len(), d });
        }
        for row in 0..n {
            let row_ok = y[row].is_finite()
                && x[row * d..(row + 1) * d].iter().all(|v| v.is_finite());
            if !row_ok {
                return Err(SampleError::NonFinite { row });
            }
        }
        let n_treated = w.iter().filter(|&&t| t).count();
        if n_treated == 0 || n_treated == n {
            return Err(SampleError::OneSided);
        }
        Ok(Self { y, w, x, d, n_treated })
    }

    /// Panicking constructor for data known valid by construction.
    pub fn new(y: Vec<F>, w: Vec<bool>, x: Vec<F>, d: usize) -> Self {
        Self::try_new(y, w, x, d).expect("sample invariants hold")
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn n_treated(&self) -> usize {
        self.n_treated
    }

    pub fn n_control(&self) -> usize {
        self.len() - self.n_treated
    }

    pub fn y(&self) -> &[F] {
        &self.y
    }

    pub fn w(&self) -> &[bool] {
        &self.w
    }

    /// Row-major covariate block, `len() * dim()` values.
    pub fn x(&self) -> &[F] {
        &self.x
    }

    pub fn covariates(&self, i: usize) -> &[F] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// Row-indexed resample of the same sample (with repetition allowed).
    pub fn gather(&self, idx: &[usize]) -> Result<Self, SampleError> {
        let mut y = Vec::with_capacity(idx.len());
        let mut w = Vec::with_capacity(idx.len());
        let mut x = Vec::with_capacity(idx.len() * self.d);
        for &i in idx {
            y.push(self.y[i]);
            w.push(self.w[i]);
            x.extend_from_slice(self.covariates(i));
        }
        Self::try_new(y, w, x, self.d)
    }
}

/// Which average effect is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimand {
    Ate,
    Att,
}

impl fmt::Display for Estimand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimand::Ate => write!(f, "ate"),
            Estimand::Att => write!(f, "att"),
        }
    }
}

impl FromStr for Estimand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ate" => Ok(Estimand::Ate),
            "att" => Ok(Estimand::Att),
            other => Err(format!("unknown estimand {other:?}, expected \"ate\" or \"att\"")),
        }
    }
}

/// Estimator identity carried through reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    KernelMatch,
    NnCovariates,
    NnPscore,
    Ipw,
    DoublyRobust,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::KernelMatch => write!(f, "kernel-match"),
            Method::NnCovariates => write!(f, "nn-covariates"),
            Method::NnPscore => write!(f, "nn-pscore"),
            Method::Ipw => write!(f, "ipw"),
            Method::DoublyRobust => write!(f, "dr"),
        }
    }
}

/// A point estimate, optionally decorated with bootstrap uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectEstimate<F> {
    pub estimand: Estimand,
    pub method: Method,
    pub point: F,
    pub se: Option<F>,
    pub ci: Option<(F, F)>,
}

impl<F: Real> EffectEstimate<F> {
    pub fn point_only(estimand: Estimand, method: Method, point: F) -> Self {
        Self { estimand, method, point, se: None, ci: None }
    }

    pub fn with_interval(mut self, se: F, lo: F, hi: F) -> Self {
        assert!(lo <= hi, "interval endpoints out of order: [{lo}, {hi}]");
        self.se = Some(se);
        self.ci = Some((lo, hi));
        self
    }
}

/// Fully imputed potential outcomes: observed entries are copied verbatim,
/// the missing side is the kernel-weighted mean of opposite-group outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputedOutcomes<F> {
    pub y0hat: Vec<F>,
    pub y1hat: Vec<F>,
    /// Units whose empty kernel neighborhood forced a nearest-donor fallback.
    pub fallback_units: usize,
}

/// What to do when a unit's donor weights sum below the underflow threshold
/// and the kernel has bounded support, so no exact rescue exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UnderflowPolicy {
    /// Impute from the single nearest donor by score distance and count it.
    #[default]
    NearestDonor,
    /// Refuse the estimate.
    Error,
}

#[derive(Debug, Error, PartialEq)]
pub enum EstimatorError {
    #[error("kernel weight sum underflowed for unit {unit} and no fallback is allowed")]
    DenominatorUnderflow { unit: usize },
    #[error("propensity score {value} at unit {unit} is outside the open interval (0, 1)")]
    DegenerateScore { unit: usize, value: f64 },
    #[error("outcome regression in the {} group failed: {source}", if *.treated { "treated" } else { "control" })]
    OutcomeModel {
        treated: bool,
        #[source]
        source: LinalgError,
    },
    #[error("k = {k} neighbors requested but the smaller group has only {max} units")]
    InvalidK { k: usize, max: usize },
}

fn check_scores<F: Real>(scores: &[F], n: usize) -> Result<(), EstimatorError> {
    assert_eq!(scores.len(), n, "score length must match the sample size");
    for (i, &p) in scores.iter().enumerate() {
        if !(p > F::zero() && p < F::one()) {
            return Err(EstimatorError::DegenerateScore {
                unit: i,
                value: p.to_f64().unwrap_or(f64::NAN),
            });
        }
    }
    Ok(())
}

fn group_indices<F: Real>(sample: &ObservationalSample<F>) -> (Vec<usize>, Vec<usize>) {
    let mut treated = Vec::with_capacity(sample.n_treated());
    let mut controls = Vec::with_capacity(sample.n_control());
    for (i, &t) in sample.w().iter().enumerate() {
        if t {
            treated.push(i);
        } else {
            controls.push(i);
        }
    }
    (treated, controls)
}

/// Weighted means of donor outcomes for every receiver, one direction of the
/// cross-group smoother. `receiver_values[a]` matches `receivers[a]`.
struct SmoothSide<F> {
    values: Vec<F>,
    fallbacks: usize,
}

/// Both smoother directions in one pass over the treated x control grid.
///
/// The kernel is symmetric, so K((p_j - p_i)/h) computed once serves the
/// treated unit's control-donor sum and the control unit's treated-donor sum
/// simultaneously; skipping one direction skips only its accumulation, not
/// the kernel evaluation, which keeps both call shapes bit-identical.
fn cross_smooth<F: Real>(
    y: &[F],
    scores: &[F],
    treated: &[usize],
    controls: &[usize],
    kernel: KernelSpec<F>,
    want_y0_for_treated: bool,
    want_y1_for_controls: bool,
    policy: UnderflowPolicy,
) -> Result<(Option<SmoothSide<F>>, Option<SmoothSide<F>>), EstimatorError> {
    let inv_h = F::one() / kernel.bandwidth;
    let half = F::of(0.5);
    let n1 = treated.len();
    let n0 = controls.len();
    let gaussian = kernel.family == KernelFamily::Gaussian;
    // Arguments below this bound exponentiate to zero; flushing early keeps
    // the inner loop out of subnormal arithmetic without changing any sum.
    let flush = F::min_positive_value().ln();

    let mut num_t = vec![F::zero(); if want_y0_for_treated { n1 } else { 0 }];
    let mut den_t = vec![F::zero(); if want_y0_for_treated { n1 } else { 0 }];
    let mut num_c = vec![F::zero(); if want_y1_for_controls { n0 } else { 0 }];
    let mut den_c = vec![F::zero(); if want_y1_for_controls { n0 } else { 0 }];

    for (a, &i) in treated.iter().enumerate() {
        let pi = scores[i];
        let yi = y[i];
        for (b, &j) in controls.iter().enumerate() {
            let u = (scores[j] - pi) * inv_h;
            let k = if gaussian {
                let arg = -u * u * half;
                if arg < flush {
                    F::zero()
                } else {
                    arg.exp()
                }
            } else {
                let uu = u * u;
                if uu >= F::one() {
                    F::zero()
                } else {
                    F::of(0.75) * (F::one() - uu)
                }
            };
            if k > F::zero() {
                if want_y0_for_treated {
                    num_t[a] += k * y[j];
                    den_t[a] += k;
                }
                if want_y1_for_controls {
                    num_c[b] += k * yi;
                    den_c[b] += k;
                }
            }
        }
    }

    let resolve = |receivers: &[usize],
                   donors: &[usize],
                   num: Vec<F>,
                   den: Vec<F>|
     -> Result<SmoothSide<F>, EstimatorError> {
        let thr = F::of(1e-300).max(F::min_positive_value());
        let mut values = Vec::with_capacity(receivers.len());
        let mut fallbacks = 0usize;
        for (a, &i) in receivers.iter().enumerate() {
            if den[a] >= thr {
                values.push(num[a] / den[a]);
            } else if gaussian {
                values.push(shifted_gaussian_mean(y, scores, i, donors, inv_h));
            } else {
                match policy {
                    UnderflowPolicy::NearestDonor => {
                        values.push(y[nearest_donor(scores, i, donors)]);
                        fallbacks += 1;
                    }
                    UnderflowPolicy::Error => {
                        return Err(EstimatorError::DenominatorUnderflow { unit: i });
                    }
                }
            }
        }
        Ok(SmoothSide { values, fallbacks })
    };

    let t_side = if want_y0_for_treated {
        Some(resolve(treated, controls, num_t, den_t)?)
    } else {
        None
    };
    let c_side = if want_y1_for_controls {
        Some(resolve(controls, treated, num_c, den_c)?)
    } else {
        None
    };
    Ok((t_side, c_side))
}

/// Exact Gaussian weighted mean after shifting exponents by their maximum.
///
/// The largest shifted weight is exactly 1, so the denominator is at least 1
/// and the ratio survives no matter how distant every donor is.
fn shifted_gaussian_mean<F: Real>(
    y: &[F],
    scores: &[F],
    receiver: usize,
    donors: &[usize],
    inv_h: F,
) -> F {
    let half = F::of(0.5);
    let pi = scores[receiver];
    let mut max_arg = F::neg_infinity();
    for &j in donors {
        let u = (scores[j] - pi) * inv_h;
        let arg = -u * u * half;
        if arg > max_arg {
            max_arg = arg;
        }
    }
    let mut num = F::zero();
    let mut den = F::zero();
    for &j in donors {
        let u = (scores[j] - pi) * inv_h;
        let k = (-u * u * half - max_arg).exp();
        num += k * y[j];
        den += k;
    }
    num / den
}

fn nearest_donor<F: Real>(scores: &[F], receiver: usize, donors: &[usize]) -> usize {
    let pi = scores[receiver];
    let mut best = donors[0];
    let mut best_d = (scores[best] - pi).abs();
    // Strict improvement keeps the lowest index among distance ties.
    for &j in &donors[1..] {
        let d = (scores[j] - pi).abs();
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Impute both missing potential outcomes by kernel-weighted matching on the
/// propensity score, with the nearest-donor underflow fallback.
pub fn impute<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    kernel: KernelSpec<F>,
) -> Result<ImputedOutcomes<F>, EstimatorError> {
    impute_with(sample, scores, kernel, UnderflowPolicy::default())
}

/// As [`impute`], with an explicit empty-neighborhood policy.
pub fn impute_with<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    kernel: KernelSpec<F>,
    policy: UnderflowPolicy,
) -> Result<ImputedOutcomes<F>, EstimatorError> {
    check_scores(scores, sample.len())?;
    let (treated, controls) = group_indices(sample);
    let (t_side, c_side) =
        cross_smooth(sample.y(), scores, &treated, &controls, kernel, true, true, policy)?;
    let t_side = t_side.expect("treated side requested");
    let c_side = c_side.expect("control side requested");

    let mut y0hat = sample.y().to_vec();
    let mut y1hat = sample.y().to_vec();
    for (a, &i) in treated.iter().enumerate() {
        y0hat[i] = t_side.values[a];
    }
    for (b, &j) in controls.iter().enumerate() {
        y1hat[j] = c_side.values[b];
    }
    debug_assert!(imputations_are_convex(sample, &treated, &controls, &y0hat, &y1hat));
    Ok(ImputedOutcomes { y0hat, y1hat, fallback_units: t_side.fallbacks + c_side.fallbacks })
}

/// Every imputed value is a convex combination of donor outcomes, so it must
/// lie inside the donor group's outcome range (modulo rounding slack).
fn imputations_are_convex<F: Real>(
    sample: &ObservationalSample<F>,
    treated: &[usize],
    controls: &[usize],
    y0hat: &[F],
    y1hat: &[F],
) -> bool {
    let range = |idx: &[usize]| {
        let mut lo = sample.y()[idx[0]];
        let mut hi = lo;
        for &i in idx {
            lo = lo.min(sample.y()[i]);
            hi = hi.max(sample.y()[i]);
        }
        (lo, hi)
    };
    let slack = |lo: F, hi: F| (hi - lo).abs().max(F::one()) * F::of(1e-10);
    let (c_lo, c_hi) = range(controls);
    let s0 = slack(c_lo, c_hi);
    let ok_t = treated.iter().all(|&i| y0hat[i] >= c_lo - s0 && y0hat[i] <= c_hi + s0);
    let (t_lo, t_hi) = range(treated);
    let s1 = slack(t_lo, t_hi);
    let ok_c = controls.iter().all(|&j| y1hat[j] >= t_lo - s1 && y1hat[j] <= t_hi + s1);
    ok_t && ok_c
}

/// Kernel matching estimate of the average treatment effect.
pub fn kernel_match_ate<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    kernel: KernelSpec<F>,
) -> Result<EffectEstimate<F>, EstimatorError> {
    kernel_match_ate_with(sample, scores, kernel, UnderflowPolicy::default())
}

pub fn kernel_match_ate_with<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    kernel: KernelSpec<F>,
    policy: UnderflowPolicy,
) -> Result<EffectEstimate<F>, EstimatorError> {
    let imputed = impute_with(sample, scores, kernel, policy)?;
    let n = F::of_usize(sample.len());
    let mut acc = F::zero();
    for i in 0..sample.len() {
        acc += imputed.y1hat[i] - imputed.y0hat[i];
    }
    Ok(EffectEstimate::point_only(Estimand::Ate, Method::KernelMatch, acc / n))
}

/// Kernel matching estimate of the average effect on the treated.
pub fn kernel_match_att<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    kernel: KernelSpec<F>,
) -> Result<EffectEstimate<F>, EstimatorError> {
    kernel_match_att_with(sample, scores, kernel, UnderflowPolicy::default())
}

pub fn kernel_match_att_with<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    kernel: KernelSpec<F>,
    policy: UnderflowPolicy,
) -> Result<EffectEstimate<F>, EstimatorError> {
    check_scores(scores, sample.len())?;
    let (treated, controls) = group_indices(sample);
    // Only the treated units' Y(0) is needed; the control direction is skipped.
    let (t_side, _) =
        cross_smooth(sample.y(), scores, &treated, &controls, kernel, true, false, policy)?;
    let t_side = t_side.expect("treated side requested");
    let mut acc = F::zero();
    for (a, &i) in treated.iter().enumerate() {
        acc += sample.y()[i] - t_side.values[a];
    }
    let point = acc / F::of_usize(treated.len());
    Ok(EffectEstimate::point_only(Estimand::Att, Method::KernelMatch, point))
}

/// Distance metric for nearest-neighbor matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NnMetric {
    /// Euclidean distance on per-coordinate standardized covariates.
    Covariates,
    /// Absolute difference of propensity scores.
    PScore,
}

/// Nearest-neighbor matching with replacement, k donors per unit.
///
/// Distance ties at the k-th neighbor keep the lowest-index donor, making the
/// match deterministic across runs and platforms.
pub fn nn_match<F: Real>(
    sample: &ObservationalSample<F>,
    metric: NnMetric,
    scores: Option<&[F]>,
    estimand: Estimand,
    k: usize,
) -> Result<EffectEstimate<F>, EstimatorError> {
    // The ATT imputes treated units only, so just the control pool bounds k;
    // the ATE needs k donors on both sides.
    let donor_bound = match estimand {
        Estimand::Att => sample.n_control(),
        Estimand::Ate => sample.n_treated().min(sample.n_control()),
    };
    if k == 0 || k > donor_bound {
        return Err(EstimatorError::InvalidK { k, max: donor_bound });
    }
    let n = sample.len();
    let d = sample.dim();
    let (treated, controls) = group_indices(sample);

    // Precompute the per-unit feature rows the metric compares.
    let features: Vec<F> = match metric {
        NnMetric::Covariates => {
            let scale = standard_scales(sample);
            let mut z = Vec::with_capacity(n * d);
            for i in 0..n {
                for (c, &v) in sample.covariates(i).iter().enumerate() {
                    z.push(v / scale[c]);
                }
            }
            z
        }
        NnMetric::PScore => {
            let s = scores.expect("propensity scores are required for the score metric");
            check_scores(s, n)?;
            s.to_vec()
        }
    };
    let width = match metric {
        NnMetric::Covariates => d,
        NnMetric::PScore => 1,
    };
    let dist2 = |i: usize, j: usize| {
        let a = &features[i * width..(i + 1) * width];
        let b = &features[j * width..(j + 1) * width];
        let mut acc = F::zero();
        for c in 0..width {
            let diff = a[c] - b[c];
            acc += diff * diff;
        }
        acc
    };

    let impute_one = |i: usize, donors: &[usize]| -> F {
        if k == 1 {
            // Linear scan; strict improvement keeps the lowest index on ties.
            let mut best = donors[0];
            let mut best_d = dist2(i, best);
            for &j in &donors[1..] {
                let dj = dist2(i, j);
                if dj < best_d {
                    best = j;
                    best_d = dj;
                }
            }
            sample.y()[best]
        } else {
            let mut ranked: Vec<(F, usize)> = donors.iter().map(|&j| (dist2(i, j), j)).collect();
            ranked.sort_unstable_by(|a, b| {
                a.0.partial_cmp(&b.0).expect("finite distances").then(a.1.cmp(&b.1))
            });
            let mut acc = F::zero();
            for &(_, j) in ranked.iter().take(k) {
                acc += sample.y()[j];
            }
            acc / F::of_usize(k)
        }
    };

    let method = match metric {
        NnMetric::Covariates => Method::NnCovariates,
        NnMetric::PScore => Method::NnPscore,
    };
    let point = match estimand {
        Estimand::Att => {
            let mut acc = F::zero();
            for &i in &treated {
                acc += sample.y()[i] - impute_one(i, &controls);
            }
            acc / F::of_usize(treated.len())
        }
        Estimand::Ate => {
            let mut acc = F::zero();
            for &i in &treated {
                acc += sample.y()[i] - impute_one(i, &controls);
            }
            for &j in &controls {
                acc += impute_one(j, &treated) - sample.y()[j];
            }
            acc / F::of_usize(n)
        }
    };
    Ok(EffectEstimate::point_only(estimand, method, point))
}

/// Per-coordinate sample standard deviations (denominator N - 1); constant
/// columns get scale 1 so they simply stop contributing to distances.
fn standard_scales<F: Real>(sample: &ObservationalSample<F>) -> Vec<F> {
    let n = sample.len();
    let d = sample.dim();
    let nf = F::of_usize(n);
    let mut mean = vec![F::zero(); d];
    for i in 0..n {
        for (c, &v) in sample.covariates(i).iter().enumerate() {
            mean[c] += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= nf;
    }
    let mut ss = vec![F::zero(); d];
    for i in 0..n {
        for (c, &v) in sample.covariates(i).iter().enumerate() {
            let dev = v - mean[c];
            ss[c] += dev * dev;
        }
    }
    ss.into_iter()
        .map(|s| {
            let var = s / F::of_usize(n - 1);
            if var > F::zero() {
                var.sqrt()
            } else {
                F::one()
            }
        })
        .collect()
}

/// Normalized inverse probability weighting.
///
/// ATE divides each group's weighted outcome sum by its weight sum; ATT
/// reweights controls by the odds p/(1 - p) of their scores.
pub fn ipw<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    estimand: Estimand,
) -> Result<EffectEstimate<F>, EstimatorError> {
    check_scores(scores, sample.len())?;
    let y = sample.y();
    let w = sample.w();
    let point = match estimand {
        Estimand::Ate => {
            let mut num1 = F::zero();
            let mut den1 = F::zero();
            let mut num0 = F::zero();
            let mut den0 = F::zero();
            for i in 0..sample.len() {
                if w[i] {
                    let inv = F::one() / scores[i];
                    num1 += y[i] * inv;
                    den1 += inv;
                } else {
                    let inv = F::one() / (F::one() - scores[i]);
                    num0 += y[i] * inv;
                    den0 += inv;
                }
            }
            num1 / den1 - num0 / den0
        }
        Estimand::Att => {
            let mut treated_sum = F::zero();
            let mut num0 = F::zero();
            let mut den0 = F::zero();
            for i in 0..sample.len() {
                if w[i] {
                    treated_sum += y[i];
                } else {
                    let odds = scores[i] / (F::one() - scores[i]);
                    num0 += y[i] * odds;
                    den0 += odds;
                }
            }
            treated_sum / F::of_usize(sample.n_treated()) - num0 / den0
        }
    };
    Ok(EffectEstimate::point_only(estimand, Method::Ipw, point))
}

/// Least-squares coefficients of Y on (1, X) within one treatment group.
pub fn ols_outcome_model<F: Real>(
    sample: &ObservationalSample<F>,
    treated_group: bool,
) -> Result<Vec<F>, EstimatorError> {
    let d = sample.dim();
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for i in 0..sample.len() {
        if sample.w()[i] == treated_group {
            rows.push(F::one());
            rows.extend_from_slice(sample.covariates(i));
            ys.push(sample.y()[i]);
        }
    }
    ols(&rows, ys.len(), d + 1, &ys)
        .map_err(|source| EstimatorError::OutcomeModel { treated: treated_group, source })
}

fn linear_predictions<F: Real>(sample: &ObservationalSample<F>, coef: &[F]) -> Vec<F> {
    (0..sample.len())
        .map(|i| {
            let mut v = coef[0];
            for (c, &x) in sample.covariates(i).iter().enumerate() {
                v += coef[c + 1] * x;
            }
            v
        })
        .collect()
}

/// Doubly robust estimate with outcome regressions fit internally by OLS of Y
/// on (1, X) within each treatment group.
pub fn dr<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    estimand: Estimand,
) -> Result<EffectEstimate<F>, EstimatorError> {
    let mu1 = linear_predictions(sample, &ols_outcome_model(sample, true)?);
    let mu0 = linear_predictions(sample, &ols_outcome_model(sample, false)?);
    dr_from_regressions(sample, scores, &mu1, &mu0, estimand)
}

/// Doubly robust estimate with caller-supplied outcome regression values.
///
/// The ATE form is the augmented IPW moment: each group's inverse weighted
/// outcome is recentered by its regression prediction so either a correct
/// score model or a correct outcome model suffices. The ATT form reweights
/// the control-side augmentation by the score odds and averages over treated
/// units only.
pub fn dr_from_regressions<F: Real>(
    sample: &ObservationalSample<F>,
    scores: &[F],
    mu1: &[F],
    mu0: &[F],
    estimand: Estimand,
) -> Result<EffectEstimate<F>, EstimatorError> {
    check_scores(scores, sample.len())?;
    assert_eq!(mu1.len(), sample.len(), "mu1 length must match the sample");
    assert_eq!(mu0.len(), sample.len(), "mu0 length must match the sample");
    let y = sample.y();
    let w = sample.w();
    let n = sample.len();
    let point = match estimand {
        Estimand::Ate => {
            let mut acc = F::zero();
            for i in 0..n {
                let wi = if w[i] { F::one() } else { F::zero() };
                let p = scores[i];
                let arm1 = wi * y[i] / p - (wi - p) / p * mu1[i];
                let arm0 =
                    (F::one() - wi) * y[i] / (F::one() - p) + (wi - p) / (F::one() - p) * mu0[i];
                acc += arm1 - arm0;
            }
            acc / F::of_usize(n)
        }
        Estimand::Att => {
            let mut acc = F::zero();
            for i in 0..n {
                let wi = if w[i] { F::one() } else { F::zero() };
                let p = scores[i];
                let control_part =
                    ((F::one() - wi) * y[i] * p + mu0[i] * (wi - p)) / (F::one() - p);
                acc += wi * y[i] - control_part;
            }
            acc / F::of_usize(sample.n_treated())
        }
    };
    Ok(EffectEstimate::point_only(estimand, Method::DoublyRobust, point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propensity::sigmoid;
    use crate::seeding::stream_rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn two_group_sample(pairs: &[(f64, bool)]) -> ObservationalSample<f64> {
        let y: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let w: Vec<bool> = pairs.iter().map(|p| p.1).collect();
        let x: Vec<f64> = (0..pairs.len()).map(|i| i as f64).collect();
        ObservationalSample::new(y, w, x, 1)
    }

    fn random_sample(n: usize, seed: u64) -> (ObservationalSample<f64>, Vec<f64>) {
        let mut rng = stream_rng(seed, 0);
        loop {
            let mut y = Vec::with_capacity(n);
            let mut w = Vec::with_capacity(n);
            let mut x = Vec::with_capacity(n * 2);
            let mut scores = Vec::with_capacity(n);
            for _ in 0..n {
                let x1: f64 = rng.random_range(-1.0..1.0);
                let x2: f64 = rng.random_range(-1.0..1.0);
                let p = sigmoid(0.3 * x1 - 0.8 * x2);
                let t = rng.random::<f64>() < p;
                y.push(rng.random_range(-2.0..2.0) + if t { 1.0 } else { 0.0 });
                w.push(t);
                x.push(x1);
                x.push(x2);
                scores.push(p);
            }
            if let Ok(sample) = ObservationalSample::try_new(y, w, x, 2) {
                if sample.n_treated() >= 4 && sample.n_control() >= 4 {
                    return (sample, scores);
                }
            }
        }
    }

    #[test]
    fn sample_rejects_inconsistent_or_one_sided_input() {
        assert!(matches!(
            ObservationalSample::try_new(vec![1.0], vec![true, false], vec![0.0], 1),
            Err(SampleError::LengthMismatch { .. })
        ));
        assert!(matches!(
            ObservationalSample::try_new(vec![1.0, f64::NAN], vec![true, false], vec![0.0, 1.0], 1),
            Err(SampleError::NonFinite { row: 1 })
        ));
        assert_eq!(
            ObservationalSample::try_new(vec![1.0, 2.0], vec![true, true], vec![0.0, 1.0], 1),
            Err(SampleError::OneSided)
        );
    }

    #[test]
    fn impute_matches_the_four_unit_hand_computation() {
        // Treated at p = 0.30; controls at 0.20, 0.40, 0.70 with outcomes
        // 1, 2, 10. Normalized arguments -1, 1, 4 give Gaussian weights
        // 0.24197, 0.24197, 1.3383e-4 and a weighted mean of 1.50235.
        let sample =
            two_group_sample(&[(5.0, true), (1.0, false), (2.0, false), (10.0, false)]);
        let scores = [0.30, 0.20, 0.40, 0.70];
        let kernel = KernelSpec::gaussian(0.1);
        let imputed = impute(&sample, &scores, kernel).unwrap();
        let k = |u: f64| kernel.eval(u);
        let expect = (1.0 * k(-1.0) + 2.0 * k(1.0) + 10.0 * k(4.0)) / (k(-1.0) + k(1.0) + k(4.0));
        assert_abs_diff_eq!(imputed.y0hat[0], expect, epsilon = 1e-14);
        assert_abs_diff_eq!(imputed.y0hat[0], 1.5023499587104117, epsilon = 1e-12);
        // Observed entries are verbatim copies.
        assert_eq!(imputed.y1hat[0], 5.0);
        assert_eq!(imputed.y0hat[1], 1.0);
        assert_eq!(imputed.fallback_units, 0);
    }

    #[test]
    fn symmetric_donors_average_symmetrically() {
        let sample = two_group_sample(&[(9.0, true), (1.0, false), (3.0, false)]);
        let scores = [0.5, 0.4, 0.6];
        for h in [0.01, 0.1, 1.0] {
            let imputed = impute(&sample, &scores, KernelSpec::gaussian(h)).unwrap();
            assert_abs_diff_eq!(imputed.y0hat[0], 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_donor_dominates_regardless_of_kernel() {
        let sample = two_group_sample(&[(4.0, true), (7.0, true), (2.5, false)]);
        let scores = [0.3, 0.8, 0.55];
        for kernel in [KernelSpec::gaussian(0.05), KernelSpec::epanechnikov(0.9)] {
            let imputed = impute(&sample, &scores, kernel).unwrap();
            assert_eq!(imputed.y0hat[0], 2.5);
            assert_eq!(imputed.y0hat[1], 2.5);
        }
    }

    #[test]
    fn ate_collapses_to_group_mean_difference_under_flat_weights() {
        let sample = two_group_sample(&[
            (1.0, true),
            (5.0, true),
            (2.0, false),
            (4.0, false),
            (9.0, false),
        ]);
        let scores = [0.5; 5];
        let est = kernel_match_ate(&sample, &scores, KernelSpec::gaussian(1e6)).unwrap();
        assert_abs_diff_eq!(est.point, 3.0 - 5.0, epsilon = 1e-10);
        let att = kernel_match_att(&sample, &scores, KernelSpec::gaussian(1e6)).unwrap();
        assert_abs_diff_eq!(att.point, -2.0, epsilon = 1e-10);
    }

    #[test]
    fn large_bandwidth_collapses_any_sample_to_mean_difference() {
        let (sample, scores) = random_sample(60, 12);
        let mut t_sum = 0.0;
        let mut c_sum = 0.0;
        for i in 0..sample.len() {
            if sample.w()[i] {
                t_sum += sample.y()[i];
            } else {
                c_sum += sample.y()[i];
            }
        }
        let diff = t_sum / sample.n_treated() as f64 - c_sum / sample.n_control() as f64;
        let est = kernel_match_ate(&sample, &scores, KernelSpec::gaussian(1e6)).unwrap();
        assert_abs_diff_eq!(est.point, diff, epsilon = 1e-6);
        let att = kernel_match_att(&sample, &scores, KernelSpec::gaussian(1e6)).unwrap();
        assert_abs_diff_eq!(att.point, diff, epsilon = 1e-6);
    }

    #[test]
    fn exact_twins_cancel_at_small_bandwidth() {
        let sample = two_group_sample(&[
            (1.0, true),
            (1.0, false),
            (2.0, true),
            (2.0, false),
            (3.0, true),
            (3.0, false),
        ]);
        let scores = [0.2, 0.2, 0.5, 0.5, 0.8, 0.8];
        let est = kernel_match_ate(&sample, &scores, KernelSpec::gaussian(1e-4)).unwrap();
        assert_abs_diff_eq!(est.point, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn att_of_one_pair_is_the_outcome_difference() {
        let sample = two_group_sample(&[(4.5, true), (1.25, false)]);
        let scores = [0.6, 0.3];
        for kernel in [KernelSpec::gaussian(0.02), KernelSpec::epanechnikov(0.5)] {
            let est = kernel_match_att(&sample, &scores, kernel).unwrap();
            assert_abs_diff_eq!(est.point, 3.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn ate_equals_the_signed_cross_smoother_form() {
        // The definition averages y1hat - y0hat; the equivalent signed form
        // averages (2W - 1)(Y - cross-group smoother). Both must agree.
        let (sample, scores) = random_sample(80, 3);
        let kernel = KernelSpec::gaussian(0.08);
        let est = kernel_match_ate(&sample, &scores, kernel).unwrap();
        let imputed = impute(&sample, &scores, kernel).unwrap();
        let mut signed = 0.0;
        for i in 0..sample.len() {
            let smoother =
                if sample.w()[i] { imputed.y0hat[i] } else { imputed.y1hat[i] };
            let sign = if sample.w()[i] { 1.0 } else { -1.0 };
            signed += sign * (sample.y()[i] - smoother);
        }
        signed /= sample.len() as f64;
        assert_abs_diff_eq!(est.point, signed, epsilon = 1e-12);
    }

    #[test]
    fn distant_gaussian_neighborhoods_recover_exactly() {
        // All direct weights underflow; the shifted recomputation must land
        // on the nearest control's outcome instead of failing.
        let sample = two_group_sample(&[(0.0, true), (7.0, false), (8.0, false)]);
        let scores = [0.9999, 0.0002, 0.0001];
        let imputed = impute(&sample, &scores, KernelSpec::gaussian(1e-6)).unwrap();
        assert!(imputed.y0hat[0].is_finite());
        assert_abs_diff_eq!(imputed.y0hat[0], 7.0, epsilon = 1e-12);
        assert_eq!(imputed.fallback_units, 0);
    }

    #[test]
    fn empty_epanechnikov_neighborhood_follows_the_policy() {
        let sample = two_group_sample(&[(0.0, true), (7.0, false), (8.0, false)]);
        let scores = [0.9, 0.25, 0.1];
        let kernel = KernelSpec::epanechnikov(0.05);
        let fell_back = impute(&sample, &scores, kernel).unwrap();
        assert_eq!(fell_back.y0hat[0], 7.0);
        // All three units sit in empty neighborhoods: the treated unit and
        // both controls (whose only possible donor is the distant treated).
        assert_eq!(fell_back.fallback_units, 3);
        assert_eq!(fell_back.y1hat[1], 0.0);
        assert_eq!(fell_back.y1hat[2], 0.0);
        let err = impute_with(&sample, &scores, kernel, UnderflowPolicy::Error).unwrap_err();
        assert_eq!(err, EstimatorError::DenominatorUnderflow { unit: 0 });
    }

    #[test]
    fn nn_with_all_donors_is_the_donor_group_mean() {
        let sample = two_group_sample(&[(5.0, true), (1.0, false), (2.0, false), (6.0, false)]);
        let scores = [0.5, 0.2, 0.4, 0.9];
        let est = nn_match(&sample, NnMetric::PScore, Some(&scores), Estimand::Att, 3).unwrap();
        assert_abs_diff_eq!(est.point, 5.0 - 3.0, epsilon = 1e-12);
    }

    #[test]
    fn nn_selects_an_exact_covariate_duplicate() {
        let y = vec![10.0, 1.0, 2.0];
        let w = vec![true, false, false];
        let x = vec![1.0, 2.0, 5.0, -1.0, 1.0, 2.0];
        let sample = ObservationalSample::new(y, w, x, 2);
        let est = nn_match(&sample, NnMetric::Covariates, None, Estimand::Att, 1).unwrap();
        // The duplicate row (1, 2) carries outcome 2.
        assert_abs_diff_eq!(est.point, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn nn_breaks_distance_ties_toward_the_lowest_index() {
        let sample = two_group_sample(&[(0.0, true), (3.0, false), (9.0, false)]);
        let scores = [0.5, 0.4, 0.6];
        for k in [1, 2] {
            let est =
                nn_match(&sample, NnMetric::PScore, Some(&scores), Estimand::Att, k).unwrap();
            let expect = if k == 1 { -3.0 } else { -6.0 };
            assert_abs_diff_eq!(est.point, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn nn_rejects_k_beyond_the_donor_pool() {
        let (sample, scores) = random_sample(30, 4);
        let max = sample.n_treated().min(sample.n_control());
        let err = nn_match(&sample, NnMetric::PScore, Some(&scores), Estimand::Ate, max + 1)
            .unwrap_err();
        assert_eq!(err, EstimatorError::InvalidK { k: max + 1, max });
        // The ATT only draws donors from the control group.
        let max_att = sample.n_control();
        let err = nn_match(&sample, NnMetric::PScore, Some(&scores), Estimand::Att, max_att + 1)
            .unwrap_err();
        assert_eq!(err, EstimatorError::InvalidK { k: max_att + 1, max: max_att });
    }

    #[test]
    fn constant_covariate_columns_do_not_poison_nn_distances() {
        let y = vec![1.0, 2.0, 3.0, 4.0];
        let w = vec![true, true, false, false];
        // Second column is constant; distances reduce to the first column.
        let x = vec![0.0, 7.0, 1.0, 7.0, 0.1, 7.0, 5.0, 7.0];
        let sample = ObservationalSample::new(y, w, x, 2);
        let est = nn_match(&sample, NnMetric::Covariates, None, Estimand::Att, 1).unwrap();
        // Both treated units are nearest to the control at 0.1 (outcome 3).
        assert_abs_diff_eq!(est.point, (1.0 - 3.0 + 2.0 - 3.0) / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ipw_att_matches_the_three_unit_hand_case() {
        let sample = two_group_sample(&[(2.0, true), (1.0, false), (3.0, false)]);
        let scores = [0.5, 0.25, 0.75];
        let est = ipw(&sample, &scores, Estimand::Att).unwrap();
        // Odds 1/3 and 3: weighted control mean (1/3 + 9) / (10/3) = 2.8.
        assert_abs_diff_eq!(est.point, -0.8, epsilon = 1e-12);
    }

    #[test]
    fn constant_scores_reduce_ipw_to_mean_differences() {
        let (sample, _) = random_sample(50, 8);
        let scores = vec![0.5; sample.len()];
        let mut t_sum = 0.0;
        let mut c_sum = 0.0;
        for i in 0..sample.len() {
            if sample.w()[i] {
                t_sum += sample.y()[i];
            } else {
                c_sum += sample.y()[i];
            }
        }
        let diff = t_sum / sample.n_treated() as f64 - c_sum / sample.n_control() as f64;
        for estimand in [Estimand::Ate, Estimand::Att] {
            let est = ipw(&sample, &scores, estimand).unwrap();
            assert_abs_diff_eq!(est.point, diff, epsilon = 1e-12);
        }
    }

    #[test]
    fn degenerate_scores_are_refused() {
        let sample = two_group_sample(&[(1.0, true), (2.0, false)]);
        for bad in [0.0, 1.0] {
            let scores = [bad, 0.5];
            let err = ipw(&sample, &scores, Estimand::Ate).unwrap_err();
            assert!(matches!(err, EstimatorError::DegenerateScore { unit: 0, .. }));
            let err = impute(&sample, &scores, KernelSpec::gaussian(0.1)).unwrap_err();
            assert!(matches!(err, EstimatorError::DegenerateScore { unit: 0, .. }));
        }
    }

    #[test]
    fn outcome_model_recovers_exact_lines_and_constants() {
        let y = vec![2.0, 5.0, 8.0, 7.0, 7.0];
        let w = vec![true, true, true, false, false];
        let x = vec![0.0, 1.0, 2.0, 0.5, 1.5];
        let sample = ObservationalSample::new(y, w, x, 1);
        // Treated outcomes follow y = 2 + 3x exactly.
        let beta_t = ols_outcome_model(&sample, true).unwrap();
        assert_abs_diff_eq!(beta_t[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(beta_t[1], 3.0, epsilon = 1e-10);
        // Control outcomes are constant, so the slope vanishes.
        let beta_c = ols_outcome_model(&sample, false).unwrap();
        assert_abs_diff_eq!(beta_c[0], 7.0, epsilon = 1e-10);
        assert_abs_diff_eq!(beta_c[1], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn outcome_model_residuals_are_orthogonal_to_the_design() {
        let (sample, _) = random_sample(120, 21);
        for group in [true, false] {
            let coef = ols_outcome_model(&sample, group).unwrap();
            let fitted = linear_predictions(&sample, &coef);
            let mut dots = vec![0.0; sample.dim() + 1];
            for i in 0..sample.len() {
                if sample.w()[i] == group {
                    let r = sample.y()[i] - fitted[i];
                    dots[0] += r;
                    for (c, &v) in sample.covariates(i).iter().enumerate() {
                        dots[c + 1] += r * v;
                    }
                }
            }
            for dot in dots {
                assert!(dot.abs() < 1e-8, "residual correlation {dot} too large");
            }
        }
    }

    #[test]
    fn dr_is_exact_when_both_nuisances_are_exact() {
        // Linear potential outcomes with zero noise: the regression fits
        // reproduce them exactly and every augmentation term cancels.
        let mut rng = stream_rng(77, 0);
        let n = 200;
        let mut y = Vec::new();
        let mut w = Vec::new();
        let mut x = Vec::new();
        let mut scores = Vec::new();
        let mut truth_sum = 0.0;
        for _ in 0..n {
            let x1: f64 = rng.random_range(-1.0..1.0);
            let p = sigmoid(0.5 * x1);
            let t = rng.random::<f64>() < p;
            let y0 = 1.0 + 2.0 * x1;
            let y1 = 4.0 - x1;
            truth_sum += y1 - y0;
            y.push(if t { y1 } else { y0 });
            w.push(t);
            x.push(x1);
            scores.push(p);
        }
        let sample = ObservationalSample::new(y, w, x, 1);
        let est = dr(&sample, &scores, Estimand::Ate).unwrap();
        assert_abs_diff_eq!(est.point, truth_sum / n as f64, epsilon = 1e-10);
    }

    #[test]
    fn dr_with_zeroed_regressions_reduces_to_doubled_group_sums() {
        let (sample, _) = random_sample(60, 15);
        let scores = vec![0.5; sample.len()];
        let zeros = vec![0.0; sample.len()];
        let est =
            dr_from_regressions(&sample, &scores, &zeros, &zeros, Estimand::Ate).unwrap();
        let n = sample.len() as f64;
        let mut wy = 0.0;
        let mut cy = 0.0;
        for i in 0..sample.len() {
            if sample.w()[i] {
                wy += sample.y()[i];
            } else {
                cy += sample.y()[i];
            }
        }
        assert_abs_diff_eq!(est.point, 2.0 * wy / n - 2.0 * cy / n, epsilon = 1e-12);
    }

    #[test]
    fn dr_att_averages_only_over_treated_units() {
        // With exact nuisances the ATT reduces to the treated mean of
        // y1 - mu0; verify on noiseless linear data.
        let xs = [-0.6, -0.2, 0.1, 0.4, 0.8, -0.9, 0.3, 0.7];
        let ws = [true, false, true, false, true, false, true, false];
        let mut y = Vec::new();
        let mut truth = 0.0;
        let mut n1 = 0.0;
        for (i, &x1) in xs.iter().enumerate() {
            let y0 = 2.0 * x1;
            let y1 = 3.0 + 2.0 * x1;
            if ws[i] {
                truth += y1 - y0;
                n1 += 1.0;
            }
            y.push(if ws[i] { y1 } else { y0 });
        }
        let sample = ObservationalSample::new(y, ws.to_vec(), xs.to_vec(), 1);
        let scores: Vec<f64> = xs.iter().map(|&x| sigmoid(0.4 * x)).collect();
        let est = dr(&sample, &scores, Estimand::Att).unwrap();
        assert_abs_diff_eq!(est.point, truth / n1, epsilon = 1e-9);
    }

    #[test]
    fn estimates_are_shift_and_scale_equivariant() {
        let (sample, scores) = random_sample(70, 42);
        let kernel = KernelSpec::gaussian(0.1);
        let shift = 13.5;
        let scale = -2.25;
        let shifted = ObservationalSample::new(
            sample.y().iter().map(|v| v + shift).collect(),
            sample.w().to_vec(),
            sample.x().to_vec(),
            sample.dim(),
        );
        let scaled = ObservationalSample::new(
            sample.y().iter().map(|v| v * scale).collect(),
            sample.w().to_vec(),
            sample.x().to_vec(),
            sample.dim(),
        );
        type Est = fn(&ObservationalSample<f64>, &[f64]) -> f64;
        let cases: Vec<(&str, Est)> = vec![
            ("kernel-ate", |s, p| {
                kernel_match_ate(s, p, KernelSpec::gaussian(0.1)).unwrap().point
            }),
            ("kernel-att", |s, p| {
                kernel_match_att(s, p, KernelSpec::gaussian(0.1)).unwrap().point
            }),
            ("nn-cov", |s, p| {
                nn_match(s, NnMetric::Covariates, Some(p), Estimand::Ate, 1).unwrap().point
            }),
            ("nn-ps", |s, p| {
                nn_match(s, NnMetric::PScore, Some(p), Estimand::Att, 1).unwrap().point
            }),
            ("ipw-ate", |s, p| ipw(s, p, Estimand::Ate).unwrap().point),
            ("ipw-att", |s, p| ipw(s, p, Estimand::Att).unwrap().point),
            ("dr-ate", |s, p| dr(s, p, Estimand::Ate).unwrap().point),
        ];
        let _ = kernel;
        for (name, f) in cases {
            let base = f(&sample, &scores);
            let tol = 1e-9 * base.abs().max(1.0);
            assert!(
                (f(&shifted, &scores) - base).abs() < tol,
                "{name} not shift invariant"
            );
            assert!(
                (f(&scaled, &scores) - scale * base).abs() < tol * scale.abs(),
                "{name} not scale equivariant"
            );
        }
    }

    #[test]
    fn estimates_survive_row_permutation() {
        let (sample, scores) = random_sample(40, 33);
        let n = sample.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let permuted = sample.gather(&perm).unwrap();
        let perm_scores: Vec<f64> = perm.iter().map(|&i| scores[i]).collect();
        let kernel = KernelSpec::gaussian(0.07);
        let pairs = [
            (
                kernel_match_ate(&sample, &scores, kernel).unwrap().point,
                kernel_match_ate(&permuted, &perm_scores, kernel).unwrap().point,
            ),
            (
                kernel_match_att(&sample, &scores, kernel).unwrap().point,
                kernel_match_att(&permuted, &perm_scores, kernel).unwrap().point,
            ),
            (
                ipw(&sample, &scores, Estimand::Ate).unwrap().point,
                ipw(&permuted, &perm_scores, Estimand::Ate).unwrap().point,
            ),
            (
                dr(&sample, &scores, Estimand::Att).unwrap().point,
                dr(&permuted, &perm_scores, Estimand::Att).unwrap().point,
            ),
            (
                nn_match(&sample, NnMetric::Covariates, None, Estimand::Ate, 2).unwrap().point,
                nn_match(&permuted, NnMetric::Covariates, None, Estimand::Ate, 2)
                    .unwrap()
                    .point,
            ),
        ];
        for (a, b) in pairs {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10 * a.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn imputations_stay_inside_the_donor_range(seed in 0u64..500) {
            let (sample, scores) = random_sample(30, seed.wrapping_add(1000));
            for kernel in [KernelSpec::gaussian(0.05), KernelSpec::epanechnikov(0.3)] {
                let imputed = impute(&sample, &scores, kernel).unwrap();
                let mut c_lo = f64::INFINITY;
                let mut c_hi = f64::NEG_INFINITY;
                let mut t_lo = f64::INFINITY;
                let mut t_hi = f64::NEG_INFINITY;
                for i in 0..sample.len() {
                    if sample.w()[i] {
                        t_lo = t_lo.min(sample.y()[i]);
                        t_hi = t_hi.max(sample.y()[i]);
                    } else {
                        c_lo = c_lo.min(sample.y()[i]);
                        c_hi = c_hi.max(sample.y()[i]);
                    }
                }
                for i in 0..sample.len() {
                    if sample.w()[i] {
                        prop_assert!(imputed.y0hat[i] >= c_lo - 1e-9);
                        prop_assert!(imputed.y0hat[i] <= c_hi + 1e-9);
                    } else {
                        prop_assert!(imputed.y1hat[i] >= t_lo - 1e-9);
                        prop_assert!(imputed.y1hat[i] <= t_hi + 1e-9);
                    }
                }
            }
        }
    }
}
