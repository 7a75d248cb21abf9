//! Bootstrap standard errors and confidence intervals by unit resampling.
//!
//! Whole (Y, W, X) triples are drawn with replacement, so any propensity
//! estimation inside the supplied estimator is refit on every resample.
//! Replicate b draws from counter stream (seed, b); a rejected draw (one-sided
//! treatment, estimator failure, non-finite value) is redrawn from the same
//! replicate stream. Replicates therefore depend only on (sample, B, method,
//! level, seed), never on the parallel schedule.

use crate::estimators::ObservationalSample;
use crate::num::Real;
use crate::numeric::special::norm_quantile;
use crate::seeding::stream_rng;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Interval construction rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CiMethod {
    /// Order statistics of the replicate vector.
    Percentile,
    /// Full-sample point estimate +/- z * bootstrap standard error.
    NormalApprox,
}

/// Bootstrap summary for one estimator on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapResult<F> {
    /// Successful replicate values in replicate-index order (length B unless
    /// some replicates exhausted their retries, tolerated up to 10%).
    pub replicates: Vec<F>,
    /// Full-sample point estimate.
    pub point: F,
    /// Sample standard deviation of the replicates (divisor count - 1).
    pub se: F,
    pub ci: (F, F),
    pub method: CiMethod,
    pub level: F,
    /// Rejected draws across all replicates (one-sided or failed attempts).
    pub redraws: usize,
    /// Replicates that failed even after exhausting their retry budget.
    pub failed_replicates: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum BootstrapError {
    #[error("{failed} of {total} bootstrap replicates failed after retries")]
    Degenerate { failed: usize, total: usize },
    #[error("estimator failed on the full sample, no point estimate exists")]
    PointEstimateFailed,
}

/// Retry budget per replicate; across B replicates at most 10B redraws occur.
const MAX_REDRAWS_PER_REPLICATE: usize = 10;
/// z for the default 0.95 level, fixed so reports do not wobble in the last
/// digit with the quantile routine.
const Z_95: f64 = 1.959964;

/// Nonparametric bootstrap of `estimator` over `b` unit resamples.
///
/// The estimator returns `None` for an attempt that cannot be evaluated
/// (separation, rank deficiency, and so on); that attempt is redrawn. More
/// than 10% of replicates failing after retries is an error.
pub fn bootstrap<F, E>(
    sample: &ObservationalSample<F>,
    estimator: E,
    b: usize,
    method: CiMethod,
    level: F,
    seed: u64,
) -> Result<BootstrapResult<F>, BootstrapError>
where
    F: Real,
    E: Fn(&ObservationalSample<F>) -> Option<F> + Sync,
{
    assert!(b >= 2, "bootstrap needs at least two replicates, got {b}");
    assert!(
        level > F::zero() && level < F::one(),
        "confidence level must lie strictly inside (0, 1), got {level}"
    );
    let point = estimator(sample)
        .filter(|v| v.is_finite())
        .ok_or(BootstrapError::PointEstimateFailed)?;

    let n = sample.len();
    // Replicate results collect into replicate-index order, so the sequential
    // reduction below is bitwise identical for any thread count.
    let outcomes: Vec<(Option<F>, usize)> = (0..b)
        .into_par_iter()
        .map(|rep| {
            let mut rng = stream_rng(seed, rep as u64);
            let mut idx = vec![0usize; n];
            let mut redraws = 0usize;
            loop {
                for slot in idx.iter_mut() {
                    *slot = rng.random_range(0..n);
                }
                let value = sample
                    .gather(&idx)
                    .ok()
                    .and_then(|resample| estimator(&resample))
                    .filter(|v| v.is_finite());
                match value {
                    Some(v) => return (Some(v), redraws),
                    None if redraws < MAX_REDRAWS_PER_REPLICATE => redraws += 1,
                    None => return (None, redraws),
                }
            }
        })
        .collect();

    let mut replicates = Vec::with_capacity(b);
    let mut redraws = 0usize;
    let mut failed = 0usize;
    for (value, drawn) in outcomes {
        redraws += drawn;
        match value {
            Some(v) => replicates.push(v),
            None => failed += 1,
        }
    }
    if failed * 10 > b {
        return Err(BootstrapError::Degenerate { failed, total: b });
    }

    let se = sample_sd(&replicates);
    let ci = match method {
        CiMethod::Percentile => percentile_interval(&replicates, level),
        CiMethod::NormalApprox => {
            let z = normal_z(level);
            (point - z * se, point + z * se)
        }
    };
    Ok(BootstrapResult {
        replicates,
        point,
        se,
        ci,
        method,
        level,
        redraws,
        failed_replicates: failed,
    })
}

/// Percentile interval at ranks ceil(B alpha/2) and ceil(B (1 - alpha/2)),
/// 1-indexed into the sorted replicate vector, so both endpoints are always
/// elements of the replicates.
pub fn percentile_interval<F: Real>(replicates: &[F], level: F) -> (F, F) {
    assert!(!replicates.is_empty(), "percentile interval needs replicates");
    let mut sorted = replicates.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite replicates"));
    let b = sorted.len();
    let alpha = F::one() - level;
    let half = alpha / F::of(2.0);
    // Nudge below the rounding noise so that mathematically integral ranks
    // (0.025 * 400 = 10) are not pushed up a slot by the representation of
    // alpha; any real rank gap is far wider than 1e-9.
    let ceil_rank = |x: F| (x - F::of(1e-9)).ceil();
    let lo_rank = ceil_rank(half * F::of_usize(b)).to_usize().unwrap_or(1).max(1);
    let hi_rank = ceil_rank((F::one() - half) * F::of_usize(b))
        .to_usize()
        .unwrap_or(b)
        .clamp(1, b);
    (sorted[lo_rank - 1], sorted[hi_rank - 1])
}

/// Two-sided z quantile for a confidence level; 0.95 is pinned to 1.959964.
pub fn normal_z<F: Real>(level: F) -> F {
    if (level - F::of(0.95)).abs() < F::of(1e-12) {
        F::of(Z_95)
    } else {
        let half_alpha = (F::one() - level) / F::of(2.0);
        norm_quantile(F::one() - half_alpha)
    }
}

/// Standard deviation with divisor n - 1; zero for fewer than two values.
pub fn sample_sd<F: Real>(values: &[F]) -> F {
    let n = values.len();
    if n < 2 {
        return F::zero();
    }
    let nf = F::of_usize(n);
    let mean = values.iter().copied().fold(F::zero(), |a, v| a + v) / nf;
    let mut ss = F::zero();
    for &v in values {
        let dev = v - mean;
        ss += dev * dev;
    }
    (ss / (nf - F::one())).sqrt()
}

/// Empirical coverage and width of a set of intervals against a known truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage<F> {
    /// Fraction of intervals containing the truth (closed endpoints).
    pub cp: F,
    /// Mean interval width.
    pub aw: F,
}

pub fn coverage_and_width<F: Real>(intervals: &[(F, F)], truth: F) -> Coverage<F> {
    assert!(!intervals.is_empty(), "coverage needs at least one interval");
    let mut hits = 0usize;
    let mut width = F::zero();
    for &(lo, hi) in intervals {
        debug_assert!(lo <= hi, "interval endpoints out of order");
        if lo <= truth && truth <= hi {
            hits += 1;
        }
        width += hi - lo;
    }
    let n = F::of_usize(intervals.len());
    Coverage { cp: F::of_usize(hits) / n, aw: width / n }
}
