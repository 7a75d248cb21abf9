//! Logistic propensity model fit by maximum likelihood.
//!
//! Newton-Raphson with step-halving on the log-likelihood
//! sum_i W_i ln F(x_i'b) + (1 - W_i) ln(1 - F(x_i'b)), started from b = 0.
//! The link is fixed to logistic; fitted scores are clamped strictly inside
//! (0, 1) so downstream odds and inverse weights stay finite.

use crate::num::Real;
use crate::numeric::linalg::Cholesky;
use thiserror::Error;

/// Row-major design matrix. The intercept column is the caller's first column
/// by convention; nothing here adds one implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<F> {
    n: usize,
    d: usize,
    values: Vec<F>,
}

impl<F: Real> DesignMatrix<F> {
    pub fn new(n: usize, d: usize, values: Vec<F>) -> Self {
        assert_eq!(values.len(), n * d, "design matrix needs n*d values");
        assert!(d >= 1, "design matrix needs at least one column");
        assert!(
            values.iter().all(|v| v.is_finite()),
            "design matrix entries must be finite"
        );
        Self { n, d, values }
    }

    /// Build an intercept-plus-covariates design from row-major covariates.
    pub fn with_intercept(n: usize, d: usize, covariates: &[F]) -> Self {
        assert_eq!(covariates.len(), n * d, "covariate slice needs n*d values");
        let mut values = Vec::with_capacity(n * (d + 1));
        for row in 0..n {
            values.push(F::one());
            values.extend_from_slice(&covariates[row * d..(row + 1) * d]);
        }
        Self::new(n, d + 1, values)
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn cols(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    fn linear_predictor(&self, beta: &[F]) -> Vec<F> {
        assert_eq!(beta.len(), self.d, "coefficient length must match columns");
        (0..self.n)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(beta)
                    .map(|(&x, &b)| x * b)
                    .fold(F::zero(), |acc, t| acc + t)
            })
            .collect()
    }
}

/// Numerically stable logistic function, clamped to the open unit interval.
pub fn sigmoid<F: Real>(t: F) -> F {
    let p = if t >= F::zero() {
        F::one() / (F::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (F::one() + e)
    };
    // Keep scores strictly inside (0, 1) even when the exponent saturates.
    let hi = F::one() - F::epsilon() / F::of(2.0);
    p.max(F::min_positive_value()).min(hi)
}

/// Result of a logistic maximum likelihood fit.
#[derive(Debug, Clone)]
pub struct PropensityFit<F> {
    pub beta: Vec<F>,
    pub log_lik: F,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the mean score at `beta`.
    pub grad_norm: F,
    /// Fitted probabilities, strictly inside (0, 1).
    pub scores: Vec<F>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PropensityError {
    #[error("treatment vector needs at least one treated and one control unit")]
    DegenerateTreatment,
    /// The likelihood is diverging: coefficients are running away or the
    /// information matrix has lost numerical rank, both signatures of
    /// (quasi-)separated data.
    #[error("perfect separation suspected ({reason})")]
    Separation { reason: String },
}

/// Tolerances for [`fit_logistic`].
#[derive(Debug, Clone, Copy)]
pub struct FitOptions<F> {
    /// Convergence threshold on the infinity norm of the mean score.
    pub tol: F,
    pub max_iter: usize,
}

impl<F: Real> Default for FitOptions<F> {
    fn default() -> Self {
        Self { tol: F::of(1e-8), max_iter: 100 }
    }
}

const MAX_HALVINGS: usize = 30;
const BETA_DIVERGENCE_BOUND: f64 = 30.0;
const CONDITION_BOUND: f64 = 1e12;

/// Maximum likelihood logistic fit of treatment on the design columns.
pub fn fit_logistic<F: Real>(
    x: &DesignMatrix<F>,
    w: &[bool],
    opts: FitOptions<F>,
) -> Result<PropensityFit<F>, PropensityError> {
    assert_eq!(w.len(), x.rows(), "treatment length must match design rows");
    assert!(
        x.rows() >= x.cols(),
        "fit needs at least as many rows as columns"
    );
    if w.iter().all(|&t| t) || w.iter().all(|&t| !t) {
        return Err(PropensityError::DegenerateTreatment);
    }

    let d = x.cols();
    let mut beta = vec![F::zero(); d];
    let mut log_lik = log_likelihood(x, w, &beta);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut grad_norm;

    loop {
        let (score, info) = score_and_information(x, w, &beta);
        grad_norm = score.iter().fold(F::zero(), |m, s| m.max(s.abs()));
        if grad_norm <= opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;

        let chol = Cholesky::factor(&info, d).map_err(|e| PropensityError::Separation {
            reason: format!("information matrix is numerically singular: {e}"),
        })?;
        let ratio = chol.diag_ratio();
        if ratio * ratio > F::of(CONDITION_BOUND) {
            return Err(PropensityError::Separation {
                reason: format!(
                    "information matrix condition estimate {:.3e} exceeds {CONDITION_BOUND:.0e}",
                    (ratio * ratio).to_f64().unwrap_or(f64::INFINITY)
                ),
            });
        }
        // Newton direction for a maximization: I^{-1} S, both already 1/N scaled.
        let step = chol.solve(&score);

        let mut scale = F::one();
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<F> = beta
                .iter()
                .zip(&step)
                .map(|(&b, &s)| b + scale * s)
                .collect();
            let candidate_ll = log_likelihood(x, w, &candidate);
            if candidate_ll >= log_lik {
                beta = candidate;
                log_lik = candidate_ll;
                accepted = true;
                break;
            }
            scale = scale / F::of(2.0);
        }
        if !accepted {
            // No uphill step exists at this scale; we are at numerical best.
            break;
        }
        let beta_norm = beta.iter().fold(F::zero(), |m, b| m.max(b.abs()));
        if beta_norm > F::of(BETA_DIVERGENCE_BOUND) {
            return Err(PropensityError::Separation {
                reason: format!(
                    "coefficient norm {:.2} exceeds {BETA_DIVERGENCE_BOUND}",
                    beta_norm.to_f64().unwrap_or(f64::INFINITY)
                ),
            });
        }
    }

    let scores = x.linear_predictor(&beta).into_iter().map(sigmoid).collect();
    Ok(PropensityFit { beta, log_lik, iterations, converged, grad_norm, scores })
}

/// Predict probabilities for new rows under a fitted model.
pub fn predict<F: Real>(fit: &PropensityFit<F>, xnew: &DesignMatrix<F>) -> Vec<F> {
    assert_eq!(
        xnew.cols(),
        fit.beta.len(),
        "prediction design must match the fitted coefficient length"
    );
    xnew.linear_predictor(&fit.beta).into_iter().map(sigmoid).collect()
}

/// Mean score vector and mean information matrix at `beta`.
///
/// The general-link forms carry weights f/(F(1-F)) in S and f^2/(F(1-F)) in I;
/// for the logistic link f = F(1-F), so those weights cancel to the simplified
/// S = (1/N) sum x_i (W_i - F_i) and I = (1/N) sum F_i (1-F_i) x_i x_i'
/// implemented here. The matrix comes back row-major d x d.
pub fn score_and_information<F: Real>(
    x: &DesignMatrix<F>,
    w: &[bool],
    beta: &[F],
) -> (Vec<F>, Vec<F>) {
    assert_eq!(w.len(), x.rows(), "treatment length must match design rows");
    let n = x.rows();
    let d = x.cols();
    let inv_n = F::one() / F::of_usize(n);
    let eta = x.linear_predictor(beta);
    let mut score = vec![F::zero(); d];
    let mut info = vec![F::zero(); d * d];
    for i in 0..n {
        let p = sigmoid(eta[i]);
        let resid = if w[i] { F::one() - p } else { -p };
        let weight = p * (F::one() - p);
        let row = x.row(i);
        for a in 0..d {
            score[a] += row[a] * resid;
            for b in 0..=a {
                info[a * d + b] += weight * row[a] * row[b];
            }
        }
    }
    for a in 0..d {
        score[a] *= inv_n;
        for b in 0..=a {
            info[a * d + b] *= inv_n;
            info[b * d + a] = info[a * d + b];
        }
    }
    (score, info)
}

/// Bernoulli log-likelihood at `beta` (not scaled by N).
pub fn log_likelihood<F: Real>(x: &DesignMatrix<F>, w: &[bool], beta: &[F]) -> F {
    let eta = x.linear_predictor(beta);
    let mut ll = F::zero();
    for (i, &t) in eta.iter().enumerate() {
        let p = sigmoid(t);
        ll += if w[i] { p.ln() } else { (F::one() - p).ln() };
    }
    ll
}
