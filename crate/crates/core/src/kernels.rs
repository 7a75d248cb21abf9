//! Kernel families used to weight propensity score distances.
//!
//! Both kernels are evaluated unscaled: callers pass the already-normalized
//! argument (p_j - p_i) / h, and the 1/h prefactor cancels in every weight
//! ratio the estimators form, so carrying it would only invite underflow.

use crate::num::Real;
use crate::numeric::quadrature::adaptive_simpson;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Gaussian,
    Epanechnikov,
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelFamily::Gaussian => write!(f, "gaussian"),
            KernelFamily::Epanechnikov => write!(f, "epanechnikov"),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
#[error("unknown kernel family {0:?}, expected \"gaussian\" or \"epanechnikov\"")]
pub struct ParseKernelFamilyError(String);

impl FromStr for KernelFamily {
    type Err = ParseKernelFamilyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(KernelFamily::Gaussian),
            "epanechnikov" => Ok(KernelFamily::Epanechnikov),
            _ => Err(ParseKernelFamilyError(s.to_string())),
        }
    }
}

/// A kernel family together with its bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec<F> {
    pub family: KernelFamily,
    pub bandwidth: F,
}

impl<F: Real> KernelSpec<F> {
    pub fn new(family: KernelFamily, bandwidth: F) -> Self {
        assert!(
            bandwidth.is_finite() && bandwidth > F::zero(),
            "bandwidth must be a positive finite real, got {bandwidth}"
        );
        Self { family, bandwidth }
    }

    pub fn gaussian(bandwidth: F) -> Self {
        Self::new(KernelFamily::Gaussian, bandwidth)
    }

    pub fn epanechnikov(bandwidth: F) -> Self {
        Self::new(KernelFamily::Epanechnikov, bandwidth)
    }

    /// Evaluate the unscaled kernel at a normalized argument.
    pub fn eval(&self, u: F) -> F {
        assert!(u.is_finite(), "kernel argument must be finite, got {u}");
        match self.family {
            KernelFamily::Gaussian => gaussian_eval(u),
            KernelFamily::Epanechnikov => epanechnikov_eval(u),
        }
    }
}

fn gaussian_eval<F: Real>(u: F) -> F {
    let inv_sqrt_2pi = F::of(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-u * u / F::of(2.0)).exp()
}

fn epanechnikov_eval<F: Real>(u: F) -> F {
    if u.abs() >= F::one() {
        F::zero()
    } else {
        F::of(0.75) * (F::one() - u * u)
    }
}

/// Numeric checks of the kernel regularity conditions: total mass, second
/// moment, squared-kernel integral, and third absolute moment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentReport<F> {
    pub m0: F,
    pub m2: F,
    pub k2: F,
    pub m3abs: F,
}

/// Compute the four moment integrals by adaptive quadrature.
///
/// The Gaussian integrand is truncated to [-12, 12]; the discarded tail mass
/// is below 1e-30, orders of magnitude under the reporting tolerance. The
/// Epanechnikov support is exactly [-1, 1].
pub fn verify_moments<F: Real>(family: KernelFamily) -> MomentReport<F> {
    let (lo, hi) = match family {
        KernelFamily::Gaussian => (F::of(-12.0), F::of(12.0)),
        KernelFamily::Epanechnikov => (-F::one(), F::one()),
    };
    let k = |u: F| match family {
        KernelFamily::Gaussian => gaussian_eval(u),
        KernelFamily::Epanechnikov => epanechnikov_eval(u),
    };
    let tol = F::of(1e-12);
    MomentReport {
        m0: adaptive_simpson(k, lo, hi, tol),
        m2: adaptive_simpson(|u| u * u * k(u), lo, hi, tol),
        k2: adaptive_simpson(|u| k(u) * k(u), lo, hi, tol),
        m3abs: adaptive_simpson(|u| u.abs() * u * u * k(u), lo, hi, tol),
    }
}
