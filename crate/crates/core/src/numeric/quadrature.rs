//! Adaptive Simpson quadrature on a finite interval.
//!
//! Used for kernel moment integrals, where the integrands are smooth and a
//! recursive Richardson-corrected Simpson rule converges fast. Not meant as a
//! general oscillatory-integral workhorse.

use crate::num::Real;

/// Integrate `f` over [a, b] to absolute tolerance `tol`.
///
/// Recursion stops when the Richardson error estimate for a panel drops below
/// its share of the tolerance, or at depth 60 as a hard floor against
/// pathological integrands.
pub fn adaptive_simpson<F, G>(f: G, a: F, b: F, tol: F) -> F
where
    F: Real,
    G: Fn(F) -> F,
{
    assert!(b >= a, "integration bounds must satisfy a <= b");
    assert!(tol > F::zero(), "tolerance must be positive");
    let fa = f(a);
    let fb = f(b);
    let m = (a + b) / F::of(2.0);
    let fm = f(m);
    let whole = simpson_panel(a, b, fa, fm, fb);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 60)
}

fn simpson_panel<F: Real>(a: F, b: F, fa: F, fm: F, fb: F) -> F {
    (b - a) / F::of(6.0) * (fa + F::of(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F, G>(f: &G, a: F, b: F, fa: F, fm: F, fb: F, whole: F, tol: F, depth: u32) -> F
where
    F: Real,
    G: Fn(F) -> F,
{
    let m = (a + b) / F::of(2.0);
    let lm = (a + m) / F::of(2.0);
    let rm = (m + b) / F::of(2.0);
    let flm = f(lm);
    let frm = f(rm);
    let left = simpson_panel(a, m, fa, flm, fm);
    let right = simpson_panel(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= F::of(15.0) * tol {
        left + right + delta / F::of(15.0)
    } else {
        let half_tol = tol / F::of(2.0);
        recurse(f, a, m, fa, flm, fm, left, half_tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, half_tol, depth - 1)
    }
}
