//! Independent numerical references for checking the filtering laboratory.
//!
//! Nothing in here depends on the production kernels: the quadrature is a
//! plain global-adaptive Gauss–Kronrod (21-point) scheme and the root finder
//! is pure bisection. Both are slow and boring on purpose, which is what makes
//! them usable as oracles.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with the range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod quadrature;
pub mod roots;

pub use quadrature::{integrate, integrate_breakpoints, integrate_to_infinity, Estimate, QuadError, Tolerance};
pub use roots::{bisect, RootError};

/// Scaled generalized exponential integral `e^z E_nu(z)` by quadrature.
///
/// Uses the substitution `t = e^u`, which turns the algebraic tail of
/// `∫_1^∞ e^{-zt} t^{-nu} dt` into `∫_0^∞ exp(-z(e^u - 1) + (1 - nu) u) du`.
/// The integrand then decays exponentially (rate `nu - 1`) or
/// doubly-exponentially (once `z e^u` is large), so a semi-infinite map
/// handles it without special casing.
pub fn scaled_expint(nu: f64, z: f64) -> Result<f64, QuadError> {
    // At z = 0 the first term is 0 · ∞ far out in the tail; drop it.
    let f = |u: f64| {
        let decay = if z == 0.0 { 0.0 } else { -z * u.exp_m1() };
        (decay + (1.0 - nu) * u).exp()
    };
    // Put breakpoints at the natural decay scale so the first bisections are
    // not wasted on a flat tail.
    let scale = 1.0 / (z + nu.max(1.0));
    let mut points = vec![0.0];
    let mut p = scale;
    while p < 40.0 {
        points.push(p);
        p *= 4.0;
    }
    let tol = Tolerance { abs: 0.0, rel: 1e-13, max_intervals: 4000 };
    let head = integrate_breakpoints(&f, &points, tol)?;
    let tail = integrate_to_infinity(&f, *points.last().unwrap(), tol)?;
    Ok(head.value + tail.value)
}
