//! Density and moments of `Y = (aX + b)/(cX + d)` where
//! `X ~ Gamma(shape = alpha, rate = alpha/p)`, so `E[X] = p`.
//!
//! Every moment is a short combination of scaled exponential integrals of
//! adjacent orders sharing the argument `z = alpha d / (c p)`. The
//! combinations subtract nearly equal terms once `z` is large compared to
//! `alpha`, so they are accumulated in double-double arithmetic and each
//! order is evaluated directly rather than by recurrence.

use rand::Rng as _;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::expint::expint_scaled_dd;
use crate::rng::Rng;

/// Parameters of the ratio. `c, d > 0`, `alpha > 1`, `p > 0`, `ad != bc`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaRatioSpec {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    alpha: f64,
    p: f64,
}

impl GammaRatioSpec {
    pub fn new(a: f64, b: f64, c: f64, d: f64, alpha: f64, p: f64) -> Result<Self> {
        const FUNC: &str = "GammaRatioSpec::new";
        if ![a, b, c, d, alpha, p].iter().all(|v| v.is_finite()) {
            return Err(Error::domain(FUNC, "parameters must be finite"));
        }
        if !(c > 0.0 && d > 0.0) {
            return Err(Error::domain(FUNC, format!("c = {c}, d = {d}; both must be positive")));
        }
        if !(alpha > 1.0) {
            return Err(Error::domain(FUNC, format!("alpha = {alpha} must exceed 1")));
        }
        if !(p > 0.0) {
            return Err(Error::domain(FUNC, format!("p = {p} must be positive")));
        }
        if a * d == b * c {
            return Err(Error::domain(FUNC, "ad - bc = 0 makes Y constant"));
        }
        Ok(GammaRatioSpec { a, b, c, d, alpha, p })
    }

    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn b(&self) -> f64 {
        self.b
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn p(&self) -> f64 {
        self.p
    }

    /// `(l1, l2)` with `l1 = min(a/c, b/d)` and `l2 = max(a/c, b/d)`.
    pub fn support(&self) -> (f64, f64) {
        let (u, v) = (self.a / self.c, self.b / self.d);
        (u.min(v), u.max(v))
    }

    /// The map `x ↦ (ax + b)/(cx + d)`.
    pub fn transform(&self, x: f64) -> f64 {
        (self.a * x + self.b) / (self.c * x + self.d)
    }

    /// `z = alpha d / (c p)` in double-double.
    fn z(&self) -> Dd {
        Dd::new(self.alpha) * self.d / (Dd::new(self.c) * self.p)
    }

    /// The Gamma law of `X`.
    pub fn x_distribution(&self) -> Gamma<f64> {
        Gamma::new(self.alpha, self.p / self.alpha).expect("validated shape and scale")
    }

    /// One draw of `Y`.
    pub fn sample(&self, rng: &mut Rng) -> f64 {
        let x = rng.sample(self.x_distribution());
        self.transform(x)
    }

    /// Draw `count` values of `Y`.
    pub fn sample_many(&self, count: usize, rng: &mut Rng) -> Vec<f64> {
        let g = self.x_distribution();
        g.sample_iter(rng).take(count).map(|x| self.transform(x)).collect()
    }
}

/// Density of `Y`, zero outside the open support.
pub fn ratio_pdf(spec: &GammaRatioSpec, y: f64) -> f64 {
    let (l1, l2) = spec.support();
    if !(y > l1 && y < l2) {
        return 0.0;
    }
    let GammaRatioSpec { a, b, c, d, alpha, p } = *spec;
    let num = d * y - b;
    let den = a - c * y;
    let x = num / den;
    if !(x > 0.0) || !x.is_finite() {
        return 0.0;
    }
    let t = alpha * x / p;
    let log_f = (b * c - a * d).abs().ln() + alpha * t.ln() - t - num.abs().ln() - den.abs().ln() - ln_gamma(alpha);
    log_f.exp()
}

fn order(spec: &GammaRatioSpec, z: Dd, shift: f64) -> Result<Dd> {
    expint_scaled_dd(Dd::new(spec.alpha) + shift, z)
}

fn mean_dd(spec: &GammaRatioSpec) -> Result<Dd> {
    let GammaRatioSpec { a, b, c, alpha, p, .. } = *spec;
    let z = spec.z();
    let e0 = order(spec, z, 0.0)?;
    let e1 = order(spec, z, 1.0)?;
    let inner = Dd::new(b) / p * e0 + Dd::new(a) * e1;
    Ok(Dd::new(alpha) / c * inner)
}

fn second_moment_dd(spec: &GammaRatioSpec) -> Result<Dd> {
    let GammaRatioSpec { a, b, c, alpha, p, .. } = *spec;
    let z = spec.z();
    let em1 = order(spec, z, -1.0)?;
    let e0 = order(spec, z, 0.0)?;
    let e1 = order(spec, z, 1.0)?;
    let e2 = order(spec, z, 2.0)?;
    let al = Dd::new(alpha);
    let (a, b, c, p) = (Dd::new(a), Dd::new(b), Dd::new(c), Dd::new(p));
    let cp2 = c * c * p * p;
    let t1 = al * al * b * b / cp2 * em1;
    let t2 = al * al * b * (2.0 * a * p - b) / cp2 * e0;
    let t3 = al * a * (al * a * p + a * p - 2.0 * al * b) / (c * c * p) * e1;
    let t4 = al * (al + 1.0) * a * a / (c * c) * e2;
    Ok(t1 + t2 + t3 - t4)
}

/// `E[Y]`.
pub fn ratio_mean(spec: &GammaRatioSpec) -> Result<f64> {
    mean_dd(spec).map(Dd::to_f64)
}

/// `E[Y^2]`. Uses the order `alpha - 1`, hence `alpha > 1`.
pub fn ratio_second_moment(spec: &GammaRatioSpec) -> Result<f64> {
    second_moment_dd(spec).map(Dd::to_f64)
}

/// `Var[Y] = E[Y^2] - E[Y]^2`, with the subtraction done in double-double.
pub fn ratio_variance(spec: &GammaRatioSpec) -> Result<f64> {
    let m1 = mean_dd(spec)?;
    let m2 = second_moment_dd(spec)?;
    Ok((m2 - m1 * m1).to_f64())
}

/// `E[Y^4]` for the gain shape `b = 0`.
///
/// Written in `z` alone:
/// `E[Y^4] = (a/c)^4 / 6 · [P(z) - z 𝔈_alpha(z) Q(z)]` with
/// `P = z^3 + (2α+9) z^2 + (α^2+7α+18) z + 6` and
/// `Q = z^3 + 3(α+3) z^2 + 3(α+2)(α+3) z + (α+1)(α+2)(α+3)`.
/// The bracket loses about `log10(α^3 (1 + z/α)^k)` digits, which double-double absorbs.
pub fn ratio_fourth_moment(spec: &GammaRatioSpec) -> Result<f64> {
    if spec.b != 0.0 {
        return Err(Error::domain("ratio_fourth_moment", format!("b = {} but the closed form needs b = 0", spec.b)));
    }
    let al = Dd::new(spec.alpha);
    let z = spec.z();
    let e0 = order(spec, z, 0.0)?;
    let big_p = ((z + (2.0 * al + 9.0)) * z + (al * al + 7.0 * al + 18.0)) * z + 6.0;
    let big_q = ((z + 3.0 * (al + 3.0)) * z + 3.0 * (al + 2.0) * (al + 3.0)) * z + (al + 1.0) * (al + 2.0) * (al + 3.0);
    let bracket = big_p - z * e0 * big_q;
    let ratio = spec.a / spec.c;
    Ok((bracket / 6.0).to_f64() * ratio.powi(4))
}
