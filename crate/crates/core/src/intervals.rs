//! Interval constructions for a binomial accuracy.
//!
//! Wald and Wilson are confidence intervals built from a point estimate.
//! ET and HPD are credible intervals of a beta posterior.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::EstimateWithVariance;
use crate::special::{inc_beta, normal_quantile, BetaParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Wald,
    Wilson,
    Et,
    Hpd,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Wald => "wald",
            Method::Wilson => "wilson",
            Method::Et => "et",
            Method::Hpd => "hpd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEstimate {
    pub lower: f64,
    pub upper: f64,
    /// Margin of error: half the width, except for truncated Wald bounds.
    pub moe: f64,
    pub method: Method,
    /// Prior the posterior was built from (credible intervals only).
    pub prior: Option<BetaParams>,
}

impl IntervalEstimate {
    pub fn new(lower: f64, upper: f64, method: Method) -> Self {
        debug_assert!(
            0.0 <= lower && lower <= upper && upper <= 1.0,
            "[{lower}, {upper}]"
        );
        IntervalEstimate {
            lower,
            upper,
            moe: (upper - lower) / 2.0,
            method,
            prior: None,
        }
    }

    pub fn with_prior(mut self, prior: BetaParams) -> Self {
        self.prior = Some(prior);
        self
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Two-sided critical value `z_{alpha/2}`.
pub fn z_critical(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    normal_quantile(1.0 - alpha / 2.0)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// `mu_hat ± z sqrt(V)`. The bounds are truncated to [0, 1] but the margin
/// of error stays the untruncated `z sqrt(V)`, so `moe` can exceed half the
/// reported width near the boundaries.
pub fn wald(est: &EstimateWithVariance, alpha: f64) -> Result<IntervalEstimate> {
    let half = z_critical(alpha)? * est.variance.max(0.0).sqrt();
    let mut i = IntervalEstimate::new(
        (est.mu_hat - half).clamp(0.0, 1.0),
        (est.mu_hat + half).clamp(0.0, 1.0),
        Method::Wald,
    );
    i.moe = half;
    Ok(i)
}

/// Score interval with a relocated centre; `n_eff` may be fractional.
pub fn wilson(mu_hat: f64, n_eff: f64, alpha: f64) -> Result<IntervalEstimate> {
    if !(0.0..=1.0).contains(&mu_hat) {
        return Err(Error::Domain(format!(
            "mu_hat must lie in [0, 1], got {mu_hat}"
        )));
    }
    if !(n_eff > 0.0 && n_eff.is_finite()) {
        return Err(Error::Domain(format!(
            "n_eff must be positive, got {n_eff}"
        )));
    }
    let z = z_critical(alpha)?;
    let z2n = z * z / n_eff;
    let denom = 1.0 + z2n;
    let center = (mu_hat + z2n / 2.0) / denom;
    let half = z / denom * (mu_hat * (1.0 - mu_hat) / n_eff + z2n / (4.0 * n_eff)).sqrt();
    // the endpoints touch 0 or 1 exactly at the extremes
    let lower = if mu_hat == 0.0 {
        0.0
    } else {
        (center - half).max(0.0)
    };
    let upper = if mu_hat == 1.0 {
        1.0
    } else {
        (center + half).min(1.0)
    };
    Ok(IntervalEstimate::new(lower, upper, Method::Wilson))
}

/// Conjugate update `Beta(a + tau, b + n - tau)`; counts may be fractional.
pub fn posterior_update(prior: BetaParams, tau: f64, n: f64) -> Result<BetaParams> {
    if !(tau >= 0.0 && tau <= n && n.is_finite()) {
        return Err(Error::Domain(format!(
            "need 0 <= tau <= n, got tau={tau}, n={n}"
        )));
    }
    BetaParams::new(prior.a() + tau, prior.b() + (n - tau))
}

/// Equal-tailed credible interval.
pub fn et_cri(posterior: BetaParams, alpha: f64) -> Result<IntervalEstimate> {
    check_alpha(alpha)?;
    Ok(IntervalEstimate::new(
        posterior.quantile(alpha / 2.0),
        upper_quantile(posterior, alpha / 2.0),
        Method::Et,
    ))
}

/// Shortest interval holding `1 - alpha` posterior mass.
pub fn hpd_cri(posterior: BetaParams, alpha: f64) -> Result<IntervalEstimate> {
    check_alpha(alpha)?;
    let (a, b) = (posterior.a(), posterior.b());
    let (lower, upper) = if a > 1.0 && b > 1.0 {
        interior_hpd(posterior, alpha)
    } else if a == 1.0 && b == 1.0 {
        (alpha / 2.0, 1.0 - alpha / 2.0)
    } else if a < 1.0 && b < 1.0 {
        // U-shaped: the best single interval hugs one of the two poles
        let left = posterior.quantile(1.0 - alpha);
        let right = posterior.quantile(alpha);
        if left <= 1.0 - right {
            (0.0, left)
        } else {
            (right, 1.0)
        }
    } else if b <= 1.0 && a >= 1.0 {
        // non-decreasing density
        (posterior.quantile(alpha), 1.0)
    } else {
        (0.0, upper_quantile(posterior, alpha))
    };
    Ok(IntervalEstimate::new(lower, upper, Method::Hpd))
}

// x with 1 - F(x) = p, accurate when p is small.
fn upper_quantile(p: BetaParams, tail: f64) -> f64 {
    1.0 - p.reflect().quantile(tail)
}

// The optimum solves F(u) - F(l) = 1 - alpha together with f(l) = f(u).
// Newton on that 2x2 system lands in a handful of steps from a normal
// approximation around the mode, or else from the ET interval; the
// bracketed solver below is the last resort.
fn interior_hpd(p: BetaParams, alpha: f64) -> (f64, f64) {
    let (a, b) = (p.a(), p.b());
    let mode = (a - 1.0) / (a + b - 2.0);
    let half = normal_quantile(1.0 - alpha / 2.0).unwrap_or(2.0)
        * (a * b / ((a + b).powi(2) * (a + b + 1.0))).sqrt();
    let rough = (
        (mode - half).max(0.5 * mode),
        (mode + half).min(0.5 * (1.0 + mode)),
    );
    newton_hpd(p, alpha, rough)
        .or_else(|| {
            let et = (p.quantile(alpha / 2.0), upper_quantile(p, alpha / 2.0));
            newton_hpd(p, alpha, et)
        })
        .unwrap_or_else(|| bracketed_hpd(p, alpha))
}

fn newton_hpd(p: BetaParams, alpha: f64, (mut l, mut u): (f64, f64)) -> Option<(f64, f64)> {
    let (a, b) = (p.a(), p.b());
    let lnb = p.ln_beta();
    let score = |x: f64| (a - 1.0) / x - (b - 1.0) / (1.0 - x);
    let mode = (a - 1.0) / (a + b - 2.0);
    for _ in 0..30 {
        // excess mass outside [l, u] relative to alpha, from both tails
        let r1 = alpha - inc_beta(l, a, b, lnb).0 - inc_beta(u, a, b, lnb).1;
        let r2 = (a - 1.0) * (l / u).ln() + (b - 1.0) * ((1.0 - l) / (1.0 - u)).ln();
        let (fl, fu) = (p.pdf(l), p.pdf(u));
        if r1.abs() <= 1e-13 && r2.abs() <= 1e-11 {
            return Some((l, u));
        }
        // d r1 = -f(l) dl + f(u) du ; d r2 = s(l) dl - s(u) du
        let (j11, j12, j21, j22) = (-fl, fu, score(l), -score(u));
        let det = j11 * j22 - j12 * j21;
        if !(det.is_finite() && det != 0.0) {
            return None;
        }
        let dl = (-r1 * j22 + r2 * j12) / det;
        let du = (-r2 * j11 + r1 * j21) / det;
        // damp so that 0 < l < mode < u < 1 keeps holding
        let mut t = 1.0;
        while !(l + t * dl > 0.0 && l + t * dl < mode && u + t * du > mode && u + t * du < 1.0) {
            t *= 0.5;
            if t < 1e-6 {
                return None;
            }
        }
        l += t * dl;
        u += t * du;
    }
    None
}

// For a log-concave density the width u(l) - l is convex along the
// constraint curve u(l) = F^-1(F(l) + 1 - alpha), and its stationary point
// is where the densities balance. g(l) = ln f(l) - ln f(u(l)) is increasing
// on (0, F^-1(alpha)), so we bracket its root and polish with Newton.
fn bracketed_hpd(p: BetaParams, alpha: f64) -> (f64, f64) {
    let (a, b) = (p.a(), p.b());
    let score = |x: f64| (a - 1.0) / x - (b - 1.0) / (1.0 - x);
    let upper_of = |l: f64| {
        let rest = alpha - p.cdf(l);
        if rest <= 0.0 {
            1.0
        } else {
            upper_quantile(p, rest)
        }
    };

    let mut lo = 0.0;
    let mut hi = p.quantile(alpha);
    let mut l = p.quantile(alpha / 2.0);
    let mut best = (l, upper_of(l));
    for _ in 0..200 {
        let u = upper_of(l);
        best = (l, u);
        if u >= 1.0 || l <= 0.0 {
            // only reachable from bisection at the bracket edge
            if u >= 1.0 {
                hi = l;
            } else {
                lo = l;
            }
            l = 0.5 * (lo + hi);
            continue;
        }
        let g = p.ln_pdf(l) - p.ln_pdf(u);
        if g.abs() < 1e-13 {
            break;
        }
        if g < 0.0 {
            lo = l;
        } else {
            hi = l;
        }
        // du/dl = f(l) / f(u) = exp(g)
        let dg = score(l) - score(u) * g.exp();
        let mut next = l - g / dg;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - l).abs() <= 1e-16 * l.max(1e-300) || hi - lo <= f64::EPSILON * hi {
            break;
        }
        l = next;
    }
    best
}
