//! Beta and normal distribution kernels.
//!
//! Everything here is a pure function of its arguments. The regularized
//! incomplete beta uses the Lentz continued fraction with the usual symmetry
//! switch; quantiles are found by safeguarded Newton iteration on the CDF,
//! always solving in the smaller tail so that extreme quantiles keep their
//! relative precision.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape pair of a beta distribution, used both as prior and posterior of
/// the accuracy of a knowledge graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBeta")]
pub struct BetaParams {
    a: f64,
    b: f64,
}

#[derive(Deserialize)]
struct RawBeta {
    a: f64,
    b: f64,
}

impl TryFrom<RawBeta> for BetaParams {
    type Error = Error;

    fn try_from(raw: RawBeta) -> Result<Self> {
        BetaParams::new(raw.a, raw.b)
    }
}

impl BetaParams {
    /// Kerman's neutral prior, Beta(1/3, 1/3).
    pub const KERMAN: BetaParams = BetaParams {
        a: 1.0 / 3.0,
        b: 1.0 / 3.0,
    };
    /// Jeffreys prior, Beta(1/2, 1/2).
    pub const JEFFREYS: BetaParams = BetaParams { a: 0.5, b: 0.5 };
    /// Bayes-Laplace uniform prior, Beta(1, 1).
    pub const UNIFORM: BetaParams = BetaParams { a: 1.0, b: 1.0 };

    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
            return Err(Error::Domain(format!(
                "beta shapes must be finite and positive, got ({a}, {b})"
            )));
        }
        Ok(BetaParams { a, b })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.a
    }

    #[inline]
    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }

    /// Same distribution reflected about 1/2.
    pub fn reflect(&self) -> BetaParams {
        BetaParams {
            a: self.b,
            b: self.a,
        }
    }

    pub fn ln_beta(&self) -> f64 {
        ln_beta(self.a, self.b)
    }

    /// Density at `x`, with `x` clamped into [0, 1].
    pub fn pdf(&self, x: f64) -> f64 {
        pdf_with(x.clamp(0.0, 1.0), self.a, self.b, self.ln_beta())
    }

    /// Log density at an interior point.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - self.ln_beta()
    }

    /// Regularized incomplete beta `I_x(a, b)`, with `x` clamped into [0, 1].
    pub fn cdf(&self, x: f64) -> f64 {
        inc_beta(x.clamp(0.0, 1.0), self.a, self.b, self.ln_beta()).0
    }

    /// Inverse of [`BetaParams::cdf`], with `q` clamped into [0, 1].
    pub fn quantile(&self, q: f64) -> f64 {
        quantile_unchecked(q.clamp(0.0, 1.0), self.a, self.b)
    }
}

impl std::fmt::Display for BetaParams {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Beta({}, {})", self.a, self.b)
    }
}

/// `ln Γ(x)` for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x.is_finite() && x > 0.0) {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma(x))
}

pub fn beta_pdf(x: f64, p: BetaParams) -> Result<f64> {
    check_unit("beta_pdf", x)?;
    Ok(p.pdf(x))
}

pub fn beta_cdf(x: f64, p: BetaParams) -> Result<f64> {
    check_unit("beta_cdf", x)?;
    Ok(p.cdf(x))
}

pub fn beta_quantile(q: f64, p: BetaParams) -> Result<f64> {
    check_unit("beta_quantile", q)?;
    Ok(p.quantile(q))
}

/// Inverse of the standard normal CDF (Wichura's AS 241, ~1e-16 relative).
pub fn normal_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "normal_quantile requires 0 < q < 1, got {q}"
        )));
    }
    Ok(ppnd16(q))
}

/// Upper tail `P(T > t)` of Student's t distribution with `df` degrees of
/// freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if df.is_nan() || df <= 0.0 || t.is_nan() {
        return Err(Error::Domain(format!(
            "student_t_sf requires df > 0, got df = {df}, t = {t}"
        )));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let x = df / (df + t * t);
    let (a, b) = (0.5 * df, 0.5);
    // the tail mass is 0.5 * I_x(df/2, 1/2)
    let tail = 0.5 * inc_beta(x, a, b, ln_beta(a, b)).0;
    Ok(if t > 0.0 { tail } else { 1.0 - tail })
}

fn check_unit(what: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "{what} requires a value in [0, 1], got {x}"
        )))
    }
}

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn ln_gamma(x: f64) -> f64 {
    if x >= 10.0 {
        return stirling_ln_gamma(x);
    }
    // shift up into the asymptotic range: Γ(x) = Γ(x + k) / (x (x+1) ... (x+k-1))
    let mut prod = 1.0;
    let mut z = x;
    while z < 10.0 {
        prod *= z;
        z += 1.0;
    }
    stirling_ln_gamma(z) - prod.ln()
}

fn stirling_ln_gamma(x: f64) -> f64 {
    // Bernoulli-number corrections B_2k / (2k (2k-1) x^(2k-1))
    const C: [f64; 7] = [
        1.0 / 12.0,
        -1.0 / 360.0,
        1.0 / 1260.0,
        -1.0 / 1680.0,
        1.0 / 1188.0,
        -691.0 / 360_360.0,
        1.0 / 156.0,
    ];
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut series = 0.0;
    for c in C.iter().rev() {
        series = series * inv2 + c;
    }
    (x - 0.5) * x.ln() - x + HALF_LN_2PI + series * inv
}

pub(crate) fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn pdf_with(x: f64, a: f64, b: f64, lnb: f64) -> f64 {
    if x == 0.0 {
        return edge_density(a, lnb);
    }
    if x == 1.0 {
        return edge_density(b, lnb);
    }
    ((a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - lnb).exp()
}

// Limit of the density at an endpoint whose exponent is `shape - 1`.
fn edge_density(shape: f64, lnb: f64) -> f64 {
    if shape < 1.0 {
        f64::INFINITY
    } else if shape == 1.0 {
        (-lnb).exp()
    } else {
        0.0
    }
}

/// Returns `(I_x(a,b), 1 - I_x(a,b))`, each computed without cancellation
/// in its own small tail.
pub(crate) fn inc_beta(x: f64, a: f64, b: f64, lnb: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if x >= 1.0 {
        return (1.0, 0.0);
    }
    let front = (a * x.ln() + b * (-x).ln_1p() - lnb).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = (front * beta_cf(x, a, b) / a).min(1.0);
        (lower, 1.0 - lower)
    } else {
        let upper = (front * beta_cf(1.0 - x, b, a) / b).min(1.0);
        (1.0 - upper, upper)
    }
}

// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const MAX_ITER: usize = 20_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

pub(crate) fn quantile_unchecked(q: f64, a: f64, b: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q >= 1.0 {
        return 1.0;
    }
    if q > 0.5 {
        // solve the upper tail as a lower tail of the reflected distribution
        1.0 - lower_tail_root(1.0 - q, b, a)
    } else {
        lower_tail_root(q, a, b)
    }
}

// Finds x with I_x(a, b) = p for p <= 1/2.
fn lower_tail_root(p: f64, a: f64, b: f64) -> f64 {
    let lnb = ln_beta(a, b);
    let residual = |x: f64| inc_beta(x, a, b, lnb).0 - p;

    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = initial_guess(p, a, b, lnb);
    for _ in 0..400 {
        let r = residual(x);
        if r == 0.0 {
            return x;
        }
        if r < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let dens = pdf_with(x, a, b, lnb);
        let mut next = x - r / dens;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if lo == 0.0 {
                hi * 0.0625
            } else if hi > 4.0 * lo {
                (lo * hi).sqrt()
            } else {
                0.5 * (lo + hi)
            };
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * next || hi - lo <= 4.0 * f64::EPSILON * hi {
            return next;
        }
        x = next;
    }
    x
}

fn initial_guess(p: f64, a: f64, b: f64, lnb: f64) -> f64 {
    // power-law tail: I_x(a, b) ~ x^a / (a B(a, b)) as x -> 0
    let tail = ((p.ln() + a.ln() + lnb) / a).exp();
    // normal approximation around the mean
    let s = a + b;
    let mean = a / s;
    let sd = (a * b / (s * s * (s + 1.0))).sqrt();
    let normal = mean + ppnd16(p) * sd;

    let mut best = 0.5;
    let mut best_err = f64::INFINITY;
    for cand in [tail, normal] {
        if cand > 0.0 && cand < 1.0 {
            let err = (inc_beta(cand, a, b, lnb).0 - p).abs();
            if err < best_err {
                best = cand;
                best_err = err;
            }
        }
    }
    best
}

#[allow(clippy::excessive_precision)]
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = (((((((2.509_080_928_730_122_672_7e3 * r + 3.343_057_558_358_812_810_5e4)
            * r
            + 6.726_577_092_700_870_085_3e4)
            * r
            + 4.592_195_393_154_987_145_7e4)
            * r
            + 1.373_169_376_550_946_112_5e4)
            * r
            + 1.971_590_950_306_551_442_7e3)
            * r
            + 1.331_416_678_917_843_774_5e2)
            * r
            + 3.387_132_872_796_366_608_0)
            * q;
        let den = ((((((5.226_495_278_852_854_561_0e3 * r + 2.872_908_573_572_194_267_4e4) * r
            + 3.930_789_580_009_271_061_0e4)
            * r
            + 2.121_379_430_158_659_586_7e4)
            * r
            + 5.394_196_021_424_751_107_7e3)
            * r
            + 6.871_870_074_920_579_083_0e2)
            * r
            + 4.231_333_070_160_091_125_2e1)
            * r
            + 1.0;
        return num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414_076_4e-4 * r + 2.272_384_498_926_918_458_33e-2)
            * r
            + 2.417_807_251_774_506_117_7e-1)
            * r
            + 1.270_458_252_452_368_382_58)
            * r
            + 3.647_848_324_763_204_605_04)
            * r
            + 5.769_497_221_460_691_405_5)
            * r
            + 4.630_337_846_156_545_295_9)
            * r
            + 1.423_437_110_749_683_577_34;
        let den = ((((((1.050_750_071_644_416_843_24e-9 * r + 5.475_938_084_995_344_946e-4)
            * r
            + 1.519_866_656_361_645_719_66e-2)
            * r
            + 1.481_039_764_274_800_745_9e-1)
            * r
            + 6.897_673_349_851_000_045_5e-1)
            * r
            + 1.676_384_830_183_803_849_4)
            * r
            + 2.053_191_626_637_758_821_87)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_132_65e-7 * r + 2.711_555_568_743_487_578_15e-5)
            * r
            + 1.242_660_947_388_078_438_6e-3)
            * r
            + 2.653_218_952_657_612_309_3e-2)
            * r
            + 2.965_605_718_285_048_912_3e-1)
            * r
            + 1.784_826_539_917_291_335_8)
            * r
            + 5.463_784_911_164_114_369_9)
            * r
            + 6.657_904_643_501_103_777_2;
        let den = ((((((2.044_263_103_389_939_785_64e-15 * r + 1.421_511_758_316_445_888_7e-7)
            * r
            + 1.846_318_317_510_054_681_8e-5)
            * r
            + 7.868_691_311_456_132_591e-4)
            * r
            + 1.487_536_129_085_061_485_25e-2)
            * r
            + 1.369_298_809_227_358_053_1e-1)
            * r
            + 5.998_322_065_558_879_376_9e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
