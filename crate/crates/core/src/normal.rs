//! Standard normal density, distribution and quantile functions.
//!
//! `Φ` is evaluated through the complementary error function, which keeps
//! full relative precision in both tails. The quantile starts from the
//! inverse complementary error function and takes Halley steps against
//! `Φ`, so `Φ(Φ⁻¹(p))` reproduces `p` to a few ulps.
//!
//! [`psi`] is the expected positive part `E[(a + Z)⁺] = φ(a) + aΦ(a)`, which is
//! the building block of every Gaussian production function. For very
//! negative `a` it is evaluated from the Mills-ratio continued fraction to
//! avoid cancellation, and [`ln_psi`] stays finite where `psi` underflows.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const SQRT_2: f64 = std::f64::consts::SQRT_2;
/// `1 / sqrt(2π)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
/// `ln(sqrt(2π))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal density `φ(x)`.
#[inline]
pub fn pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal distribution function `Φ(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `1 - Φ(x)`, computed without cancellation.
#[inline]
pub fn sf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(x / SQRT_2)
}

/// `ln Φ(x)`, finite for every finite `x`. Below −20 it uses the Laplace
/// continued fraction for the Mills ratio.
pub fn ln_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x > -20.0 {
        return cdf(x).ln();
    }
    if x == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let y = -x;
    let mut tail = y;
    for k in (1..=60).rev() {
        tail = y + k as f64 / tail;
    }
    ln_pdf(x) - tail.ln()
}

/// Standard normal quantile `Φ⁻¹(p)`. Returns `±∞` at `p ∈ {0, 1}` and NaN
/// outside `[0, 1]`.
pub fn inv_cdf(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    // Work in the smaller tail so the refinement sees full relative precision.
    let (q, sign) = if p < 0.5 { (p, -1.0) } else { (1.0 - p, 1.0) };
    // Upper-tail quantile: x with sf(x) = q.
    let mut x = SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..2 {
        let density = pdf(x);
        if !x.is_finite() || density <= 0.0 {
            break;
        }
        let step = (sf(x) - q) / density;
        // Halley correction for the normal quantile.
        x += step / (1.0 - 0.5 * x * step);
    }
    sign * x
}

/// One-sided p-value `1 - Φ(t)` for a t-statistic.
#[inline]
pub fn one_sided_p(t: f64) -> f64 {
    sf(t)
}

/// Backward evaluation of the Mills-ratio continued fraction at `x > 0`.
/// Returns `(t0, t1)` with `R(x) = (1 - Φ(x)) / φ(x) = 1 / t0` and
/// `1 - x R(x) = 1 / (t0 t1)`.
fn mills_tails(x: f64) -> (f64, f64) {
    const DEPTH: usize = 200;
    let mut t = x;
    for k in (2..=DEPTH).rev() {
        t = x + k as f64 / t;
    }
    let t1 = t;
    let t0 = x + 1.0 / t1;
    (t0, t1)
}

const PSI_SWITCH: f64 = -8.0;

/// `E[(a + Z)⁺] = φ(a) + aΦ(a)` for standard normal `Z`.
pub fn psi(a: f64) -> f64 {
    if a.is_nan() {
        return f64::NAN;
    }
    if a == f64::INFINITY {
        return f64::INFINITY;
    }
    if a >= PSI_SWITCH {
        pdf(a) + a * cdf(a)
    } else {
        let (t0, t1) = mills_tails(-a);
        pdf(a) / (t0 * t1)
    }
}

/// `ln E[(a + Z)⁺]`, finite for every finite `a`.
pub fn ln_psi(a: f64) -> f64 {
    if a >= PSI_SWITCH {
        psi(a).ln()
    } else {
        let (t0, t1) = mills_tails(-a);
        ln_pdf(a) - t0.ln() - t1.ln()
    }
}

/// `E[(m + sZ)⁺]` for `s ≥ 0`.
pub fn expected_positive_part(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean.max(0.0);
    }
    sd * psi(mean / sd)
}

/// Log of [`expected_positive_part`]; `-∞` when the value is exactly zero.
pub fn ln_expected_positive_part(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean.max(0.0).ln();
    }
    sd.ln() + ln_psi(mean / sd)
}
