//! One-dimensional search primitives shared by the solvers.

use crate::error::{Error, Result};

const INV_PHI: f64 = 0.618_033_988_749_894_9; // 1/φ
const INV_PHI2: f64 = 0.381_966_011_250_105_1; // 1/φ²

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub x: f64,
    pub value: f64,
    /// Width of the final bracket.
    pub bracket_width: f64,
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
///
/// Terminates when the bracket is narrower than `tol(x)` where `x` is the
/// current best point; the caller decides between absolute and relative
/// tolerances through the closure.
pub fn golden_section_max(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    tol: impl Fn(f64) -> f64,
    max_iter: usize,
) -> Result<Maximum> {
    if !(lo <= hi) {
        return Err(Error::invalid("bracket", format!("[{lo}, {hi}] is empty")));
    }
    let (mut a, mut b) = (lo, hi);
    let mut c = a + INV_PHI2 * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    for _ in 0..max_iter {
        let best = if fc >= fd { c } else { d };
        if b - a <= tol(best) {
            break;
        }
        // Ties shrink toward the lower end.
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = a + INV_PHI2 * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    // The interior probes never touch the bracket ends; compare against them.
    let fa = f(lo)?;
    let fb = f(hi)?;
    let mut out = Maximum {
        x,
        value,
        bracket_width: b - a,
    };
    if fa >= out.value && a == lo {
        out = Maximum { x: lo, value: fa, ..out };
    }
    if fb > out.value && b == hi {
        out = Maximum { x: hi, value: fb, ..out };
    }
    Ok(out)
}

/// Bisection for the point where a monotone predicate switches from false to
/// true. Requires `pred(lo) == false` and `pred(hi) == true`; returns the
/// final bracket `(lo, hi)`.
pub fn bisect_predicate(
    mut pred: impl FnMut(f64) -> Result<bool>,
    mut lo: f64,
    mut hi: f64,
    done: impl Fn(f64, f64) -> bool,
    max_iter: usize,
) -> Result<(f64, f64)> {
    for _ in 0..max_iter {
        if done(lo, hi) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// Root of an increasing function on `[lo, hi]` by bisection, given
/// `g(lo) < 0 ≤ g(hi)`. Returns the midpoint of the final bracket.
pub fn bisect_increasing(
    mut g: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    abs_tol: f64,
) -> Result<f64> {
    let (a, b) = bisect_predicate(|x| Ok(g(x)? >= 0.0), lo, hi, |a, b| b - a <= abs_tol, 400)?;
    Ok(0.5 * (a + b))
}
