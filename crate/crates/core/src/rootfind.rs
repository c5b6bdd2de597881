//! Threshold searches for monotone functionals in logarithmic coordinates.
//!
//! Every norm in the crate is `inf{λ > 0 : G(λ) <= β}` for a nonincreasing `G`.
//! Searches run in `s = ln λ` and return a bracket `[lo, hi]` with
//! `G(e^lo) > β >= G(e^hi)`.

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
const EXPANSION: f64 = 4.0;

/// Outcome of a threshold search in log coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub iterations: usize,
}

/// `Σ_i c·exp(a_i - b_i s)` with all `b_i > 0`: convex and decreasing in `s`.
#[derive(Clone, Debug, Default)]
pub struct ExpSum {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub weight: f64,
}

impl ExpSum {
    pub fn new(weight: f64) -> Self {
        ExpSum { a: Vec::new(), b: Vec::new(), weight }
    }

    pub fn push(&mut self, a: f64, b: f64) {
        debug_assert!(b > 0.0 && a.is_finite());
        self.a.push(a);
        self.b.push(b);
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    /// `(ln G(s), G'(s)/G(s))`.
    pub fn log_and_slope(&self, s: f64) -> (f64, f64) {
        let m = self.a.iter().zip(&self.b).map(|(a, b)| a - b * s).fold(f64::NEG_INFINITY, f64::max);
        let (mut sum, mut dsum) = (0.0, 0.0);
        for (a, b) in self.a.iter().zip(&self.b) {
            let e = (a - b * s - m).exp();
            sum += e;
            dsum += b * e;
        }
        (m + sum.ln() + self.weight.ln(), -dsum / sum)
    }

    pub fn log_value(&self, s: f64) -> f64 {
        self.log_and_slope(s).0
    }

    /// Smallest `s` with `G(s) <= β` (to within `ln(1 + rel_tol)`), by Newton steps
    /// from the left, which never overshoot on a convex decreasing function.
    pub fn solve(&self, beta: f64, rel_tol: f64) -> Result<Bracket> {
        if self.is_empty() {
            return Err(Error::Numeric("empty exponential sum".into()));
        }
        let lb = beta.ln();
        let tol_s = rel_tol.ln_1p();
        let f = |s: f64| {
            let (l, d) = self.log_and_slope(s);
            (l - lb, d)
        };
        let s0 = self.a.iter().zip(&self.b).map(|(a, b)| a / b).fold(f64::NEG_INFINITY, f64::max);
        let step = EXPANSION.ln();
        let mut iterations = 1;
        let (mut lo, mut hi);
        let (mut flo, mut dlo);
        let (v0, d0) = f(s0);
        if v0 > 0.0 {
            lo = s0;
            (flo, dlo) = (v0, d0);
            hi = s0;
            loop {
                hi += step * (1.0 + (iterations as f64 / 8.0).floor());
                iterations += 1;
                let (v, d) = f(hi);
                if v <= 0.0 {
                    break;
                }
                (lo, flo, dlo) = (hi, v, d);
                if iterations > MAX_ITERATIONS {
                    return Err(Error::Numeric("bracket expansion did not terminate".into()));
                }
            }
        } else {
            hi = s0;
            lo = s0;
            loop {
                lo -= step * (1.0 + (iterations as f64 / 8.0).floor());
                iterations += 1;
                let (v, d) = f(lo);
                if v > 0.0 {
                    (flo, dlo) = (v, d);
                    break;
                }
                hi = lo;
                if iterations > MAX_ITERATIONS {
                    return Err(Error::Numeric("bracket expansion did not terminate".into()));
                }
            }
        }
        while hi - lo > tol_s {
            if iterations > MAX_ITERATIONS {
                return Err(Error::Numeric(format!("no convergence after {MAX_ITERATIONS} iterations")));
            }
            let mut s = lo - flo / dlo;
            if !(s > lo && s < hi) || !s.is_finite() {
                s = 0.5 * (lo + hi);
            }
            let (v, d) = f(s);
            iterations += 1;
            let landed_low = v > 0.0;
            if landed_low {
                (lo, flo, dlo) = (s, v, d);
            } else {
                hi = s;
            }
            if hi - lo > tol_s {
                // rounding can put the step just past the root; close from that side
                let probe = if landed_low { lo + 0.5 * tol_s } else { hi - 0.5 * tol_s };
                let (v, d) = f(probe);
                iterations += 1;
                if v > 0.0 {
                    (lo, flo, dlo) = (probe, v, d);
                } else {
                    hi = probe;
                }
            }
        }
        Ok(Bracket { lo, hi, iterations })
    }
}

/// Smallest `s` with `g(s) <= 0` for a nonincreasing `g` that may take the values
/// `±∞`. Regula falsi with the Illinois modification on finite values, bisection
/// otherwise or when the bracket stops shrinking.
pub fn threshold_search(mut g: impl FnMut(f64) -> f64, s0: f64, tol_s: f64) -> Result<Bracket> {
    let step = EXPANSION.ln();
    let mut iterations = 1;
    let v0 = g(s0);
    let (mut lo, mut hi, mut glo, mut ghi);
    if v0 > 0.0 {
        lo = s0;
        glo = v0;
        let mut s = s0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            s += step * k;
            iterations += 1;
            let v = g(s);
            if v <= 0.0 {
                hi = s;
                ghi = v;
                break;
            }
            lo = s;
            glo = v;
            if iterations > MAX_ITERATIONS {
                return Err(Error::Numeric("upper bracket not found".into()));
            }
        }
    } else {
        hi = s0;
        ghi = v0;
        let mut s = s0;
        let mut k = 0.0;
        loop {
            k += 1.0;
            s -= step * k;
            iterations += 1;
            let v = g(s);
            if v > 0.0 {
                lo = s;
                glo = v;
                break;
            }
            hi = s;
            ghi = v;
            if iterations > MAX_ITERATIONS {
                return Err(Error::Numeric("lower bracket not found".into()));
            }
        }
    }
    let mut side = 0i32;
    let mut width = hi - lo;
    let mut stalled = 0;
    while hi - lo > tol_s {
        if iterations > MAX_ITERATIONS {
            return Err(Error::Numeric(format!("no convergence after {MAX_ITERATIONS} iterations")));
        }
        let mut s = if glo.is_finite() && ghi.is_finite() && stalled < 2 {
            (lo * ghi - hi * glo) / (ghi - glo)
        } else {
            0.5 * (lo + hi)
        };
        // keep strictly inside, at least a small fraction away from the ends
        let eps = 0.5 * tol_s.min(0.01 * (hi - lo));
        s = s.clamp(lo + eps, hi - eps);
        let v = g(s);
        iterations += 1;
        if v > 0.0 {
            lo = s;
            glo = v;
            if side == -1 {
                ghi *= 0.5;
            }
            side = -1;
        } else {
            hi = s;
            ghi = v;
            if side == 1 {
                glo *= 0.5;
            }
            side = 1;
        }
        if hi - lo > 0.5 * width {
            stalled += 1;
        } else {
            stalled = 0;
            width = hi - lo;
        }
        if stalled >= 3 {
            stalled = 0;
            width = hi - lo;
        }
    }
    Ok(Bracket { lo, hi, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expsum_solves_single_term_exactly() {
        // 2·exp(3 - 2s) = 1  =>  s = (3 + ln 2)/2
        let mut e = ExpSum::new(2.0);
        e.push(3.0, 2.0);
        let b = e.solve(1.0, 1e-12).unwrap();
        let exact = (3.0 + 2f64.ln()) / 2.0;
        assert!(b.lo <= exact + 1e-14 && exact <= b.hi + 1e-14);
        assert!(b.hi - b.lo <= 1e-12);
    }

    #[test]
    fn expsum_two_terms() {
        // t² + t⁴ = 2 at t = e^{-s}: root t = 1
        let mut e = ExpSum::new(1.0);
        e.push(0.0, 2.0);
        e.push(0.0, 4.0);
        let b = e.solve(2.0, 1e-12).unwrap();
        assert!(b.lo.abs() < 1e-12 && b.hi.abs() < 1e-12);
        assert!(b.iterations < 40);
    }

    #[test]
    fn threshold_search_handles_steps() {
        let b = threshold_search(|s| if s < 1.25 { f64::INFINITY } else { f64::NEG_INFINITY }, 0.0, 1e-10).unwrap();
        assert!(b.lo < 1.25 && b.hi >= 1.25 && b.hi - b.lo <= 1e-10);
    }

    #[test]
    fn threshold_search_smooth() {
        let b = threshold_search(|s| (2.0 - s).powi(3), -5.0, 1e-12).unwrap();
        assert!((b.lo - 2.0).abs() < 1e-10);
    }
}
