//! Variable exponents `p(·)` and admissible 2-microlocal weight sequences.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, Grid};

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Total sample count up to which pair sweeps visit every pair.
const ALL_PAIRS_LIMIT: usize = 4096;
/// Neighbor offsets (in cells, per axis) always included in sampled sweeps.
const NEIGHBOR_REACH: i64 = 8;
const RANDOM_PAIRS: usize = 1_000_000;
const PAIR_SEED: u64 = 0x5eed_1065;

/// A variable exponent with values in `(0, ∞]`. `f64::INFINITY` is the ∞ value.
#[derive(Clone)]
pub struct Exponent {
    eval: Evaluator,
    constant: Option<f64>,
    domain: Option<Grid>,
    p_minus: f64,
    p_plus: f64,
    p_infty: Option<f64>,
}

impl fmt::Debug for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Exponent")
            .field("constant", &self.constant)
            .field("p_minus", &self.p_minus)
            .field("p_plus", &self.p_plus)
            .field("p_infty", &self.p_infty)
            .finish()
    }
}

fn check_value(v: f64) -> Result<()> {
    if v.is_nan() || v <= 0.0 {
        return Err(Error::Data(format!("exponent values must lie in (0, ∞], got {v}")));
    }
    Ok(())
}

/// `1/p` with `1/∞ = 0`.
pub fn recip(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// Inverse of [`recip`]: `1/0 = ∞`.
pub fn from_recip(r: f64) -> f64 {
    if r <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / r
    }
}

impl Exponent {
    pub fn constant(p: f64) -> Result<Self> {
        check_value(p)?;
        Ok(Exponent {
            eval: Arc::new(move |_| p),
            constant: Some(p),
            domain: None,
            p_minus: p,
            p_plus: p,
            p_infty: Some(p),
        })
    }

    /// Exponent given by a closure; extremes are taken over the samples of `grid`,
    /// whose box becomes the evaluation domain.
    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Result<Self> {
        let eval: Evaluator = Arc::new(f);
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for k in 0..grid.len() {
            let x = grid.point(k);
            let v = eval(&x[..grid.dim()]);
            check_value(v)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok(Exponent { eval, constant: None, domain: Some(*grid), p_minus: lo, p_plus: hi, p_infty: None })
    }

    /// `left` for `x_0 < split`, `right` for `x_0 >= split`.
    pub fn two_piece(grid: &Grid, left: f64, right: f64, split: f64) -> Result<Self> {
        check_value(left)?;
        check_value(right)?;
        Self::from_fn(grid, move |x| if x[0] < split { left } else { right })
    }

    /// Exponent defined by samples on `grid`, evaluated at the nearest sample.
    pub fn from_samples(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Data(format!("expected {} exponent samples, got {}", grid.len(), values.len())));
        }
        for &v in &values {
            check_value(v)?;
        }
        let g = *grid;
        let values = Arc::new(values);
        Self::from_fn(grid, move |x| values[g.nearest(x)])
    }

    /// Attach a known limit value `p_∞`.
    pub fn with_p_infty(mut self, p_infty: f64) -> Result<Self> {
        check_value(p_infty)?;
        self.p_infty = Some(p_infty);
        Ok(self)
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }
    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }
    /// Declared `p_∞`, if any.
    pub fn p_infty(&self) -> Option<f64> {
        self.p_infty
    }
    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }
    pub fn domain(&self) -> Option<&Grid> {
        self.domain.as_ref()
    }

    /// `p(x)`; errors when `x` is outside the working box.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if let Some(g) = &self.domain {
            if !g.contains(x) {
                return Err(Error::Domain(format!("point {x:?} outside the box [-{0}, {0}]^n", g.half_width())));
            }
        }
        Ok((self.eval)(x))
    }

    /// Unchecked evaluation, for points known to lie in the box.
    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    /// Values at every sample of `grid`.
    pub fn samples(&self, grid: &Grid) -> Vec<f64> {
        if let Some(c) = self.constant {
            return vec![c; grid.len()];
        }
        (0..grid.len())
            .map(|k| {
                let x = grid.point(k);
                (self.eval)(&x[..grid.dim()])
            })
            .collect()
    }

    /// Pointwise transform `x ↦ f(p(x))`.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Result<Exponent> {
        if let Some(c) = self.constant {
            return Exponent::constant(f(c));
        }
        let inner = self.eval.clone();
        let grid = self.domain.expect("non-constant exponents carry a domain grid");
        let mut out = Exponent::from_fn(&grid, move |x| f(inner(x)))?;
        out.p_infty = None;
        Ok(out)
    }

    /// Pointwise combination `x ↦ f(p(x), q(x))`.
    pub fn zip(&self, other: &Exponent, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Result<Exponent> {
        if let (Some(a), Some(b)) = (self.constant, other.constant) {
            return Exponent::constant(f(a, b));
        }
        let grid = self.domain.or(other.domain).expect("non-constant exponents carry a domain grid");
        let (p, q) = (self.eval.clone(), other.eval.clone());
        Exponent::from_fn(&grid, move |x| f(p(x), q(x)))
    }

    /// `p / r` for a constant `r > 0`.
    pub fn div(&self, r: f64) -> Result<Exponent> {
        self.map(move |p| p / r)
    }

    /// Pointwise `min{p, q}`.
    pub fn min(&self, other: &Exponent) -> Result<Exponent> {
        self.zip(other, f64::min)
    }

    /// Pointwise `max{p, q}`.
    pub fn max(&self, other: &Exponent) -> Result<Exponent> {
        self.zip(other, f64::max)
    }

    /// Conjugate exponent `1/p + 1/p' = 1`; requires `p^- >= 1`.
    pub fn conjugate(&self) -> Result<Exponent> {
        if self.p_minus < 1.0 {
            return Err(Error::Precondition(format!("conjugate needs p^- >= 1, got {}", self.p_minus)));
        }
        let conj = |p: f64| from_recip(1.0 - recip(p));
        let mut out = self.map(conj)?;
        out.p_infty = self.p_infty.map(conj);
        Ok(out)
    }

    /// Pointwise `1/p` on `grid`.
    pub fn recip_samples(&self, grid: &Grid) -> Vec<f64> {
        self.samples(grid).into_iter().map(recip).collect()
    }
}

/// Empirical log-Hölder constants of an exponent on a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogHolder {
    pub c_loc: f64,
    pub c_inf: f64,
    pub p_infty: f64,
}

/// Pairs of flat indices visited by the log-Hölder sweep on `grid`.
fn sweep_pairs(grid: &Grid, mut visit: impl FnMut(usize, usize)) {
    let total = grid.len();
    if total <= ALL_PAIRS_LIMIT {
        for a in 0..total {
            for b in a + 1..total {
                visit(a, b);
            }
        }
        return;
    }
    let np = grid.points_per_axis() as i64;
    let n = grid.dim();
    for a in 0..total {
        let ia = grid.unflatten(a);
        let r1 = if n == 2 { -NEIGHBOR_REACH..=NEIGHBOR_REACH } else { 0..=0 };
        for d0 in 0..=NEIGHBOR_REACH {
            for d1 in r1.clone() {
                if d0 == 0 && d1 <= 0 {
                    continue;
                }
                let (x0, x1) = (ia[0] as i64 + d0, ia[1] as i64 + d1);
                if x0 >= np || x1 < 0 || x1 >= np.max(1) || (n == 1 && x1 != 0) {
                    continue;
                }
                visit(a, grid.flatten([x0 as usize, x1 as usize]));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SEED);
    for _ in 0..RANDOM_PAIRS {
        let a = rng.gen_range(0..total);
        let b = rng.gen_range(0..total);
        if a != b {
            visit(a, b);
        }
    }
}

/// `max |g(x) - g(y)| · ln(e + 1/|x-y|)` over the sweep pairs of `grid`, for real
/// samples `g` (a finite-valued function such as `1/p` or `s`).
pub fn log_holder_local(grid: &Grid, g: &[f64]) -> f64 {
    let n = grid.dim();
    let pts: Vec<_> = (0..grid.len()).map(|k| grid.point(k)).collect();
    let mut best: f64 = 0.0;
    sweep_pairs(grid, |a, b| {
        let d = (g[a] - g[b]).abs();
        if d == 0.0 {
            return;
        }
        let diff = [pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]];
        let r = norm(&diff, n);
        best = best.max(d * (std::f64::consts::E + 1.0 / r).ln());
    });
    best
}

/// Estimate `p_∞` from the boundary shell `|x|_∞ >= 0.95 A` (mean of `1/p`).
pub fn estimate_p_infty(p: &Exponent, grid: &Grid) -> f64 {
    if let Some(c) = p.as_constant() {
        return c;
    }
    let shell = 0.95 * grid.half_width();
    let n = grid.dim();
    let (mut s, mut c) = (0.0, 0usize);
    for k in 0..grid.len() {
        let x = grid.point(k);
        if x.iter().take(n).any(|v| v.abs() >= shell) {
            s += recip(p.value(&x[..n]));
            c += 1;
        }
    }
    from_recip(s / c.max(1) as f64)
}

/// Empirical local and decay log-Hölder constants of `1/p` on `grid`.
pub fn log_holder_constants(p: &Exponent, grid: &Grid) -> LogHolder {
    let p_infty = p.p_infty().unwrap_or_else(|| estimate_p_infty(p, grid));
    if let Some(c) = p.as_constant() {
        return LogHolder { c_loc: 0.0, c_inf: 0.0, p_infty: c };
    }
    let r = p.recip_samples(grid);
    let c_loc = log_holder_local(grid, &r);
    let ri = recip(p_infty);
    let n = grid.dim();
    let c_inf = r
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let x = grid.point(k);
            (v - ri).abs() * (std::f64::consts::E + norm(&x, n)).ln()
        })
        .fold(0.0, f64::max);
    LogHolder { c_loc, c_inf, p_infty }
}

/// Two-resolution comparison of the local constant.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LogHolderCertificate {
    pub coarse: LogHolder,
    pub fine: LogHolder,
    /// `c_loc(2N) / c_loc(N)` (1 when both vanish).
    pub growth: f64,
    pub is_log_holder: bool,
}

/// Threshold on the growth ratio under one refinement.
pub const LOG_HOLDER_GROWTH_LIMIT: f64 = 1.1;

pub fn certify_log_holder(p: &Exponent, grid: &Grid) -> LogHolderCertificate {
    let coarse = log_holder_constants(p, grid);
    let fine = log_holder_constants(p, &grid.refined());
    let growth = if coarse.c_loc == 0.0 {
        if fine.c_loc == 0.0 {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        fine.c_loc / coarse.c_loc
    };
    LogHolderCertificate { coarse, fine, growth, is_log_holder: growth < LOG_HOLDER_GROWTH_LIMIT }
}

/// `σ_{r,t} = n (1/min{1,r,t} - 1)`.
pub fn sigma(r: f64, t: f64, n: usize) -> Result<f64> {
    if !(r > 0.0 && t > 0.0) {
        return Err(Error::Precondition(format!("sigma needs positive arguments, got ({r}, {t})")));
    }
    Ok(n as f64 * (1.0 / r.min(t).min(1.0) - 1.0))
}

/// Closed-form weight families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightKind {
    /// `w_j = 2^{js}`.
    ConstantS { s: f64 },
    /// `w_j(x) = 2^{js} (1 + 2^j |x - x0|)^{s'}`.
    TwoMicrolocal { s: f64, s_prime: f64, x0: Vec<f64> },
    /// `w_j(x) = 2^{j s(x)}` with `s(x) = base + amplitude·exp(-|x|²/width²)`.
    VariableS { base: f64, amplitude: f64, width: f64 },
}

/// Sampled weights `w_j`, `j = 0..=J`, with declared class parameters.
#[derive(Clone, Debug)]
pub struct WeightSequence {
    grid: Grid,
    weights: Vec<Vec<f64>>,
    alpha: f64,
    alpha1: f64,
    alpha2: f64,
    c: f64,
}

impl WeightSequence {
    /// Build from explicit samples. Every sample must be positive.
    pub fn from_levels(grid: Grid, weights: Vec<Vec<f64>>, alpha: f64, alpha1: f64, alpha2: f64, c: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Precondition("weight sequence needs at least one level".into()));
        }
        for (j, w) in weights.iter().enumerate() {
            if w.len() != grid.len() {
                return Err(Error::Data(format!("level {j}: expected {} samples, got {}", grid.len(), w.len())));
            }
            if let Some(v) = w.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::Data(format!("level {j}: nonpositive weight sample {v}")));
            }
        }
        if !(alpha >= 0.0 && alpha1 <= alpha2) {
            return Err(Error::Precondition(format!("invalid class parameters α={alpha}, α1={alpha1}, α2={alpha2}")));
        }
        Ok(WeightSequence { grid, weights, alpha, alpha1, alpha2, c })
    }

    /// `w_j(x) = 2^{j s(x)}`, certified with `α = c_log(s)`, `c = e^{c_log(s)}`,
    /// `α1 = s^-`, `α2 = s^+`.
    pub fn variable_s(grid: Grid, jmax: usize, s: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let n = grid.dim();
        let sv: Vec<f64> = (0..grid.len()).map(|k| s(&grid.point(k)[..n])).collect();
        let c_log = log_holder_local(&grid, &sv);
        let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = sv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights = (0..=jmax).map(|j| sv.iter().map(|v| 2f64.powf(j as f64 * v)).collect()).collect();
        Self::from_levels(grid, weights, c_log, lo, hi, c_log.exp())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    /// Highest level `J`.
    pub fn jmax(&self) -> usize {
        self.weights.len() - 1
    }
    pub fn level(&self, j: usize) -> &[f64] {
        &self.weights[j]
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }
    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
    /// Declared constant of condition (i).
    pub fn c(&self) -> f64 {
        self.c
    }
    /// `w_j` at the sample nearest to `x`.
    pub fn at(&self, j: usize, x: &[f64]) -> f64 {
        self.weights[j][self.grid.nearest(x)]
    }

    /// Keep levels `0..=jmax` only.
    pub fn truncated(&self, jmax: usize) -> Result<Self> {
        if jmax > self.jmax() {
            return Err(Error::Precondition(format!("weights only go up to level {}", self.jmax())));
        }
        let mut out = self.clone();
        out.weights.truncate(jmax + 1);
        Ok(out)
    }

    /// Multiply level `j` pointwise by `f(j, x)`, keeping declared parameters given.
    pub fn rescaled(&self, f: impl Fn(usize, &[f64]) -> f64, alpha: f64, alpha1: f64, alpha2: f64, c: f64) -> Result<Self> {
        let n = self.grid.dim();
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| w.iter().enumerate().map(|(k, v)| v * f(j, &self.grid.point(k)[..n])).collect())
            .collect();
        Self::from_levels(self.grid, weights, alpha, alpha1, alpha2, c)
    }
}

/// Sample a weight family on `grid` for levels `0..=jmax`.
pub fn make_weight(kind: &WeightKind, grid: &Grid, jmax: usize) -> Result<WeightSequence> {
    let n = grid.dim();
    match kind {
        WeightKind::ConstantS { s } => {
            if !s.is_finite() {
                return Err(Error::Precondition(format!("s must be finite, got {s}")));
            }
            let weights = (0..=jmax).map(|j| vec![2f64.powf(j as f64 * s); grid.len()]).collect();
            WeightSequence::from_levels(*grid, weights, 0.0, *s, *s, 1.0)
        }
        WeightKind::TwoMicrolocal { s, s_prime, x0 } => {
            if x0.len() != n || !s.is_finite() || !s_prime.is_finite() {
                return Err(Error::Precondition(format!("two-microlocal weight needs finite s, s' and x0 of length {n}")));
            }
            let weights = (0..=jmax)
                .map(|j| {
                    let sj = 2f64.powi(j as i32);
                    (0..grid.len())
                        .map(|k| {
                            let x = grid.point(k);
                            let d = [x[0] - x0[0], x[1] - x0.get(1).copied().unwrap_or(0.0)];
                            2f64.powf(j as f64 * s) * (1.0 + sj * norm(&d, n)).powf(*s_prime)
                        })
                        .collect()
                })
                .collect();
            WeightSequence::from_levels(*grid, weights, s_prime.abs(), s + s_prime.min(0.0), s + s_prime.max(0.0), 1.0)
        }
        WeightKind::VariableS { base, amplitude, width } => {
            if !(*width > 0.0 && base.is_finite() && amplitude.is_finite()) {
                return Err(Error::Precondition("variable smoothness needs finite base/amplitude and width > 0".into()));
            }
            let (b, a, w) = (*base, *amplitude, *width);
            WeightSequence::variable_s(*grid, jmax, move |x| b + a * (-norm(x, x.len()).powi(2) / (w * w)).exp())
        }
    }
}

/// Empirical check of the class conditions for a weight sequence.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// Smallest `c` with `w_j(x) <= c w_j(y)(1+2^j|x-y|)^α` over the tested pairs.
    pub c_empirical: f64,
    pub c_declared: f64,
    pub alpha: f64,
    pub alpha1_empirical: f64,
    pub alpha2_empirical: f64,
    pub alpha1_declared: f64,
    pub alpha2_declared: f64,
    pub condition_i: bool,
    pub condition_ii: bool,
    pub passed: bool,
}

/// Total sample count up to which condition (i) visits every pair.
const WEIGHT_ALL_PAIRS_LIMIT: usize = 512;

pub fn verify_admissible(w: &WeightSequence) -> Result<AdmissibilityReport> {
    let grid = w.grid;
    let n = grid.dim();
    for (j, lvl) in w.weights.iter().enumerate() {
        if let Some(v) = lvl.iter().find(|v| !(**v > 0.0)) {
            return Err(Error::Data(format!("level {j}: nonpositive weight sample {v}")));
        }
    }
    let total = grid.len();
    let pts: Vec<_> = (0..total).map(|k| grid.point(k)).collect();
    let pairs: Vec<(usize, usize)> = if total <= WEIGHT_ALL_PAIRS_LIMIT {
        (0..total).flat_map(|a| (0..total).map(move |b| (a, b))).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(PAIR_SEED ^ 0xa11);
        (0..RANDOM_PAIRS).map(|_| (rng.gen_range(0..total), rng.gen_range(0..total))).collect()
    };
    let mut log_c: f64 = 0.0;
    for (j, lvl) in w.weights.iter().enumerate() {
        let sj = 2f64.powi(j as i32);
        for &(a, b) in &pairs {
            let diff = [pts[a][0] - pts[b][0], pts[a][1] - pts[b][1]];
            let r = norm(&diff, n);
            let v = lvl[a].ln() - lvl[b].ln() - w.alpha * (1.0 + sj * r).ln();
            log_c = log_c.max(v);
        }
    }
    let c_empirical = log_c.exp();
    let (mut a1, mut a2) = (f64::INFINITY, f64::NEG_INFINITY);
    for j in 0..w.jmax() {
        for (lo, hi) in w.weights[j].iter().zip(&w.weights[j + 1]) {
            let r = (hi / lo).log2();
            a1 = a1.min(r);
            a2 = a2.max(r);
        }
    }
    if w.jmax() == 0 {
        a1 = w.alpha1;
        a2 = w.alpha2;
    }
    let tol = 1e-9;
    let condition_i = c_empirical <= w.c * (1.0 + tol);
    let condition_ii = w.alpha1 <= a1 + tol && a2 <= w.alpha2 + tol;
    Ok(AdmissibilityReport {
        c_empirical,
        c_declared: w.c,
        alpha: w.alpha,
        alpha1_empirical: a1,
        alpha2_empirical: a2,
        alpha1_declared: w.alpha1,
        alpha2_declared: w.alpha2,
        condition_i,
        condition_ii,
        passed: condition_i && condition_ii,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g1(np: usize) -> Grid {
        Grid::new(1, 8.0, np).unwrap()
    }

    #[test]
    fn eval_examples() {
        let g = g1(256);
        assert_eq!(Exponent::constant(2.0).unwrap().eval(&[0.3]).unwrap(), 2.0);
        let p = Exponent::from_fn(&g, |x| 2.0 + 1.0 / (1.0 + x[0] * x[0])).unwrap();
        assert_eq!(p.eval(&[0.0]).unwrap(), 3.0);
        assert!(Exponent::constant(f64::INFINITY).unwrap().eval(&[5.0]).unwrap().is_infinite());
        assert!(matches!(p.eval(&[9.0]), Err(Error::Domain(_))));
        assert!(Exponent::constant(0.0).is_err());
    }

    #[test]
    fn conjugate_examples() {
        let g = g1(256);
        assert_eq!(Exponent::constant(2.0).unwrap().conjugate().unwrap().as_constant(), Some(2.0));
        assert!(Exponent::constant(1.0).unwrap().conjugate().unwrap().as_constant().unwrap().is_infinite());
        let p = Exponent::from_fn(&g, |x| if (0.0..=1.0).contains(&x[0]) { 3.0 } else { 1.5 }).unwrap();
        let q = p.conjugate().unwrap();
        assert!((q.value(&[0.5]) - 1.5).abs() < 1e-14);
        assert!((q.value(&[-2.0]) - 3.0).abs() < 1e-14);
        assert!(Exponent::constant(0.5).unwrap().conjugate().is_err());
    }

    #[test]
    fn constant_exponent_has_zero_constants() {
        let lh = log_holder_constants(&Exponent::constant(2.5).unwrap(), &g1(512));
        assert_eq!(lh, LogHolder { c_loc: 0.0, c_inf: 0.0, p_infty: 2.5 });
    }

    #[test]
    fn smooth_ramp_constants_match_brute_force() {
        let g = g1(256);
        let ramp = |x: f64| 2.0 + (x.abs() / 2.0).min(1.0).powi(2) * (3.0 - 2.0 * (x.abs() / 2.0).min(1.0));
        let p = Exponent::from_fn(&g, move |x| ramp(x[0])).unwrap();
        let lh = log_holder_constants(&p, &g);
        let mut brute: f64 = 0.0;
        for a in 0..256 {
            for b in 0..256 {
                if a != b {
                    let (x, y) = (g.coord(a), g.coord(b));
                    let d = (1.0 / ramp(x) - 1.0 / ramp(y)).abs();
                    brute = brute.max(d * (std::f64::consts::E + 1.0 / (x - y).abs()).ln());
                }
            }
        }
        assert!((lh.c_loc - brute).abs() < 1e-14);
        assert!((lh.p_infty - 3.0).abs() < 1e-12);
        assert!(lh.c_inf.is_finite());
        assert!(certify_log_holder(&p, &g).is_log_holder);
    }

    #[test]
    fn jump_exponent_is_flagged() {
        let g = g1(1024);
        let p = Exponent::two_piece(&g, 2.0, 3.0, 0.0).unwrap();
        let c1 = certify_log_holder(&p, &g);
        let c2 = certify_log_holder(&p, &g.refined());
        assert!(!c1.is_log_holder);
        assert!(c2.fine.c_loc > c1.fine.c_loc && c1.fine.c_loc > c1.coarse.c_loc);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(1.0, 1.0, 1).unwrap(), 0.0);
        assert_eq!(sigma(0.5, 2.0, 1).unwrap(), 1.0);
        assert!((sigma(2.0 / 3.0, 1.0 / 3.0, 2).unwrap() - 4.0).abs() < 1e-12);
        assert!(sigma(0.0, 1.0, 1).is_err());
    }

    #[test]
    fn weight_examples() {
        let g = g1(256);
        let w = make_weight(&WeightKind::ConstantS { s: 0.0 }, &g, 4).unwrap();
        assert!(w.level(3).iter().all(|&v| v == 1.0));
        let w = make_weight(&WeightKind::TwoMicrolocal { s: 1.0, s_prime: 2.0, x0: vec![0.0] }, &g, 4).unwrap();
        let x: f64 = 0.75;
        let expect = 4.0 * (1.0 + 4.0 * x).powi(2);
        assert!((w.at(2, &[x]) - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn constant_weight_verifies() {
        let g = g1(256);
        let w = make_weight(&WeightKind::ConstantS { s: 1.5 }, &g, 5).unwrap();
        let r = verify_admissible(&w).unwrap();
        assert!(r.passed);
        assert_eq!(r.c_empirical, 1.0);
        assert!((r.alpha1_empirical - 1.5).abs() < 1e-12 && (r.alpha2_empirical - 1.5).abs() < 1e-12);
    }

    #[test]
    fn two_microlocal_weight_verifies() {
        let g = g1(256);
        let w = make_weight(&WeightKind::TwoMicrolocal { s: 1.0, s_prime: -0.5, x0: vec![0.0] }, &g, 6).unwrap();
        assert_eq!((w.alpha(), w.alpha1(), w.alpha2()), (0.5, 0.5, 1.0));
        let r = verify_admissible(&w).unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.c_empirical <= 1.0 + 1e-12);
    }

    #[test]
    fn variable_smoothness_weight_verifies() {
        let g = g1(512);
        let w = make_weight(&WeightKind::VariableS { base: 1.0, amplitude: 0.5, width: 1.0 }, &g, 6).unwrap();
        let r = verify_admissible(&w).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn understated_class_fails() {
        let g = g1(128);
        let w = make_weight(&WeightKind::TwoMicrolocal { s: 1.0, s_prime: 2.0, x0: vec![0.0] }, &g, 4).unwrap();
        let bad = WeightSequence::from_levels(g, (0..=4).map(|j| w.level(j).to_vec()).collect(), 0.5, 1.0, 3.0, 1.0).unwrap();
        let r = verify_admissible(&bad).unwrap();
        assert!(!r.condition_i && r.condition_ii);
    }

    #[test]
    fn nonpositive_weight_is_rejected() {
        let g = g1(32);
        assert!(matches!(
            WeightSequence::from_levels(g, vec![vec![0.0; 32]], 0.0, 0.0, 0.0, 1.0),
            Err(Error::Data(_))
        ));
    }
}
