//! Mixed spaces `L_{p(·)}(ℓ_{q(·)})` and `ℓ_{q(·)}(L_{p(·)})`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{log_holder_constants, Exponent};
use crate::grid::{eta_kernel, Grid, GridFunction};
use crate::modular::{luxemburg_values, phi, NormResult, UnitBallReport, DEFAULT_REL_TOL, UNIT_BAND};
use crate::rootfind::{threshold_search, ExpSum};

const INNER_TOL: f64 = 1e-13;

/// Finite sequence `(f_ν)_{ν=0..}` on a common grid.
#[derive(Clone, Debug)]
pub struct FunctionSequence {
    grid: Grid,
    entries: Vec<GridFunction>,
}

impl FunctionSequence {
    pub fn new(grid: Grid, entries: Vec<GridFunction>) -> Result<Self> {
        for e in &entries {
            grid.check_same(e.grid())?;
        }
        Ok(FunctionSequence { grid, entries })
    }
    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn entries(&self) -> &[GridFunction] {
        &self.entries
    }
    pub fn len(&self) -> usize {
        self.entries.len()
    }
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|e| e.is_zero())
    }
    pub fn scale(&self, c: f64) -> Self {
        FunctionSequence { grid: self.grid, entries: self.entries.iter().map(|e| e.scale(c)).collect() }
    }
    /// Same sequence with entries `ν < t` replaced by zero.
    pub fn tail(&self, t: usize) -> Self {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(nu, e)| if nu < t { GridFunction::zeros(self.grid) } else { e.clone() })
            .collect();
        FunctionSequence { grid: self.grid, entries }
    }
    fn abs_entries(&self) -> Vec<Vec<f64>> {
        self.entries.iter().map(|e| e.abs()).collect()
    }
}

/// `‖(f_ν) | L_{p(·)}(ℓ_{q(·)})‖`: pointwise `ℓ_{q(x)}` norm, then Luxemburg.
pub fn norm_lp_lq(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<NormResult> {
    let grid = seq.grid;
    let ps = p.samples(&grid);
    let qs = q.samples(&grid);
    let abs = seq.abs_entries();
    let pointwise: Vec<f64> = (0..grid.len())
        .map(|k| {
            let qk = qs[k];
            if qk.is_infinite() {
                abs.iter().map(|a| a[k]).fold(0.0, f64::max)
            } else {
                let m = abs.iter().map(|a| a[k]).fold(0.0, f64::max);
                if m == 0.0 {
                    0.0
                } else {
                    m * abs.iter().map(|a| (a[k] / m).powf(qk)).sum::<f64>().powf(1.0 / qk)
                }
            }
        })
        .collect();
    luxemburg_values(&pointwise, &ps, grid.cell_volume(), DEFAULT_REL_TOL)
}

/// `inf{λ > 0 : ρ_p(f/(μ λ^{1/q})) <= 1}` for one level, with `λ^{1/∞} = 1`.
/// `log_mu = ln μ`.
fn level_infimum(abs: &[f64], ps: &[f64], qs: &[f64], w: f64, log_mu: f64) -> Result<f64> {
    let mut fixed = 0.0;
    let mut floor: f64 = 0.0;
    let mut sum = ExpSum::new(w);
    for k in 0..abs.len() {
        if abs[k] == 0.0 {
            continue;
        }
        let lt = abs[k].ln() - log_mu;
        let (p, q) = (ps[k], qs[k]);
        if q.is_infinite() {
            fixed += phi(lt.exp(), p);
        } else if p.is_infinite() {
            floor = floor.max(q * lt);
        } else {
            sum.push(p * lt, p / q);
        }
    }
    let fixed = w * fixed;
    if fixed > 1.0 {
        return Ok(f64::INFINITY);
    }
    let floor = if floor == 0.0 { 0.0 } else { floor.exp() };
    if sum.is_empty() {
        return Ok(floor);
    }
    let beta = 1.0 - fixed;
    if beta <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let b = sum.solve(beta, INNER_TOL)?;
    Ok(floor.max(b.hi.exp()))
}

/// `inf{μ > 0 : ρ_p(f / μ^{1/q}) <= 1}` for a single function.
pub fn level_modular(f: &GridFunction, p: &Exponent, q: &Exponent) -> Result<f64> {
    let grid = *f.grid();
    level_infimum(&f.abs(), &p.samples(&grid), &q.samples(&grid), grid.cell_volume(), 0.0)
}

/// Semimodular `Σ_ν inf{λ_ν : ρ_p(f_ν/λ_ν^{1/q}) <= 1}`. For `q^+ < ∞` this uses
/// `Σ_ν ‖|f_ν|^q | L_{p/q}‖`; otherwise [`modular_lq_lp_general`].
pub fn modular_lq_lp(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<f64> {
    if q.p_plus().is_finite() {
        modular_lq_lp_fast(seq, p, q)
    } else {
        modular_lq_lp_general(seq, p, q)
    }
}

/// `Σ_ν ‖|f_ν|^{q(·)} | L_{p(·)/q(·)}‖`, valid when `q^+ < ∞`.
pub fn modular_lq_lp_fast(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<f64> {
    if q.p_plus().is_infinite() {
        return Err(Error::Precondition("the power form needs q^+ < ∞".into()));
    }
    let grid = seq.grid;
    let ps = p.samples(&grid);
    let qs = q.samples(&grid);
    let pq: Vec<f64> = ps.iter().zip(&qs).map(|(p, q)| p / q).collect();
    let mut total = 0.0;
    for e in &seq.entries {
        let powered: Vec<f64> = e.abs().iter().zip(&qs).map(|(a, q)| a.powf(*q)).collect();
        total += luxemburg_values(&powered, &pq, grid.cell_volume(), 1e-12)?.value;
    }
    Ok(total)
}

/// Per-level infima found by a bracketing search on `λ ↦ ρ_p(f_ν/λ^{1/q})`,
/// evaluating the semimodular directly. Handles `q = ∞` regions.
pub fn modular_lq_lp_general(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<f64> {
    let grid = seq.grid;
    let w = grid.cell_volume();
    let ps = p.samples(&grid);
    let qs = q.samples(&grid);
    let mut total = 0.0;
    for e in &seq.entries {
        let abs = e.abs();
        let nz: Vec<usize> = (0..abs.len()).filter(|&k| abs[k] > 0.0).collect();
        if nz.is_empty() {
            continue;
        }
        let rho = |s: f64| -> f64 {
            w * nz
                .iter()
                .map(|&k| {
                    let scale = if qs[k].is_infinite() { 1.0 } else { (-s / qs[k]).exp() };
                    phi(abs[k] * scale, ps[k])
                })
                .sum::<f64>()
        };
        // limit λ → ∞: only the q = ∞ part survives
        let at_infinity = w * nz.iter().filter(|&&k| qs[k].is_infinite()).map(|&k| phi(abs[k], ps[k])).sum::<f64>();
        if at_infinity > 1.0 {
            return Ok(f64::INFINITY);
        }
        if nz.iter().all(|&k| qs[k].is_infinite()) {
            continue;
        }
        let s0 = nz.iter().map(|&k| if qs[k].is_finite() { qs[k] * abs[k].ln() } else { 0.0 }).fold(f64::NEG_INFINITY, f64::max);
        let b = threshold_search(
            |s| {
                let r = rho(s);
                if r == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    r.ln()
                }
            },
            s0,
            1e-12f64.ln_1p(),
        )?;
        total += b.hi.exp();
    }
    Ok(total)
}

/// `inf{μ > 0 : ρ_{ℓq(Lp)}(f/μ) <= 1}` by a threshold search on `μ`, solving the
/// per-level infima at every trial value.
pub fn norm_lq_lp(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<NormResult> {
    norm_lq_lp_tol(seq, p, q, DEFAULT_REL_TOL)
}

pub fn norm_lq_lp_tol(seq: &FunctionSequence, p: &Exponent, q: &Exponent, rel_tol: f64) -> Result<NormResult> {
    if seq.is_zero() {
        return Ok(NormResult::exact(0.0));
    }
    let grid = seq.grid;
    let w = grid.cell_volume();
    let ps = p.samples(&grid);
    let qs = q.samples(&grid);
    let abs: Vec<Vec<f64>> = seq.abs_entries().into_iter().filter(|a| a.iter().any(|v| *v > 0.0)).collect();
    let mut failure = None;
    let g = |t: f64| -> f64 {
        let mut h = 0.0;
        for a in &abs {
            match level_infimum(a, &ps, &qs, w, t) {
                Ok(v) => h += v,
                Err(e) => {
                    failure.get_or_insert(e);
                    return f64::NAN;
                }
            }
            if h.is_infinite() {
                return f64::INFINITY;
            }
        }
        if h == 0.0 {
            f64::NEG_INFINITY
        } else {
            h.ln()
        }
    };
    let t0 = abs.iter().flat_map(|a| a.iter()).fold(0.0f64, |m, v| m.max(*v)).ln();
    let b = threshold_search(g, t0, rel_tol.ln_1p());
    if let Some(e) = failure {
        return Err(e);
    }
    let b = b?;
    Ok(NormResult { value: b.hi.exp(), bracket: (b.lo.exp(), b.hi.exp()), iterations: b.iterations })
}

/// `‖(f_ν)_{ν >= T} | ℓ_{q(·)}(L_{p(·)})‖`.
pub fn tail_norm(seq: &FunctionSequence, p: &Exponent, q: &Exponent, t: usize) -> Result<f64> {
    if t >= seq.len() {
        return Ok(0.0);
    }
    Ok(norm_lq_lp(&seq.tail(t), p, q)?.value)
}

/// Unit-ball comparison in `ℓ_{q(·)}(L_{p(·)})`.
pub fn check_unit_ball_lq_lp(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<UnitBallReport> {
    let modular = modular_lq_lp(seq, p, q)?;
    let norm = norm_lq_lp(seq, p, q)?.value;
    Ok(UnitBallReport {
        modular,
        norm,
        modular_le_one: modular <= 1.0,
        norm_le_one: norm <= 1.0,
        inconclusive: (norm - 1.0).abs() <= UNIT_BAND,
    })
}

/// `‖·‖ <= max{ρ^{1/q^-}, ρ^{1/q^+}}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MixedNormModularReport {
    pub modular: f64,
    pub norm: f64,
    pub bound: f64,
    pub holds: bool,
    pub skipped: bool,
}

pub fn norm_modular_estimate(seq: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<MixedNormModularReport> {
    let modular = modular_lq_lp(seq, p, q)?;
    let norm = norm_lq_lp(seq, p, q)?.value;
    let (qm, qp) = (q.p_minus(), q.p_plus());
    if qm.is_infinite() || !(modular > 0.0 || qp.is_finite()) {
        return Ok(MixedNormModularReport { modular, norm, bound: f64::NAN, holds: true, skipped: true });
    }
    let a = modular.powf(1.0 / qm);
    let b = if qp.is_infinite() { if modular > 0.0 { 1.0 } else { 0.0 } } else { modular.powf(1.0 / qp) };
    let bound = a.max(b);
    Ok(MixedNormModularReport { modular, norm, bound, holds: norm <= bound * (1.0 + 1e-9), skipped: false })
}

/// Measured embedding ratios for `q0 <= q1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// `‖·|ℓ_{q1}(L_p)‖ / ‖·|ℓ_{q0}(L_p)‖`.
    pub lq_lp_ratio: f64,
    /// `‖·|L_p(ℓ_{q1})‖ / ‖·|L_p(ℓ_{q0})‖`.
    pub lp_lq_ratio: f64,
    pub holds: bool,
    /// `‖·|L_p(ℓ_{q0})‖ / ‖·|ℓ_{min{p,q0}}(L_p)‖`, when `p^+, q0^+ < ∞`.
    pub lower_sandwich: Option<f64>,
    /// `‖·|ℓ_{max{p,q0}}(L_p)‖ / ‖·|L_p(ℓ_{q0})‖`, when `p^+, q0^+ < ∞`.
    pub upper_sandwich: Option<f64>,
}

pub const EMBED_TOL: f64 = 1e-8;

pub fn check_embeddings(seq: &FunctionSequence, p: &Exponent, q0: &Exponent, q1: &Exponent) -> Result<EmbeddingReport> {
    let grid = seq.grid;
    let (a, b) = (q0.samples(&grid), q1.samples(&grid));
    if a.iter().zip(&b).any(|(x, y)| x > y) {
        return Err(Error::Precondition("embedding check needs q0 <= q1 pointwise".into()));
    }
    let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
    let l0 = norm_lq_lp(seq, p, q0)?.value;
    let l1 = norm_lq_lp(seq, p, q1)?.value;
    let m0 = norm_lp_lq(seq, p, q0)?.value;
    let m1 = norm_lp_lq(seq, p, q1)?.value;
    let lq_lp_ratio = ratio(l1, l0);
    let lp_lq_ratio = ratio(m1, m0);
    let holds = lq_lp_ratio <= 1.0 + EMBED_TOL && lp_lq_ratio <= 1.0 + EMBED_TOL;
    let (mut lower_sandwich, mut upper_sandwich) = (None, None);
    if p.p_plus().is_finite() && q0.p_plus().is_finite() {
        let lo = norm_lq_lp(seq, p, &p.min(q0)?)?.value;
        let hi = norm_lq_lp(seq, p, &p.max(q0)?)?.value;
        lower_sandwich = Some(ratio(m0, lo));
        upper_sandwich = Some(ratio(hi, m0));
    }
    Ok(EmbeddingReport { lq_lp_ratio, lp_lq_ratio, holds, lower_sandwich, upper_sandwich })
}

/// Which mixed space an η-convolution check runs in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EtaVariant {
    /// `L_{p(·)}(ℓ_{q(·)})`.
    F,
    /// `ℓ_{q(·)}(L_{p(·)})`.
    B,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtaConvolutionReport {
    /// `‖(η_{ν,R} * f_ν)‖ / ‖(f_ν)‖` (0 for the zero sequence).
    pub ratio: f64,
    pub skipped: bool,
    pub reason: Option<String>,
}

pub fn check_eta_convolution(seq: &FunctionSequence, p: &Exponent, q: &Exponent, r: f64, variant: EtaVariant) -> Result<EtaConvolutionReport> {
    let grid = seq.grid;
    let n = grid.dim() as f64;
    let skip = |why: String| Ok(EtaConvolutionReport { ratio: f64::NAN, skipped: true, reason: Some(why) });
    match variant {
        EtaVariant::F => {
            let ok = p.p_minus() > 1.0 && p.p_plus().is_finite() && q.p_minus() > 1.0 && q.p_plus().is_finite();
            if !ok {
                return skip("needs 1 < p^- <= p^+ < ∞ and 1 < q^- <= q^+ < ∞".into());
            }
            if r <= n {
                return skip(format!("needs R > n, got R = {r}"));
            }
        }
        EtaVariant::B => {
            if p.p_minus() < 1.0 {
                return skip("needs p^- >= 1".into());
            }
            let cq = log_holder_constants(&q.map(crate::exponent::recip)?, &grid).c_loc;
            let c1q = crate::exponent::log_holder_local(&grid, &q.recip_samples(&grid));
            let c = cq.max(c1q);
            if r <= n + c {
                return skip(format!("needs R > n + c_log(1/q) = {}", n + c));
            }
        }
    }
    if seq.is_zero() {
        return Ok(EtaConvolutionReport { ratio: 0.0, skipped: false, reason: None });
    }
    let abs_seq = FunctionSequence::new(grid, seq.entries.iter().map(|e| e.map(|z| z.norm().into())).collect())?;
    let conv = FunctionSequence::new(
        grid,
        abs_seq
            .entries
            .iter()
            .enumerate()
            .map(|(nu, e)| crate::fourier::convolve(&eta_kernel(nu as i32, r, &grid)?, e).map(|z| z.re.max(0.0).into()).pipe(Ok))
            .collect::<Result<Vec<_>>>()?,
    )?;
    let (num, den) = match variant {
        EtaVariant::F => (norm_lp_lq(&conv, p, q)?.value, norm_lp_lq(&abs_seq, p, q)?.value),
        EtaVariant::B => (norm_lq_lp(&conv, p, q)?.value, norm_lq_lp(&abs_seq, p, q)?.value),
    };
    Ok(EtaConvolutionReport { ratio: num / den, skipped: false, reason: None })
}

trait Pipe: Sized {
    fn pipe<T>(self, f: impl FnOnce(Self) -> T) -> T {
        f(self)
    }
}
impl<T> Pipe for T {}
