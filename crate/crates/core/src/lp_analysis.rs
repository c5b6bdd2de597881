//! Littlewood–Paley blocks, Besov and Triebel–Lizorkin quasi-norms, and Peetre
//! maximal functions.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{Exponent, WeightSequence};
use crate::fourier::{nyquist, Spectrum};
use crate::grid::{norm, GridFunction};
use crate::mixed::{norm_lp_lq, norm_lq_lp, FunctionSequence};
use crate::modular::lp_norm;
use crate::par;

/// Radial profile family for the low-pass function `Φ̂`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// `cos²(π/2 · S(t))` with the smooth step `S(t) = e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`.
    CosineBump,
    /// `1 - (35t⁴ - 84t⁵ + 70t⁶ - 20t⁷)`, three times continuously differentiable.
    PolynomialBump,
}

impl Profile {
    /// Radii `(r0, r1)`: `Φ̂ = 1` on `[0, r0]`, `Φ̂ = 0` beyond `r1`.
    pub fn default_radii(self) -> (f64, f64) {
        match self {
            Profile::CosineBump => (1.0, 2.0),
            Profile::PolynomialBump => (1.05, 1.9),
        }
    }
}

/// `C^∞` step from 0 at `t <= 0` to 1 at `t >= 1`.
pub(crate) fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

fn septic_step(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(4) * (35.0 + t * (-84.0 + t * (70.0 - 20.0 * t)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub r0: f64,
    pub r1: f64,
}

/// Radial pair `(φ̂, Φ̂)` with `φ̂(ξ) = Φ̂(ξ) - Φ̂(2ξ)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct AdmissiblePair {
    pub profile: Profile,
    pub r0: f64,
    pub r1: f64,
    /// Minimum of `φ̂` on `3/5 <= |ξ| <= 5/3` and of `Φ̂` on `|ξ| <= 5/3`.
    pub lower_bound: f64,
}

const SWEEP_POINTS: usize = 40_001;
const SWEEP_MAX: f64 = 4.0;

impl AdmissiblePair {
    /// `Φ̂` at radius `r = |ξ|`.
    pub fn big_phi_hat(&self, r: f64) -> f64 {
        let t = (r - self.r0) / (self.r1 - self.r0);
        if t <= 0.0 {
            return 1.0;
        }
        if t >= 1.0 {
            return 0.0;
        }
        match self.profile {
            Profile::CosineBump => (0.5 * PI * smooth_step(t)).cos().powi(2),
            Profile::PolynomialBump => 1.0 - septic_step(t),
        }
    }

    /// `φ̂` at radius `r = |ξ|`.
    pub fn phi_hat(&self, r: f64) -> f64 {
        self.big_phi_hat(r) - self.big_phi_hat(2.0 * r)
    }

    /// `φ̂_j(ξ)`: `Φ̂` for `j = 0`, `φ̂(2^{-j}ξ)` otherwise.
    pub fn level_hat(&self, j: usize, r: f64) -> f64 {
        if j == 0 {
            self.big_phi_hat(r)
        } else {
            self.phi_hat(r * 0.5f64.powi(j as i32))
        }
    }

    /// `(r, φ̂(r), Φ̂(r))` on a uniform radial grid over `[0, r_max]`.
    pub fn radial_samples(&self, count: usize, r_max: f64) -> Vec<(f64, f64, f64)> {
        (0..count)
            .map(|i| {
                let r = r_max * i as f64 / (count - 1) as f64;
                (r, self.phi_hat(r), self.big_phi_hat(r))
            })
            .collect()
    }

    /// Sweep the support and lower-bound conditions on a fine radial grid.
    pub fn verify(&self) -> Result<()> {
        let mut prev = f64::INFINITY;
        for (r, small, big) in self.radial_samples(SWEEP_POINTS, SWEEP_MAX) {
            if !(-1e-15..=1.0 + 1e-15).contains(&big) || big > prev + 1e-15 {
                return Err(Error::Construction(format!("Φ̂ is not a monotone cut-off (r = {r})")));
            }
            prev = big;
            if r > 2.0 && big != 0.0 {
                return Err(Error::Construction(format!("Φ̂({r}) = {big} outside |ξ| <= 2")));
            }
            if (r < 0.5 || r > 2.0) && small != 0.0 {
                return Err(Error::Construction(format!("φ̂({r}) = {small} outside 1/2 <= |ξ| <= 2")));
            }
            let c = self.lower_bound;
            if (0.6..=5.0 / 3.0).contains(&r) && small < c * (1.0 - 1e-12) {
                return Err(Error::Construction(format!("φ̂({r}) = {small} below the bound {c}")));
            }
            if r <= 5.0 / 3.0 && big < c * (1.0 - 1e-12) {
                return Err(Error::Construction(format!("Φ̂({r}) = {big} below the bound {c}")));
            }
        }
        Ok(())
    }
}

/// Build and verify an admissible pair. `params = None` picks the profile's
/// default radii.
pub fn make_admissible_pair(profile: Profile, params: Option<PairParams>) -> Result<AdmissiblePair> {
    let (r0, r1) = params.map(|p| (p.r0, p.r1)).unwrap_or_else(|| profile.default_radii());
    if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
        return Err(Error::Domain(format!("need 0 < r0 < r1 < ∞, got r0 = {r0}, r1 = {r1}")));
    }
    let mut pair = AdmissiblePair { profile, r0, r1, lower_bound: 0.0 };
    // with Φ̂ monotone the extremes sit at the ends of the two bands
    let c = pair.phi_hat(0.6).min(pair.phi_hat(5.0 / 3.0)).min(pair.big_phi_hat(5.0 / 3.0));
    if !(c > 0.0) {
        return Err(Error::Construction(format!("lower bound {c} is not positive for r0 = {r0}, r1 = {r1}")));
    }
    pair.lower_bound = c;
    pair.verify()?;
    Ok(pair)
}

/// Largest `Jmax` with `2^{Jmax+1} <= π/h`.
pub fn max_feasible_jmax(grid: &crate::grid::Grid) -> Option<usize> {
    let l = nyquist(grid).log2().floor() - 1.0;
    (l >= 0.0).then_some(l as usize)
}

fn check_jmax(grid: &crate::grid::Grid, jmax: usize) -> Result<()> {
    if 2f64.powi(jmax as i32 + 1) > nyquist(grid) {
        let best = max_feasible_jmax(grid).map_or("none".to_string(), |j| j.to_string());
        return Err(Error::Precondition(format!(
            "Jmax = {jmax} exceeds the Nyquist limit π/h = {:.3}; max feasible Jmax is {best}",
            nyquist(grid)
        )));
    }
    Ok(())
}

/// `(φ_j * f)_{j=0..=Jmax}` by Fourier multiplication.
pub fn lp_blocks(f: &GridFunction, pair: &AdmissiblePair, jmax: usize) -> Result<FunctionSequence> {
    let grid = *f.grid();
    check_jmax(&grid, jmax)?;
    f.check_decay()?;
    let spectrum = Spectrum::new(f);
    let n = grid.dim();
    let blocks = par::map(jmax + 1, |j| spectrum.filtered(|xi| Complex64::new(pair.level_hat(j, norm(xi, n)), 0.0)));
    FunctionSequence::new(grid, blocks)
}

/// `sup |Σ_j φ_j * f - f|`, which telescopes to `f` filtered by `Φ̂(2^{-Jmax}ξ) - 1`.
pub fn partition_residual(f: &GridFunction, pair: &AdmissiblePair, jmax: usize) -> Result<f64> {
    let blocks = lp_blocks(f, pair, jmax)?;
    let mut sum = GridFunction::zeros(*f.grid());
    for b in blocks.entries() {
        sum.axpy(Complex64::new(1.0, 0.0), b)?;
    }
    Ok(sum.sub(f)?.max_abs())
}

/// `(w_j · (φ_j * f))_j`.
pub fn weighted_blocks(f: &GridFunction, w: &WeightSequence, pair: &AdmissiblePair) -> Result<FunctionSequence> {
    f.grid().check_same(w.grid())?;
    let blocks = lp_blocks(f, pair, w.jmax())?;
    apply_weights(&blocks, w)
}

pub fn apply_weights(blocks: &FunctionSequence, w: &WeightSequence) -> Result<FunctionSequence> {
    if blocks.len() != w.jmax() + 1 {
        return Err(Error::Precondition(format!("{} blocks for a weight with Jmax = {}", blocks.len(), w.jmax())));
    }
    let entries = blocks
        .entries()
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let lw = w.level(j);
            let samples = b.samples().iter().zip(lw).map(|(z, v)| z * v).collect();
            GridFunction::new(*blocks.grid(), samples)
        })
        .collect::<Result<Vec<_>>>()?;
    FunctionSequence::new(*blocks.grid(), entries)
}

/// A truncated space norm together with the size of its last level,
/// `‖w_{Jmax}(φ_{Jmax} * f) | L_{p(·)}‖`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpaceNorm {
    pub value: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
    pub tail: f64,
}

fn space_norm(weighted: &FunctionSequence, p: &Exponent, result: crate::modular::NormResult) -> Result<SpaceNorm> {
    let last = weighted.entries().last().map(|e| lp_norm(e, p)).transpose()?.unwrap_or(0.0);
    Ok(SpaceNorm { value: result.value, bracket: result.bracket, iterations: result.iterations, tail: last })
}

/// `‖f | B^w_{p(·),q(·)}‖` with levels `0..=Jmax` of `w`.
pub fn besov_norm(f: &GridFunction, w: &WeightSequence, p: &Exponent, q: &Exponent, pair: &AdmissiblePair) -> Result<SpaceNorm> {
    let wb = weighted_blocks(f, w, pair)?;
    besov_norm_weighted(&wb, p, q)
}

/// Besov norm of already weighted blocks.
pub fn besov_norm_weighted(weighted: &FunctionSequence, p: &Exponent, q: &Exponent) -> Result<SpaceNorm> {
    space_norm(weighted, p, norm_lq_lp(weighted, p, q)?)
}

/// `‖f | F^w_{p(·),q(·)}‖`; needs `p^+, q^+ < ∞`.
pub fn tl_norm(f: &GridFunction, w: &WeightSequence, p: &Exponent, q: &Exponent, pair: &AdmissiblePair) -> Result<SpaceNorm> {
    if p.p_plus().is_infinite() || q.p_plus().is_infinite() {
        return Err(Error::Precondition("Triebel–Lizorkin norms need p^+ < ∞ and q^+ < ∞".into()));
    }
    let wb = weighted_blocks(f, w, pair)?;
    space_norm(&wb, p, norm_lp_lq(&wb, p, q)?)
}

/// Besov (`B`) or Triebel–Lizorkin (`F`) scale.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceKind {
    B,
    F,
}

/// [`besov_norm`] or [`tl_norm`] by kind.
pub fn space_norm_of(f: &GridFunction, w: &WeightSequence, p: &Exponent, q: &Exponent, pair: &AdmissiblePair, kind: SpaceKind) -> Result<SpaceNorm> {
    match kind {
        SpaceKind::B => besov_norm(f, w, p, q, pair),
        SpaceKind::F => tl_norm(f, w, p, q, pair),
    }
}

/// `n / min{p^-, q^-} + α + 1`.
pub fn default_tau(n: usize, p: &Exponent, q: &Exponent, alpha: f64) -> f64 {
    n as f64 / p.p_minus().min(q.p_minus()) + alpha + 1.0
}

/// `max_y |b(y)| / (1 + |2^j(x - y)|^τ)` over grid points `y`.
pub fn peetre_of_block(block: &GridFunction, j: usize, tau: f64) -> Result<GridFunction> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("τ must be positive, got {tau}")));
    }
    let grid = *block.grid();
    let n = grid.dim();
    let abs = block.abs();
    let mut order: Vec<usize> = (0..abs.len()).filter(|&k| abs[k] > 0.0).collect();
    order.sort_by(|&a, &b| abs[b].total_cmp(&abs[a]));
    let scale = 2f64.powi(j as i32);
    let points: Vec<[f64; 2]> = (0..grid.len()).map(|k| grid.point(k)).collect();
    let values = par::map(grid.len(), |x| {
        let px = points[x];
        let mut best = abs[x];
        for &y in &order {
            // the denominator is at least 1
            if abs[y] <= best {
                break;
            }
            let py = points[y];
            let d = norm(&[px[0] - py[0], px[1] - py[1]], n) * scale;
            best = best.max(abs[y] / (1.0 + d.powf(tau)));
        }
        best
    });
    GridFunction::from_real(grid, &values)
}

/// `(ψ*_j f)_τ`, the Peetre maximal function of block `j`.
pub fn peetre_maximal(f: &GridFunction, pair: &AdmissiblePair, j: usize, tau: f64) -> Result<GridFunction> {
    let blocks = lp_blocks(f, pair, j)?;
    peetre_of_block(&blocks.entries()[j], j, tau)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairIndependenceReport {
    /// `besov_norm(f; A) / besov_norm(f; B)` per nonzero member.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub min_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
    pub excluded: usize,
}

pub fn pair_independence_check(
    family: &[GridFunction],
    pair_a: &AdmissiblePair,
    pair_b: &AdmissiblePair,
    w: &WeightSequence,
    p: &Exponent,
    q: &Exponent,
) -> Result<PairIndependenceReport> {
    let mut ratios = Vec::new();
    let mut excluded = 0;
    for f in family {
        if f.is_zero() {
            excluded += 1;
            continue;
        }
        let a = besov_norm(f, w, p, q, pair_a)?.value;
        let b = besov_norm(f, w, p, q, pair_b)?.value;
        ratios.push(a / b);
    }
    let max_ratio = ratios.iter().copied().fold(f64::NAN, f64::max);
    let min_ratio = ratios.iter().copied().fold(f64::NAN, f64::min);
    Ok(PairIndependenceReport { spread: max_ratio / min_ratio, ratios, max_ratio, min_ratio, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent::{make_weight, WeightKind};
    use crate::grid::{integrate, Grid};

    fn rig() -> Grid {
        Grid::new(1, 8.0, 4096).unwrap()
    }

    fn gaussian(g: Grid, s: f64) -> GridFunction {
        GridFunction::from_real_fn(g, move |x| (-x[0] * x[0] / (s * s)).exp())
    }

    #[test]
    fn profiles_are_admissible_and_distinct() {
        let a = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let b = make_admissible_pair(Profile::PolynomialBump, None).unwrap();
        assert!(a.lower_bound > 0.0 && b.lower_bound > 0.0);
        assert!((a.big_phi_hat(1.5) - b.big_phi_hat(1.5)).abs() > 1e-3);
        // partition of unity telescopes
        for r in [0.0, 0.3, 1.7, 5.0, 37.0] {
            let s: f64 = (0..=8).map(|j| a.level_hat(j, r)).sum();
            assert!((s - a.big_phi_hat(r / 256.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn oversized_support_rejected() {
        let e = make_admissible_pair(Profile::CosineBump, Some(PairParams { r0: 1.0, r1: 3.0 })).unwrap_err();
        assert_eq!(e.kind(), "construction");
        assert!(make_admissible_pair(Profile::CosineBump, Some(PairParams { r0: 0.8, r1: 2.0 })).is_err());
    }

    #[test]
    fn nyquist_limit_names_feasible_level() {
        let g = Grid::new(1, 8.0, 256).unwrap();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let f = gaussian(g, 1.0);
        let e = lp_blocks(&f, &pair, 8).unwrap_err().to_string();
        assert!(e.contains("max feasible Jmax is 4"), "{e}");
        assert!(lp_blocks(&f, &pair, 4).is_ok());
    }

    #[test]
    fn band_limited_blocks_vanish() {
        // wide Gaussians have f̂ below e^{-60} beyond |ξ| = 2
        let g = Grid::new(1, 64.0, 4096).unwrap();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let f = gaussian(g, 8.0);
        let blocks = lp_blocks(&f, &pair, 5).unwrap();
        for j in 2..=5 {
            assert!(blocks.entries()[j].max_abs() <= 1e-10 * f.max_abs(), "j = {j}");
        }
    }

    #[test]
    fn pure_frequency_hits_three_blocks() {
        let g = Grid::new(1, 64.0, 4096).unwrap();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let f = GridFunction::from_fn(g, |x| Complex64::from_polar((-x[0] * x[0] / 64.0).exp(), 1.2 * x[0]));
        let blocks = lp_blocks(&f, &pair, 5).unwrap();
        for j in 3..=5 {
            assert!(blocks.entries()[j].max_abs() < 1e-10, "j = {j}");
        }
        assert!(blocks.entries()[0].max_abs() > 0.5);
        let low: Vec<Complex64> = (0..g.len()).map(|k| (0..3).map(|j| blocks.entries()[j].samples()[k]).sum()).collect();
        let err = GridFunction::new(g, low).unwrap().sub(&f).unwrap().max_abs();
        assert!(err < 1e-10);
    }

    #[test]
    fn sum_of_blocks_reproduces() {
        let g = rig();
        let pair = make_admissible_pair(Profile::PolynomialBump, None).unwrap();
        let f = gaussian(g, 0.3);
        assert!(partition_residual(&f, &pair, 8).unwrap() < 1e-10);
    }

    #[test]
    fn l2_besov_is_iterated_sum() {
        let g = rig();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let f = gaussian(g, 0.4);
        let w = make_weight(&WeightKind::ConstantS { s: 1.0 }, &g, 8).unwrap();
        let two = Exponent::constant(2.0).unwrap();
        let b = besov_norm(&f, &w, &two, &two, &pair).unwrap();
        let blocks = lp_blocks(&f, &pair, 8).unwrap();
        let direct: f64 = blocks
            .entries()
            .iter()
            .enumerate()
            .map(|(j, e)| 4f64.powi(j as i32) * e.abs().iter().map(|v| v * v).sum::<f64>() * g.spacing())
            .sum::<f64>()
            .sqrt();
        assert!((b.value - direct).abs() <= 1e-8 * direct);
        let t = tl_norm(&f, &w, &two, &two, &pair).unwrap();
        assert!((t.value - b.value).abs() <= 1e-8 * b.value);
        assert!(b.tail < 1e-6 * b.value);
        let zero = GridFunction::zeros(g);
        assert_eq!(besov_norm(&zero, &w, &two, &two, &pair).unwrap().value, 0.0);
    }

    #[test]
    fn besov_tracks_sobolev_proxy() {
        let g = rig();
        let w = make_weight(&WeightKind::ConstantS { s: 1.0 }, &g, 8).unwrap();
        let two = Exponent::constant(2.0).unwrap();
        for profile in [Profile::CosineBump, Profile::PolynomialBump] {
            let pair = make_admissible_pair(profile, None).unwrap();
            for s in [0.2, 0.5, 1.0, 1.4] {
                let f = gaussian(g, s);
                // ∫(1+ξ²)|f̂|² / 2π with f̂ = s√π e^{-s²ξ²/4}
                let proxy = (s * (PI / 2.0).sqrt() * (1.0 + 1.0 / (s * s))).sqrt();
                let r = besov_norm(&f, &w, &two, &two, &pair).unwrap().value / proxy;
                assert!((0.25..4.0).contains(&r), "{profile:?} s = {s}: {r}");
            }
        }
    }

    #[test]
    fn tl_rejects_unbounded_exponent() {
        let g = rig();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let w = make_weight(&WeightKind::ConstantS { s: 0.0 }, &g, 4).unwrap();
        let inf = Exponent::constant(f64::INFINITY).unwrap();
        let two = Exponent::constant(2.0).unwrap();
        assert!(tl_norm(&gaussian(g, 1.0), &w, &two, &inf, &pair).is_err());
    }

    #[test]
    fn peetre_examples() {
        let g = Grid::new(1, 8.0, 512).unwrap();
        let c = GridFunction::from_real_fn(g, |_| 2.5);
        let m = peetre_of_block(&c, 3, 2.0).unwrap();
        assert!(m.samples().iter().all(|z| (z.re - 2.5).abs() < 1e-15));
        let spike = GridFunction::from_real_fn(g, |x| if x[0] == 0.0 { 1.0 } else { 0.0 });
        let m = peetre_of_block(&spike, 2, 3.0).unwrap();
        for k in (0..g.len()).step_by(17) {
            let x = g.point(k)[0];
            let expect = 1.0 / (1.0 + (4.0 * x.abs()).powi(3));
            assert!((m.samples()[k].re - expect).abs() < 1e-14);
        }
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let f = gaussian(g, 0.3);
        let b = lp_blocks(&f, &pair, 2).unwrap();
        let m = peetre_maximal(&f, &pair, 2, 1.5).unwrap();
        assert!(m.abs().iter().zip(b.entries()[2].abs()).all(|(a, b)| *a >= b));
        assert!(peetre_of_block(&c, 1, 0.0).is_err());
    }

    #[test]
    fn identical_pairs_give_unit_ratio() {
        let g = Grid::new(1, 8.0, 1024).unwrap();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let w = make_weight(&WeightKind::ConstantS { s: 0.5 }, &g, 6).unwrap();
        let p = Exponent::constant(1.5).unwrap();
        let fam = vec![gaussian(g, 0.5), GridFunction::zeros(g), gaussian(g, 1.5)];
        let r = pair_independence_check(&fam, &pair, &pair, &w, &p, &p).unwrap();
        assert_eq!(r.excluded, 1);
        assert!(r.ratios.iter().all(|v| *v == 1.0));
        assert!(integrate(&fam[0]).re > 0.0);
    }
}
