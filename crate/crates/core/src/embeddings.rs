//! Nikolskii and Sobolev-type embeddings, plus the convolution bounds used for
//! atomic synthesis.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::atoms::{seq_norm_b, step_functions, verify_molecule, CoeffField, LocalFunction, MoleculeFamily};
use crate::error::{Error, Result};
use crate::exponent::{log_holder_local, make_weight, sigma, Exponent, WeightKind, WeightSequence};
use crate::fourier::Spectrum;
use crate::grid::{convolve, cube_index_range, cube_indicator, eta_kernel, norm, DyadicCube, Grid, GridFunction};
use crate::lp_analysis::{besov_norm, AdmissiblePair};
use crate::mixed::level_modular;
use crate::modular::lp_norm;
use crate::par;

/// Relative tolerance for the weight relations `w^0_j / w^1_j = 2^{j(...)}`.
pub const RELATION_TOL: f64 = 1e-9;

fn check_order(p0: &Exponent, p1: &Exponent, grid: &Grid) -> Result<()> {
    let (a, b) = (p0.samples(grid), p1.samples(grid));
    if let Some(k) = (0..a.len()).find(|&k| a[k] > b[k]) {
        return Err(Error::Precondition(format!(
            "need p0 <= p1, but p0 = {} > p1 = {} at {:?}",
            a[k],
            b[k],
            &grid.point(k)[..grid.dim()]
        )));
    }
    Ok(())
}

/// `n/p0(x) - n/p1(x)` per sample.
fn index_gap(p0: &Exponent, p1: &Exponent, grid: &Grid) -> Vec<f64> {
    let n = grid.dim() as f64;
    p0.recip_samples(grid).iter().zip(p1.recip_samples(grid)).map(|(a, b)| n * (a - b)).collect()
}

/// Level `j` of `lam` alone.
pub fn level_only(lam: &CoeffField, j: usize) -> CoeffField {
    let mut out = CoeffField::new(lam.n, j);
    out.entries = lam.level(j).map(|(m, v)| ((j, m), v)).collect();
    out
}

/// `(Σ_m λ_{jm} w_j χ_{jm}, Σ_m λ_{jm} w_j 2^{j(n/p0 - n/p1)} χ_{jm})`.
fn nikolskii_sides(lam: &CoeffField, j: usize, p0: &Exponent, p1: &Exponent, w: &WeightSequence) -> Result<(GridFunction, GridFunction)> {
    let grid = *w.grid();
    check_order(p0, p1, &grid)?;
    let steps = step_functions(&level_only(lam, j), w, [0.0, 0.0])?;
    let left = steps.entries()[j].clone();
    let gap = index_gap(p0, p1, &grid);
    let right = GridFunction::new(
        grid,
        left.samples().iter().zip(&gap).map(|(v, g)| v * 2f64.powf(j as f64 * g)).collect(),
    )?;
    Ok((left, right))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NikolskiiReport {
    pub j: usize,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, 0 when both vanish.
    pub ratio: f64,
}

/// Both sides of the level-`j` Nikolskii inequality in `L_{p1}` against `L_{p0}`.
pub fn nikolskii_constant_q(lam: &CoeffField, j: usize, p0: &Exponent, p1: &Exponent, w: &WeightSequence) -> Result<NikolskiiReport> {
    let (left, right) = nikolskii_sides(lam, j, p0, p1, w)?;
    let lhs = lp_norm(&left, p1)?;
    let rhs = lp_norm(&right, p0)?;
    let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(NikolskiiReport { j, lhs, rhs, ratio })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VariableNikolskiiReport {
    pub j: usize,
    pub c0: f64,
    /// `inf{μ : ρ_{p1}(c0 Σ λ w χ / μ^{1/q}) <= 1}`.
    pub left: f64,
    /// Same with `p0` and the `2^{j(n/p0 - n/p1)}` factor.
    pub right: f64,
    pub slack: f64,
    /// The right infimum exceeds 1, so the inequality makes no claim.
    pub skipped: bool,
    pub holds: bool,
}

fn check_q(q: &Exponent) -> Result<()> {
    if q.p_minus().is_infinite() {
        return Err(Error::Precondition("need q^- < ∞".into()));
    }
    Ok(())
}

/// `left <= right + 2^{-j}` for the given `c0`.
pub fn nikolskii_variable_q(
    lam: &CoeffField,
    j: usize,
    p0: &Exponent,
    p1: &Exponent,
    q: &Exponent,
    w: &WeightSequence,
    c0: f64,
) -> Result<VariableNikolskiiReport> {
    check_q(q)?;
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(Error::Domain(format!("c0 must lie in (0, 1], got {c0}")));
    }
    let (left_fn, right_fn) = nikolskii_sides(lam, j, p0, p1, w)?;
    let right = level_modular(&right_fn, p0, q)?;
    let left = level_modular(&left_fn.scale(c0), p1, q)?;
    let slack = 2f64.powi(-(j as i32));
    let skipped = right > 1.0;
    let holds = skipped || left <= right + slack;
    Ok(VariableNikolskiiReport { j, c0, left, right, slack, skipped, holds })
}

/// Largest `c0 ∈ (0, 1]` passing [`nikolskii_variable_q`] for one case; `None` when
/// the case is skipped.
pub fn largest_c0(lam: &CoeffField, j: usize, p0: &Exponent, p1: &Exponent, q: &Exponent, w: &WeightSequence) -> Result<Option<f64>> {
    let at = |c: f64| nikolskii_variable_q(lam, j, p0, p1, q, w, c);
    let top = at(1.0)?;
    if top.skipped {
        return Ok(None);
    }
    if top.holds {
        return Ok(Some(1.0));
    }
    // left side is increasing in c0
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        if at(mid)?.holds {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        return Err(Error::Numeric("no positive c0 satisfies the inequality".into()));
    }
    Ok(Some(lo))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct C0Calibration {
    /// Smallest per-case value; passes every case.
    pub c0: f64,
    pub per_case: Vec<Option<f64>>,
    pub skipped: usize,
}

/// Calibrate `c0` on `(λ, j)` cases.
pub fn calibrate_c0(cases: &[(CoeffField, usize)], p0: &Exponent, p1: &Exponent, q: &Exponent, w: &WeightSequence) -> Result<C0Calibration> {
    let per_case: Vec<Option<f64>> =
        par::map(cases.len(), |i| largest_c0(&cases[i].0, cases[i].1, p0, p1, q, w)).into_iter().collect::<Result<_>>()?;
    let skipped = per_case.iter().filter(|c| c.is_none()).count();
    let c0 = per_case.iter().flatten().cloned().fold(1.0, f64::min);
    Ok(C0Calibration { c0, per_case, skipped })
}

/// `w^0_j = w^1_j 2^{j(n/p0 - n/p1)}`, declared with the shifted class parameters.
pub fn sobolev_partner_weight(w1: &WeightSequence, p0: &Exponent, p1: &Exponent) -> Result<WeightSequence> {
    let grid = *w1.grid();
    check_order(p0, p1, &grid)?;
    let gap = index_gap(p0, p1, &grid);
    let lo = gap.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = gap.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let c_log = log_holder_local(&grid, &gap);
    let n = grid.dim();
    w1.rescaled(
        |j, x| {
            let k = grid.nearest(&x[..n]);
            2f64.powf(j as f64 * gap[k])
        },
        w1.alpha() + c_log,
        w1.alpha1() + lo,
        w1.alpha2() + hi,
        w1.c() * c_log.exp(),
    )
}

/// Largest relative deviation from `w^0_j / w^1_j = 2^{j(n/p0 - n/p1 + ε)}`.
fn relation_error(w0: &WeightSequence, w1: &WeightSequence, gap: &[f64], eps: &[f64]) -> Result<f64> {
    if w0.jmax() != w1.jmax() {
        return Err(Error::Precondition("weight sequences have different depths".into()));
    }
    w0.grid().check_same(w1.grid())?;
    let mut worst: f64 = 0.0;
    for j in 0..=w0.jmax() {
        for (k, (a, b)) in w0.level(j).iter().zip(w1.level(j)).enumerate() {
            let want = 2f64.powf(j as f64 * (gap[k] + eps[k]));
            worst = worst.max(((a / b) / want - 1.0).abs());
        }
    }
    Ok(worst)
}

fn check_sobolev_relation(w0: &WeightSequence, w1: &WeightSequence, p0: &Exponent, p1: &Exponent) -> Result<()> {
    let grid = *w1.grid();
    check_order(p0, p1, &grid)?;
    let gap = index_gap(p0, p1, &grid);
    let err = relation_error(w0, w1, &gap, &vec![0.0; gap.len()])?;
    if err > RELATION_TOL {
        return Err(Error::Precondition(format!("w0/w1 deviates from 2^{{j(n/p0 - n/p1)}} by {err:e}")));
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeqEmbedReport {
    /// `‖λ | b^{w1}_{p1,q}‖`.
    pub lhs: f64,
    /// `‖λ | b^{w0}_{p0,q}‖`.
    pub rhs: f64,
    pub ratio: f64,
    /// `3^{1/q^-} / c0`.
    pub bound: f64,
    pub holds: bool,
}

pub fn sobolev_seq_embed(
    lam: &CoeffField,
    p0: &Exponent,
    p1: &Exponent,
    q: &Exponent,
    w0: &WeightSequence,
    w1: &WeightSequence,
    c0: f64,
) -> Result<SeqEmbedReport> {
    check_sobolev_relation(w0, w1, p0, p1)?;
    if !(c0 > 0.0 && c0 <= 1.0) {
        return Err(Error::Domain(format!("c0 must lie in (0, 1], got {c0}")));
    }
    let bound = 3f64.powf(1.0 / q.p_minus()) / c0;
    if lam.is_zero() {
        return Ok(SeqEmbedReport { lhs: 0.0, rhs: 0.0, ratio: 0.0, bound, holds: true });
    }
    let lhs = seq_norm_b(lam, w1, p1, q)?.value;
    let rhs = seq_norm_b(lam, w0, p0, q)?.value;
    let ratio = lhs / rhs;
    Ok(SeqEmbedReport { lhs, rhs, ratio, bound, holds: ratio <= bound * (1.0 + 1e-9) })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolevGates {
    pub k: usize,
    pub l: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `σ_{p1^-}`.
    pub sigma_p1: f64,
    /// `c_log(1/q)`.
    pub clog_inv_q: f64,
    pub k_ok: bool,
    pub l_ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceEmbedReport {
    /// `‖f | B^{w1}_{p1,q1}‖ / ‖f | B^{w0}_{p0,q0}‖` per nonzero family member.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub min_ratio: f64,
}

fn ratios_over(family: &[GridFunction], num: impl Fn(&GridFunction) -> Result<f64> + Sync, den: impl Fn(&GridFunction) -> Result<f64> + Sync) -> Result<SpaceEmbedReport> {
    let ratios: Vec<Option<f64>> = par::map(family.len(), |i| {
        let f = &family[i];
        if f.is_zero() {
            return Ok(None);
        }
        Ok(Some(num(f)? / den(f)?))
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let ratios: Vec<f64> = ratios.into_iter().flatten().collect();
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let min_ratio = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(SpaceEmbedReport { ratios, max_ratio, min_ratio })
}

/// Gates `K > α_2` and `L > σ_{p1^-} - α_1 + c_log(1/q)` for `w1`.
pub fn sobolev_gates(k: usize, l: usize, w1: &WeightSequence, p1: &Exponent, q: &Exponent) -> Result<SobolevGates> {
    let grid = *w1.grid();
    let sigma_p1 = sigma(p1.p_minus(), p1.p_minus(), grid.dim())?;
    let clog_inv_q = log_holder_local(&grid, &q.recip_samples(&grid));
    let (alpha1, alpha2) = (w1.alpha1(), w1.alpha2());
    Ok(SobolevGates {
        k,
        l,
        alpha1,
        alpha2,
        sigma_p1,
        clog_inv_q,
        k_ok: k as f64 > alpha2,
        l_ok: l as f64 > sigma_p1 - alpha1 + clog_inv_q,
    })
}

/// `‖f | B^{w1}_{p1,q}‖ / ‖f | B^{w0}_{p0,q}‖` over `family`.
#[allow(clippy::too_many_arguments)]
pub fn sobolev_space_embed(
    family: &[GridFunction],
    p0: &Exponent,
    p1: &Exponent,
    q: &Exponent,
    w0: &WeightSequence,
    w1: &WeightSequence,
    pair: &AdmissiblePair,
    k: usize,
    l: usize,
) -> Result<(SobolevGates, SpaceEmbedReport)> {
    check_sobolev_relation(w0, w1, p0, p1)?;
    let gates = sobolev_gates(k, l, w1, p1, q)?;
    let report = ratios_over(family, |f| Ok(besov_norm(f, w1, p1, q, pair)?.value), |f| Ok(besov_norm(f, w0, p0, q, pair)?.value))?;
    Ok((gates, report))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpsEmbedReport {
    pub eps_minus: f64,
    pub eps_plus: f64,
    /// `ε^- > 0`; otherwise the run is a contrast case outside the hypothesis.
    pub in_hypothesis: bool,
    pub report: SpaceEmbedReport,
}

/// `‖f | B^{w1}_{p1,q1}‖ / ‖f | B^{w0}_{p0,q0}‖` where
/// `1 <= w^0_j / w^1_j = 2^{j(n/p0 - n/p1 + ε(x))}`.
#[allow(clippy::too_many_arguments)]
pub fn eps_embed_check(
    family: &[GridFunction],
    w0: &WeightSequence,
    w1: &WeightSequence,
    p0: &Exponent,
    p1: &Exponent,
    q0: &Exponent,
    q1: &Exponent,
    pair: &AdmissiblePair,
) -> Result<EpsEmbedReport> {
    let grid = *w1.grid();
    let gap = index_gap(p0, p1, &grid);
    if w0.jmax() == 0 {
        return Err(Error::Precondition("need at least one level above 0 to read off ε".into()));
    }
    let eps: Vec<f64> = w0.level(1).iter().zip(w1.level(1)).zip(&gap).map(|((a, b), g)| (a / b).log2() - g).collect();
    let err = relation_error(w0, w1, &gap, &eps)?;
    if err > RELATION_TOL {
        return Err(Error::Precondition(format!("w0/w1 is not of the form 2^{{j(n/p0 - n/p1 + ε(x))}} (deviation {err:e})")));
    }
    for j in 0..=w0.jmax() {
        if w0.level(j).iter().zip(w1.level(j)).any(|(a, b)| a / b < 1.0 - RELATION_TOL) {
            return Err(Error::Precondition(format!("w0/w1 drops below 1 at level {j}")));
        }
    }
    let eps_minus = eps.iter().cloned().fold(f64::INFINITY, f64::min);
    let eps_plus = eps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let report = ratios_over(family, |f| Ok(besov_norm(f, w1, p1, q1, pair)?.value), |f| Ok(besov_norm(f, w0, p0, q0, pair)?.value))?;
    Ok(EpsEmbedReport { eps_minus, eps_plus, in_hypothesis: eps_minus > 1e-12, report })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChiEtaReport {
    pub j: usize,
    pub m: [i64; 2],
    pub r: f64,
    /// `min_{x ∈ Q_{jm}} (η_{j,R} * χ_{jm})(x)`.
    pub constant: f64,
}

/// Lower constant in `χ_{jm} <= c^{-1} η_{j,R} * χ_{jm}`.
pub fn chi_eta_lower(grid: &Grid, j: usize, m: [i64; 2], r: f64) -> Result<ChiEtaReport> {
    let cube = DyadicCube::new(j as i32, m);
    let chi = cube_indicator(&cube, grid)?;
    let eta = eta_kernel(j as i32, r, grid)?;
    let conv = convolve(&eta, &chi)?;
    let constant = chi
        .samples()
        .iter()
        .zip(conv.samples())
        .filter(|(c, _)| c.re > 0.0)
        .map(|(_, v)| v.re)
        .fold(f64::INFINITY, f64::min);
    Ok(ChiEtaReport { j, m, r, constant })
}

/// Samples per molecule radius required by [`moment_molecule`].
pub const MOLECULE_SAMPLES: usize = 32;

/// `(1 - t²)^power` on `|t| < 1`.
fn poly_bump(t: f64, power: i32) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - t * t).powi(power)
    }
}

/// `D_1^L` of the bump `(1 - |x|²)^{K+L+2}` of radius `2^{-ν}/2` at `2^{-ν} m`, scaled to meet the
/// `(K, L, M)`-molecule bounds. Moments of order below `L` vanish and the order-`L`
/// moment does not.
pub fn moment_molecule(grid: &Grid, nu: usize, m: [i64; 2], k: usize, l: usize, big_m: f64) -> Result<LocalFunction> {
    let n = grid.dim();
    let h = grid.spacing();
    let cube = DyadicCube::new(nu as i32, m);
    let c = cube.center();
    let radius = 0.5 * cube.side();
    if radius < MOLECULE_SAMPLES as f64 * h {
        return Err(Error::Precondition(format!(
            "level {nu} molecule needs h <= {}, got {h}",
            radius / MOLECULE_SAMPLES as f64
        )));
    }
    let reach = (radius / h).ceil() as usize + l + 1;
    let np = grid.points_per_axis();
    let mut start = [0usize; 2];
    let mut shape = [1usize; 2];
    for a in 0..n {
        let center = grid.nearest_axis_index(c[a]);
        if center < reach || center + reach >= np {
            return Err(Error::Precondition(format!("molecule at level {nu}, m = {m:?} does not fit in the box")));
        }
        start[a] = center - reach;
        shape[a] = 2 * reach + 1;
    }
    let power = (k + l + 2) as i32;
    let mut samples = vec![Complex64::new(0.0, 0.0); shape[0] * shape[1]];
    for a0 in 0..shape[0] {
        for a1 in 0..shape[1] {
            let x = [grid.coord((start[0] + a0) as i64), if n == 2 { grid.coord((start[1] + a1) as i64) } else { 0.0 }];
            let d = [x[0] - c[0], x[1] - c[1]];
            samples[a0 * shape[1] + a1] = Complex64::new(poly_bump(norm(&d, n) / radius, power), 0.0);
        }
    }
    // L central differences along the first axis
    for _ in 0..l {
        let prev = samples.clone();
        for a0 in 0..shape[0] {
            for a1 in 0..shape[1] {
                let up = if a0 + 1 < shape[0] { prev[(a0 + 1) * shape[1] + a1] } else { Complex64::new(0.0, 0.0) };
                let down = if a0 > 0 { prev[(a0 - 1) * shape[1] + a1] } else { Complex64::new(0.0, 0.0) };
                samples[a0 * shape[1] + a1] = (up - down) / (2.0 * h);
            }
        }
    }
    let raw = LocalFunction::new(*grid, start, shape, samples)?;
    let report = verify_molecule(&raw, nu, m, k, l, big_m)?;
    Ok(raw.scale(1.0 / report.max_derivative_ratio))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayProbe {
    pub j: usize,
    pub nu: usize,
    pub m: [i64; 2],
    /// `max_x |φ_j * a_{νm}(x)|`.
    pub peak: f64,
    /// `max_x |φ_j * a_{νm}(x)| / envelope(x)`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoleculeDecayReport {
    pub probes: Vec<DecayProbe>,
    /// Largest probe ratio.
    pub constant: f64,
    /// Largest over smallest nonzero probe ratio.
    pub spread: f64,
    /// Least-squares slope of `log2 peak` against `ν - j` over probes with `ν > j`.
    pub slope: Option<f64>,
    /// `-(L + n)`.
    pub expected_slope: f64,
}

/// Compare `|φ_j * a_{νm}|` with the envelope for each `(j, member)` probe.
pub fn molecule_convolution_decay(pair: &AdmissiblePair, fam: &MoleculeFamily, levels: &[usize], big_n: f64) -> Result<MoleculeDecayReport> {
    let grid = fam.grid;
    let n = grid.dim();
    let (k, l, big_m) = (fam.k as f64, fam.l as f64, fam.big_m);
    if !(big_m > big_n + l + n as f64) {
        return Err(Error::Precondition(format!("need M > N + L + n, got M = {big_m}, N = {big_n}, L = {l}, n = {n}")));
    }
    let mut tasks = Vec::new();
    for (key, a) in &fam.members {
        for &j in levels {
            tasks.push((j, *key, a));
        }
    }
    let probes: Vec<DecayProbe> = par::map(tasks.len(), |i| {
        let (j, (nu, m), a) = tasks[i];
        let spectrum = Spectrum::new(&a.to_grid_function());
        let g = spectrum.filtered(|xi| Complex64::new(pair.level_hat(j, norm(xi, n)), 0.0));
        let c = DyadicCube::new(nu as i32, m).center();
        let mut peak: f64 = 0.0;
        let mut ratio: f64 = 0.0;
        for (idx, v) in g.samples().iter().enumerate() {
            let x = grid.point(idx);
            let dist = norm(&[x[0] - c[0], x[1] - c[1]], n);
            let env = if j <= nu {
                2f64.powf(-((nu - j) as f64) * (l + n as f64)) * (1.0 + 2f64.powi(j as i32) * dist).powf(-big_n)
            } else {
                2f64.powf(-((j - nu) as f64) * k) * (1.0 + 2f64.powi(nu as i32) * dist).powf(-big_m)
            };
            peak = peak.max(v.norm());
            ratio = ratio.max(v.norm() / env);
        }
        DecayProbe { j, nu, m, peak, ratio }
    });
    let constant = probes.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let smallest = probes.iter().map(|p| p.ratio).filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min);
    let spread = if smallest.is_finite() { constant / smallest } else { 1.0 };
    let pts: Vec<(f64, f64)> =
        probes.iter().filter(|p| p.nu > p.j && p.peak > 0.0).map(|p| ((p.nu - p.j) as f64, p.peak.log2())).collect();
    let slope = fit_slope(&pts);
    Ok(MoleculeDecayReport { probes, constant, spread, slope, expected_slope: -(l + n as f64) })
}

fn fit_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtaMaximalReport {
    pub j: usize,
    pub nu: usize,
    pub r: f64,
    pub t: f64,
    /// `sup_x lhs(x) / rhs(x)`.
    pub constant: f64,
}

/// `Σ_m |h_{νm}| (1 + 2^{min(ν,j)} |x - 2^{-ν} m|)^{-R}` against
/// `max{1, 2^{(ν-j)R}} (η_{ν,Rt} * |Σ_m h_{νm} χ_{νm}|^t)^{1/t}`.
pub fn eta_maximal_bound(h: &CoeffField, grid: &Grid, j: usize, nu: usize, r: f64, t: f64) -> Result<EtaMaximalReport> {
    let n = grid.dim();
    if !(t > 0.0 && t <= 1.0) {
        return Err(Error::Precondition(format!("need 0 < t <= 1, got {t}")));
    }
    if !(r > n as f64 / t) {
        return Err(Error::Precondition(format!("need R > n/t = {}, got {r}", n as f64 / t)));
    }
    let level = level_only(h, nu);
    if level.is_zero() {
        return Ok(EtaMaximalReport { j, nu, r, t, constant: 0.0 });
    }
    let unit = make_weight(&WeightKind::ConstantS { s: 0.0 }, grid, nu)?;
    let step = step_functions(&level, &unit, [0.0, 0.0])?.entries()[nu].clone();
    let powered = step.map(|v| Complex64::new(v.norm().powf(t), 0.0));
    let conv = convolve(&eta_kernel(nu as i32, r * t, grid)?, &powered)?;
    let factor = 2f64.powf((nu as f64 - j as f64) * r).max(1.0);
    let scale = 2f64.powi(nu.min(j) as i32);
    let entries: Vec<([i64; 2], f64)> = level.level(nu).map(|(m, v)| (m, v.norm())).collect();
    let side = 2f64.powi(-(nu as i32));
    let constant = (0..grid.len())
        .map(|idx| {
            let x = grid.point(idx);
            let lhs: f64 = entries
                .iter()
                .map(|(m, v)| {
                    let d = [x[0] - m[0] as f64 * side, x[1] - m[1] as f64 * side];
                    v * (1.0 + scale * norm(&d, n)).powf(-r)
                })
                .sum();
            let rhs = factor * conv.samples()[idx].re.max(0.0).powf(1.0 / t);
            if rhs > 0.0 {
                lhs / rhs
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max);
    Ok(EtaMaximalReport { j, nu, r, t, constant })
}

/// Random level-`j` coefficients: `1..=max_entries` entries on cubes with centers in
/// `[-reach, reach]^n`, magnitudes log-uniform in `[0.1, 10]`, random phases.
pub fn random_level_coeffs(rng: &mut impl Rng, grid: &Grid, j: usize, max_entries: usize, reach: f64) -> CoeffField {
    let n = grid.dim();
    let mut out = CoeffField::new(n, j);
    let range = cube_index_range(grid, j as i32);
    let lim = ((reach * 2f64.powi(j as i32)).floor() as i64).min(*range.end() - 1).max(0);
    let count = rng.gen_range(1..=max_entries.max(1));
    for _ in 0..count {
        let m = [rng.gen_range(-lim..=lim), if n == 2 { rng.gen_range(-lim..=lim) } else { 0 }];
        let mag = 10f64.powf(rng.gen_range(-1.0..1.0));
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        out.entries.insert((j, m), Complex64::from_polar(mag, phase));
    }
    out
}

/// Random coefficients on every level `0..=jmax`.
pub fn random_coeffs(rng: &mut impl Rng, grid: &Grid, jmax: usize, max_entries: usize, reach: f64) -> CoeffField {
    let mut out = CoeffField::new(grid.dim(), jmax);
    for j in 0..=jmax {
        out.entries.extend(random_level_coeffs(rng, grid, j, max_entries, reach).entries);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(1, 4.0, 1024).unwrap()
    }

    fn unit(g: &Grid, jmax: usize) -> WeightSequence {
        make_weight(&WeightKind::ConstantS { s: 0.0 }, g, jmax).unwrap()
    }

    #[test]
    fn nikolskii_constant_exponents_match_sequence_norms() {
        let g = grid();
        let w = unit(&g, 5);
        let p0 = Exponent::constant(1.0).unwrap();
        let p1 = Exponent::constant(2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for j in 0..=5 {
            let lam = random_level_coeffs(&mut rng, &g, j, 6, 2.0);
            let r = nikolskii_constant_q(&lam, j, &p0, &p1, &w).unwrap();
            // disjoint cubes: ratio is ‖λ‖_{ℓ2} / ‖λ‖_{ℓ1}
            let l1: f64 = lam.entries.values().map(|v| v.norm()).sum();
            let l2: f64 = lam.entries.values().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!((r.ratio - l2 / l1).abs() < 1e-8 * (l2 / l1), "j = {j}: {} vs {}", r.ratio, l2 / l1);
        }
        let same = nikolskii_constant_q(&random_level_coeffs(&mut rng, &g, 3, 5, 2.0), 3, &p1, &p1, &w).unwrap();
        assert!((same.ratio - 1.0).abs() < 1e-10);
        assert!(nikolskii_constant_q(&CoeffField::new(1, 2), 2, &p1, &p0, &w).is_err());
    }

    #[test]
    fn variable_nikolskii_trivial_and_constant_q() {
        let g = grid();
        let w = unit(&g, 4);
        let p0 = Exponent::constant(1.5).unwrap();
        let p1 = Exponent::constant(3.0).unwrap();
        let q = Exponent::constant(2.0).unwrap();
        let zero = nikolskii_variable_q(&CoeffField::new(1, 3), 3, &p0, &p1, &q, &w, 1.0).unwrap();
        assert!(zero.holds && zero.left == 0.0 && zero.right == 0.0);
        // constant q: infimum is ‖g‖^q, so left(c0 = 1) <= right reduces to the Nikolskii ratio <= 1
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lam = random_level_coeffs(&mut rng, &g, 2, 4, 2.0).scale(0.05);
        let v = nikolskii_variable_q(&lam, 2, &p0, &p1, &q, &w, 1.0).unwrap();
        let c = nikolskii_constant_q(&lam, 2, &p0, &p1, &w).unwrap();
        assert!((v.left - c.lhs.powi(2)).abs() < 1e-8 * v.left);
        assert!((v.right - c.rhs.powi(2)).abs() < 1e-8 * v.right);
    }

    #[test]
    fn chi_eta_oracle_and_translation() {
        let g = Grid::new(1, 8.0, 4096).unwrap();
        let r0 = chi_eta_lower(&g, 0, [0, 0], 2.0).unwrap();
        // ∫_0^1 (1+u)^{-2} du
        assert!((r0.constant - 0.5).abs() < g.spacing(), "{}", r0.constant);
        let a = chi_eta_lower(&g, 3, [0, 0], 2.0).unwrap();
        let b = chi_eta_lower(&g, 3, [5, 0], 2.0).unwrap();
        assert!((a.constant - b.constant).abs() < 1e-12);
        assert!((a.constant - r0.constant).abs() < 0.05 * r0.constant);
    }

    #[test]
    fn sobolev_seq_trivial_cases() {
        let g = grid();
        let w1 = unit(&g, 3);
        let p = Exponent::constant(2.0).unwrap();
        let q = Exponent::constant(1.0).unwrap();
        let w0 = sobolev_partner_weight(&w1, &p, &p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lam = random_coeffs(&mut rng, &g, 3, 3, 2.0);
        let r = sobolev_seq_embed(&lam, &p, &p, &q, &w0, &w1, 1.0).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-9);
        // single entry, constant exponents: ‖χ‖_{p1} 2^{...}/‖χ‖_{p0} = 1
        let p0 = Exponent::constant(1.0).unwrap();
        let w0 = sobolev_partner_weight(&w1, &p0, &p).unwrap();
        let mut single = CoeffField::new(1, 3);
        single.insert(2, [1, 0], Complex64::new(2.0, 0.0)).unwrap();
        let r = sobolev_seq_embed(&single, &p0, &p, &q, &w0, &w1, 1.0).unwrap();
        assert!((r.ratio - 1.0).abs() < 1e-8, "{}", r.ratio);
        assert!(sobolev_seq_embed(&single, &p0, &p, &q, &w1, &w1, 1.0).is_err());
    }

    #[test]
    fn molecule_moments_and_gate() {
        let g = Grid::new(1, 4.0, 2048).unwrap();
        let a = moment_molecule(&g, 2, [1, 0], 2, 2, 8.0).unwrap();
        assert!(verify_molecule(&a, 2, [1, 0], 2, 2, 8.0).unwrap().passed);
        let mut fam = MoleculeFamily { grid: g, k: 2, l: 2, big_m: 8.0, members: Default::default() };
        fam.members.insert((2, [1, 0]), a);
        assert!(moment_molecule(&g, 3, [1, 0], 2, 2, 8.0).is_err());
        let pair = crate::lp_analysis::make_admissible_pair(crate::lp_analysis::Profile::CosineBump, None).unwrap();
        assert!(molecule_convolution_decay(&pair, &fam, &[1], 6.0).is_err());
        let r = molecule_convolution_decay(&pair, &fam, &[1, 3], 2.0).unwrap();
        assert_eq!(r.probes.len(), 2);
        assert!(r.constant.is_finite() && r.constant > 0.0);
    }

    #[test]
    fn eta_maximal_gates_and_zero() {
        let g = grid();
        assert!(eta_maximal_bound(&CoeffField::new(1, 2), &g, 1, 2, 0.5, 1.0).is_err());
        assert!(eta_maximal_bound(&CoeffField::new(1, 2), &g, 1, 2, 2.0, 1.5).is_err());
        assert_eq!(eta_maximal_bound(&CoeffField::new(1, 2), &g, 1, 2, 2.0, 1.0).unwrap().constant, 0.0);
        let mut h = CoeffField::new(1, 2);
        h.insert(2, [0, 0], Complex64::new(1.0, 0.0)).unwrap();
        let r = eta_maximal_bound(&h, &g, 2, 2, 2.0, 1.0).unwrap();
        assert!(r.constant > 0.0 && r.constant.is_finite());
    }
}
