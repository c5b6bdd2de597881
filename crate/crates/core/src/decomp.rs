//! Reproducing systems, atomic analysis and synthesis, and convergence measurements.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::atoms::{central_differences, seq_norm, verify_atom, AtomFamily, CoeffField, CubeKey, Family, LocalFunction};
use crate::error::{Error, Result};
use crate::exponent::{log_holder_local, sigma, Exponent, WeightSequence};
use crate::fourier::{filter_transform, for_each_frequency, nyquist, padded_len, Spectrum};
use crate::grid::{cubes_at_level, integrate, multi_indices, norm, schwartz_seminorm, Grid, GridFunction};
use crate::lp_analysis::{smooth_step, space_norm_of, AdmissiblePair, SpaceKind};
use crate::par;

/// Relative size `|φ̂_j| / max|φ̂_j|` required on the band of level `j`.
pub const POSITIVITY_FLOOR: f64 = 1e-3;
const RADIUS_MARGIN: f64 = 0.999;
/// The δ search starts at `2/σ` and halves down to this fraction of it.
const SMALLEST_DELTA: f64 = 1.0 / 64.0;

/// `1` on `[0, 1]`, strictly decreasing on `(1, 2)`, `0` from 2 on.
fn cutoff(t: f64) -> f64 {
    1.0 - smooth_step(t - 1.0)
}

fn bump(t: f64) -> f64 {
    if t >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

/// Filter taps on lattice offsets `[-radius, radius]^n`, row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Taps {
    pub radius: usize,
    pub values: Vec<f64>,
}

impl Taps {
    fn side(&self) -> usize {
        2 * self.radius + 1
    }
}

/// Discrete counterpart of `φ_0, φ_j = 2^{jn}φ(2^j·), ψ_0, ψ_j`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReproducingSystem {
    pub grid: Grid,
    pub l: usize,
    pub sigma: f64,
    pub delta: f64,
    pub jmax: usize,
    /// Bump radius behind `φ` (before dilation).
    pub radius: f64,
    /// Smallest `|φ̂_j| / max|φ̂_j|` over the band of each level.
    pub positivity: Vec<f64>,
    pub taps: Vec<Taps>,
}

fn laplacian_power(values: &mut Vec<f64>, side: usize, n: usize, k: usize, h: f64) {
    for _ in 0..k {
        let prev = values.clone();
        let at = |a: isize, b: isize| -> f64 {
            if a < 0 || b < 0 || a as usize >= side || (n == 2 && b as usize >= side) {
                0.0
            } else if n == 1 {
                prev[a as usize]
            } else {
                prev[a as usize * side + b as usize]
            }
        };
        let rows = side;
        let cols = if n == 1 { 1 } else { side };
        for a in 0..rows as isize {
            for b in 0..cols as isize {
                let c = at(a, b);
                let mut v = 2.0 * c - at(a - 1, b) - at(a + 1, b);
                if n == 2 {
                    v += 2.0 * c - at(a, b - 1) - at(a, b + 1);
                }
                values[a as usize * cols + b as usize] = v / (h * h);
            }
        }
    }
}

fn level_taps(grid: &Grid, j: usize, bump_radius: f64, k: usize) -> Taps {
    let h = grid.spacing();
    let n = grid.dim();
    let scale = 2f64.powi(j as i32);
    let radius = (bump_radius / scale / h).floor() as usize + k + 1;
    let side = 2 * radius + 1;
    let len = side.pow(n as u32);
    let mut values = vec![0.0; len];
    for (idx, v) in values.iter_mut().enumerate() {
        let (a, b) = if n == 1 { (idx, radius) } else { (idx / side, idx % side) };
        let z = [(a as f64 - radius as f64) * h, (b as f64 - radius as f64) * h];
        *v = bump(norm(&z, n) * scale / bump_radius);
    }
    laplacian_power(&mut values, side, n, k, h);
    let amp = scale.powi(n as i32) * 2f64.powi(-2 * (k * j) as i32);
    values.iter_mut().for_each(|v| *v *= amp);
    Taps { radius, values }
}

impl ReproducingSystem {
    /// `φ̂_j` at the padded frequencies.
    pub fn phi_hat(&self, j: usize) -> Vec<Complex64> {
        filter_transform(&self.grid, self.taps[j].radius, &self.taps[j].values)
    }

    /// Partition profile `Θ_j` at radius `r`; `Σ_{j<=J} Θ_j(r) = g(2^{-J} r / δ)`.
    pub fn theta(&self, j: usize, r: f64) -> f64 {
        let t = r / self.delta;
        if j == 0 {
            cutoff(t)
        } else {
            let s = 0.5f64.powi(j as i32) * t;
            cutoff(s) - cutoff(2.0 * s)
        }
    }

    /// `ψ̂_j = (2π)^n Θ_j / φ̂_j` where `Θ_j > 0`, zero elsewhere.
    pub fn psi_hat(&self, j: usize) -> Vec<Complex64> {
        let phi = self.phi_hat(j);
        let c = (2.0 * PI).powi(self.grid.dim() as i32);
        let n = self.grid.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); padded_len(&self.grid)];
        for_each_frequency(&self.grid, |k, xi| {
            let th = self.theta(j, norm(xi, n));
            if th > 0.0 {
                out[k] = c * th / phi[k];
            }
        });
        out
    }

    /// `d = 1 + 2σ`.
    pub fn atom_dilation(&self) -> f64 {
        1.0 + 2.0 * self.sigma
    }

    /// `max_{j, |β| <= K} sup |D^β φ_j| / 2^{j(n + |β|)}` with the validators'
    /// difference operator.
    pub fn c_k_phi(&self, k: usize) -> f64 {
        let n = self.grid.dim();
        let h = self.grid.spacing();
        let mut best: f64 = 0.0;
        for (j, t) in self.taps.iter().enumerate() {
            // pad by K so the differences see the zero extension
            let side = t.side() + 2 * k;
            let shape = if n == 1 { [side, 1] } else { [side, side] };
            let mut padded = vec![Complex64::new(0.0, 0.0); shape[0] * shape[1]];
            for (idx, v) in t.values.iter().enumerate() {
                let (a, b) = if n == 1 { (idx, 0) } else { (idx / t.side(), idx % t.side()) };
                let pos = if n == 1 { a + k } else { (a + k) * side + b + k };
                padded[pos] = Complex64::new(*v, 0.0);
            }
            for gamma in multi_indices(n, k) {
                let order = (gamma[0] + gamma[1]) as i32;
                let d = central_differences(&padded, shape, n, h, gamma);
                let sup = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
                best = best.max(sup / 2f64.powi(j as i32 * (n as i32 + order)));
            }
        }
        best
    }

    /// `h^n Σ_x x^β φ_j(x)` for `|β| < L`, largest magnitude relative to `h^n Σ|φ_j|`.
    pub fn max_relative_moment(&self, j: usize) -> f64 {
        let n = self.grid.dim();
        let h = self.grid.spacing();
        let t = &self.taps[j];
        let side = t.side();
        let l1: f64 = t.values.iter().map(|v| v.abs()).sum();
        if self.l == 0 || l1 == 0.0 {
            return 0.0;
        }
        let scale = 2f64.powi(j as i32);
        multi_indices(n, self.l - 1)
            .into_iter()
            .map(|beta| {
                let s: f64 = t
                    .values
                    .iter()
                    .enumerate()
                    .map(|(idx, v)| {
                        let (a, b) = if n == 1 { (idx, t.radius) } else { (idx / side, idx % side) };
                        let x = (a as f64 - t.radius as f64) * h * scale;
                        let y = (b as f64 - t.radius as f64) * h * scale;
                        v * x.powi(beta[0] as i32) * if n == 2 { y.powi(beta[1] as i32) } else { 1.0 }
                    })
                    .sum();
                s.abs() / l1
            })
            .fold(0.0, f64::max)
    }

    /// `(2π)^{-n} (φ_0*ψ_0*f + Σ_{j<=Jmax} φ_j*ψ_j*f)`, both convolutions taken on the
    /// padded domain.
    pub fn reproduce(&self, f: &GridFunction) -> Result<GridFunction> {
        self.grid.check_same(f.grid())?;
        let spectrum = Spectrum::new(f);
        let c = (2.0 * PI).powi(-(self.grid.dim() as i32));
        let levels = par::map(self.jmax + 1, |j| {
            let m: Vec<Complex64> = self.phi_hat(j).iter().zip(self.psi_hat(j)).map(|(a, b)| a * b * c).collect();
            spectrum.filtered_by(&m)
        });
        let mut out = GridFunction::zeros(self.grid);
        for lv in &levels {
            out.axpy(Complex64::new(1.0, 0.0), lv)?;
        }
        Ok(out)
    }

    /// Largest `|(2π)^{-n} Σ_j φ̂_j ψ̂_j - 1|` over `|ξ| <= 2^{Jmax} δ`.
    pub fn partition_residual(&self) -> f64 {
        let c = (2.0 * PI).powi(-(self.grid.dim() as i32));
        let mut sum = vec![Complex64::new(0.0, 0.0); padded_len(&self.grid)];
        for j in 0..=self.jmax {
            let (a, b) = (self.phi_hat(j), self.psi_hat(j));
            for k in 0..sum.len() {
                sum[k] += a[k] * b[k] * c;
            }
        }
        let band = 2f64.powi(self.jmax as i32) * self.delta;
        let n = self.grid.dim();
        let mut worst: f64 = 0.0;
        for_each_frequency(&self.grid, |k, xi| {
            if norm(xi, n) <= band {
                worst = worst.max((sum[k] - 1.0).norm());
            }
        });
        worst
    }
}

/// Build the discrete reproducing system for moment order `L`, support radius `σ`
/// and levels `0..=Jmax`.
pub fn make_reproducing_system(l: usize, sigma: f64, jmax: usize, grid: &Grid) -> Result<ReproducingSystem> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("σ must be positive, got {sigma}")));
    }
    let h = grid.spacing();
    if h > 2f64.powi(-(jmax as i32)) / 4.0 {
        let need = (2.0 * grid.half_width() * 4.0 * 2f64.powi(jmax as i32)).log2().ceil().exp2() as usize;
        return Err(Error::Precondition(format!(
            "grid spacing {h} does not resolve level {jmax}: need at least N = {need} samples per axis"
        )));
    }
    let k = l.div_ceil(2);
    let radius = RADIUS_MARGIN * (sigma - k as f64 * h * 2f64.powi(jmax as i32));
    if radius <= 0.0 {
        return Err(Error::Construction(format!("σ = {sigma} leaves no room for {k} difference steps at level {jmax}")));
    }
    let level0 = level_taps(grid, 0, RADIUS_MARGIN * sigma, 0);
    if level0.radius >= grid.points_per_axis() {
        return Err(Error::Precondition(format!("σ = {sigma} exceeds the box")));
    }
    let mut taps = vec![level0];
    for j in 1..=jmax {
        taps.push(level_taps(grid, j, radius, k));
    }
    let n = grid.dim();
    let mut delta = (2.0 / sigma).min(nyquist(grid) / 2f64.powi(jmax as i32 + 1));
    while delta >= SMALLEST_DELTA * (2.0 / sigma) {
        let mut sys = ReproducingSystem { grid: *grid, l, sigma, delta, jmax, radius, positivity: Vec::new(), taps: taps.clone() };
        let mut ok = true;
        for j in 0..=jmax {
            let phi = sys.phi_hat(j);
            let (lo, hi) = if j == 0 { (0.0, 2.0 * delta) } else { (2f64.powi(j as i32 - 1) * delta, 2f64.powi(j as i32 + 1) * delta) };
            let (mut mn, mut mx) = (f64::INFINITY, 0.0f64);
            for_each_frequency(grid, |kk, xi| {
                let r = norm(xi, n);
                if r >= lo && r <= hi {
                    let v = phi[kk].norm();
                    mn = mn.min(v);
                    mx = mx.max(v);
                }
            });
            let ratio = if mx > 0.0 { mn / mx } else { 0.0 };
            sys.positivity.push(ratio);
            if !(ratio > POSITIVITY_FLOOR) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(sys);
        }
        delta *= 0.5;
    }
    Err(Error::Construction(format!(
        "no δ >= {} gives a positivity annulus for σ = {sigma}, L = {l} on this grid",
        SMALLEST_DELTA * 2.0 / sigma
    )))
}

/// `(λ(f), atoms)`: `λ_{jm} = C_{K,Φ} max_{Q_{jm}} |ψ_j*f|` and
/// `a_{jm} = (2π)^{-n}/λ_{jm} · h^n Σ_{y ∈ Q_{jm}} φ_j(· - y)(ψ_j*f)(y)`.
///
/// Cubes whose atom would reach past the box are left out.
pub fn analyze(f: &GridFunction, sys: &ReproducingSystem, k: usize, jmax: usize) -> Result<(CoeffField, AtomFamily)> {
    let grid = sys.grid;
    grid.check_same(f.grid())?;
    if jmax > sys.jmax {
        return Err(Error::Precondition(format!("system only reaches level {}", sys.jmax)));
    }
    f.check_decay()?;
    let n = grid.dim();
    let hn = grid.cell_volume();
    let ckphi = sys.c_k_phi(k);
    let norm_c = (2.0 * PI).powi(-(n as i32));
    let spectrum = Spectrum::new(f);
    let np = grid.points_per_axis();
    let d = sys.atom_dilation();
    let levels = par::map(jmax + 1, |j| {
        let g = spectrum.filtered_by(&sys.psi_hat(j));
        let gs = g.samples();
        let taps = &sys.taps[j];
        let (r, side) = (taps.radius, taps.side());
        let mut out: Vec<(CubeKey, f64, LocalFunction)> = Vec::new();
        for cube in cubes_at_level(&grid, j as i32) {
            let closed: Vec<_> = (0..n).map(|a| cube.closed_axis_range(&grid, a)).collect();
            let c1 = if n == 2 { closed[1].clone() } else { 0..1 };
            let mut sup: f64 = 0.0;
            for a in closed[0].clone() {
                for b in c1.clone() {
                    sup = sup.max(gs[grid.flatten([a, b])].norm());
                }
            }
            let lam = ckphi * sup;
            if lam == 0.0 {
                continue;
            }
            let w0 = cube.half_open_axis_range(&grid, 0);
            let w1 = if n == 2 { cube.half_open_axis_range(&grid, 1) } else { 0..1 };
            if w0.is_empty() || w1.is_empty() {
                continue;
            }
            let inside = |w: &std::ops::Range<usize>| w.start >= r && w.end + r <= np;
            if !inside(&w0) || (n == 2 && !inside(&w1)) {
                continue;
            }
            let (s0, e0) = (w0.start - r, w0.end + r);
            let (s1, e1) = if n == 2 { (w1.start - r, w1.end + r) } else { (0, 1) };
            let shape = [e0 - s0, e1 - s1];
            let mut samples = vec![Complex64::new(0.0, 0.0); shape[0] * shape[1]];
            let scale = norm_c / lam * hn;
            for x0 in s0..e0 {
                for x1 in s1..e1 {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for y0 in w0.clone() {
                        let o0 = x0 as isize - y0 as isize + r as isize;
                        if o0 < 0 || o0 as usize >= side {
                            continue;
                        }
                        if n == 1 {
                            acc += gs[y0] * taps.values[o0 as usize];
                        } else {
                            for y1 in w1.clone() {
                                let o1 = x1 as isize - y1 as isize + r as isize;
                                if o1 < 0 || o1 as usize >= side {
                                    continue;
                                }
                                acc += gs[grid.flatten([y0, y1])] * taps.values[o0 as usize * side + o1 as usize];
                            }
                        }
                    }
                    samples[(x0 - s0) * shape[1] + (x1 - s1)] = acc * scale;
                }
            }
            let mut atom = LocalFunction { grid, start: [s0, s1], shape, samples };
            // discretization can overshoot the derivative bound; keep λ·a fixed
            let mut lam = lam;
            let report = verify_atom(&atom, j, cube.m, k, 0, d).expect("level resolved");
            if report.max_derivative_ratio > report.slack {
                atom = atom.scale(1.0 / report.max_derivative_ratio);
                lam *= report.max_derivative_ratio;
            }
            out.push(((j, cube.m), lam, atom));
        }
        out
    });
    let mut coeffs = CoeffField::new(n, jmax);
    let mut members = BTreeMap::new();
    for level in levels {
        for (key, lam, atom) in level {
            coeffs.insert(key.0, key.1, Complex64::new(lam, 0.0))?;
            members.insert(key, atom);
        }
    }
    Ok((coeffs, AtomFamily { grid, k, l: sys.l, d: sys.atom_dilation(), members }))
}

/// `Σ_{j <= Jcut} Σ_{|m|_∞ <= Mcut} λ_{jm} a_{jm}`.
pub fn synthesize<F: Family>(lam: &CoeffField, fam: &F, jcut: usize, mcut: Option<i64>) -> Result<GridFunction> {
    let grid = *fam.grid();
    let keys: Vec<(&CubeKey, &Complex64)> = lam
        .entries
        .iter()
        .filter(|((j, m), _)| *j <= jcut && mcut.is_none_or(|c| m[0].abs().max(m[1].abs()) <= c))
        .collect();
    for (key, _) in &keys {
        if fam.member(key).is_none() {
            return Err(Error::Data(format!("no family member for cube {key:?}")));
        }
    }
    let top = keys.iter().map(|(k, _)| k.0).max().map_or(0, |j| j + 1);
    let partial = par::map(top, |j| {
        let mut acc = GridFunction::zeros(grid);
        for (key, v) in keys.iter().filter(|(k, _)| k.0 == j) {
            fam.member(key).expect("checked above").add_into(&mut acc, **v);
        }
        acc
    });
    let mut out = GridFunction::zeros(grid);
    for p in &partial {
        out.axpy(Complex64::new(1.0, 0.0), p)?;
    }
    Ok(out)
}

/// Parameter gates for the synthesis bound, with the quantities they use.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GateReport {
    pub kind: SpaceKind,
    pub k: usize,
    pub l: usize,
    pub big_m: Option<f64>,
    pub alpha: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// `σ_{p^-}`.
    pub sigma_p: f64,
    /// `σ_{p^-,q^-}`.
    pub sigma_pq: f64,
    pub clog_inv_p: f64,
    pub clog_inv_q: f64,
    pub k_ok: bool,
    pub l_ok: bool,
    pub m_ok: bool,
    pub met: bool,
    pub failures: Vec<String>,
}

/// Check `K > α_2`, the `L` bound and (for molecules) the `M` bound.
pub fn synthesis_gates(k: usize, l: usize, big_m: Option<f64>, w: &WeightSequence, p: &Exponent, q: &Exponent, kind: SpaceKind) -> Result<GateReport> {
    let grid = *w.grid();
    let n = grid.dim();
    let sigma_p = sigma(p.p_minus(), p.p_minus(), n)?;
    let sigma_pq = sigma(p.p_minus(), q.p_minus(), n)?;
    let clog_inv_p = log_holder_local(&grid, &p.recip_samples(&grid));
    let clog_inv_q = log_holder_local(&grid, &q.recip_samples(&grid));
    let (alpha, alpha1, alpha2) = (w.alpha(), w.alpha1(), w.alpha2());
    let (lb, mb) = match kind {
        SpaceKind::B => (
            sigma_p - alpha1 + clog_inv_q,
            l as f64 + 2.0 * n as f64 + 2.0 * alpha + (2.0 * clog_inv_p).max(1.0) * sigma_p + clog_inv_q,
        ),
        SpaceKind::F => (sigma_pq - alpha1, l as f64 + 2.0 * n as f64 + 2.0 * alpha + (2.0 * clog_inv_p).max(1.0) * sigma_pq),
    };
    let k_ok = k as f64 > alpha2;
    let l_ok = l as f64 > lb;
    let m_ok = big_m.is_none_or(|m| m > mb);
    let mut failures = Vec::new();
    if !k_ok {
        failures.push(format!("K = {k} must exceed α2 = {alpha2}"));
    }
    if !l_ok {
        failures.push(format!("L = {l} must exceed {lb}"));
    }
    if !m_ok {
        failures.push(format!("M = {} must exceed {mb}", big_m.unwrap_or(0.0)));
    }
    if kind == SpaceKind::F && (p.p_plus().is_infinite() || q.p_plus().is_infinite()) {
        failures.push("F-spaces need p^+, q^+ < ∞".into());
    }
    Ok(GateReport {
        kind,
        k,
        l,
        big_m,
        alpha,
        alpha1,
        alpha2,
        sigma_p,
        sigma_pq,
        clog_inv_p,
        clog_inv_q,
        k_ok,
        l_ok,
        m_ok,
        met: failures.is_empty(),
        failures,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub gates: GateReport,
    pub space_norm: f64,
    pub seq_norm: f64,
    /// `‖Σ λ a | A‖ / ‖λ | a‖`, 0 for `λ = 0`.
    pub ratio: f64,
}

pub fn synthesis_bound_check<F: Family>(
    lam: &CoeffField,
    fam: &F,
    w: &WeightSequence,
    p: &Exponent,
    q: &Exponent,
    kind: SpaceKind,
    pair: &AdmissiblePair,
) -> Result<SynthesisReport> {
    let gates = synthesis_gates(fam.smoothness(), fam.moments(), fam.decay(), w, p, q, kind)?;
    if kind == SpaceKind::F && !gates.met && (p.p_plus().is_infinite() || q.p_plus().is_infinite()) {
        return Ok(SynthesisReport { gates, space_norm: f64::NAN, seq_norm: f64::NAN, ratio: f64::NAN });
    }
    if lam.is_zero() {
        return Ok(SynthesisReport { gates, space_norm: 0.0, seq_norm: 0.0, ratio: 0.0 });
    }
    let g = synthesize(lam, fam, lam.jmax, None)?;
    let space_norm = space_norm_of(&g, w, p, q, pair, kind)?.value;
    let seq = seq_norm(lam, w, p, q, kind)?.value;
    Ok(SynthesisReport { gates, space_norm, seq_norm: seq, ratio: space_norm / seq })
}

/// Per-level partial sums `f_j = Σ_m λ_{jm} a_{jm}`, `j = 0..=Jmax`.
pub fn level_sums<F: Family>(lam: &CoeffField, fam: &F) -> Result<Vec<GridFunction>> {
    let levels = par::map(lam.jmax + 1, |j| {
        let mut single = CoeffField::new(lam.n, lam.jmax);
        single.entries = lam.entries.iter().filter(|(k, _)| k.0 == j).map(|(k, v)| (*k, *v)).collect();
        synthesize(&single, fam, j, None)
    });
    levels.into_iter().collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailReport {
    /// `‖Σ_{j>T} Σ_m λ_{jm} a_{jm} | A‖` for `T = 0..=Jmax`.
    pub tails: Vec<f64>,
    pub nonincreasing: bool,
    /// `p^+, q^+ < ∞`.
    pub in_hypothesis: bool,
}

pub const TAIL_TOL: f64 = 1e-10;

pub fn tail_in_space<F: Family>(
    lam: &CoeffField,
    fam: &F,
    w: &WeightSequence,
    p: &Exponent,
    q: &Exponent,
    kind: SpaceKind,
    pair: &AdmissiblePair,
) -> Result<TailReport> {
    let levels = level_sums(lam, fam)?;
    let grid = *fam.grid();
    let jmax = lam.jmax;
    let mut tails = vec![0.0; jmax + 1];
    let mut acc = GridFunction::zeros(grid);
    for t in (0..jmax).rev() {
        acc.axpy(Complex64::new(1.0, 0.0), &levels[t + 1])?;
        tails[t] = if acc.is_zero() { 0.0 } else { space_norm_of(&acc, w, p, q, pair, kind)?.value };
    }
    let nonincreasing = tails.windows(2).all(|v| v[1] <= v[0] * (1.0 + TAIL_TOL) + TAIL_TOL * tails[0]);
    Ok(TailReport { tails, nonincreasing, in_hypothesis: p.p_plus().is_finite() && q.p_plus().is_finite() })
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DensityRow {
    pub terms: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityTable {
    pub rows: Vec<DensityRow>,
    pub total_terms: usize,
}

/// Cube order used by [`density_demo`]: by `j + |m|_∞`, then `j`, then `m`.
pub fn diagonal_order(lam: &CoeffField) -> Vec<CubeKey> {
    let mut keys: Vec<CubeKey> = lam.entries.keys().copied().collect();
    keys.sort_by_key(|(j, m)| (*j as i64 + m[0].abs().max(m[1].abs()), *j, *m));
    keys
}

/// `‖f - Σ_{first t terms} λ a | A‖` at `t = 0, 1, 2, 4, …, total`.
#[allow(clippy::too_many_arguments)]
pub fn density_demo(
    f: &GridFunction,
    sys: &ReproducingSystem,
    k: usize,
    w: &WeightSequence,
    p: &Exponent,
    q: &Exponent,
    kind: SpaceKind,
    pair: &AdmissiblePair,
) -> Result<DensityTable> {
    if p.p_plus().is_infinite() || q.p_plus().is_infinite() {
        return Err(Error::Precondition("density needs p^+, q^+ < ∞".into()));
    }
    let (lam, fam) = analyze(f, sys, k, sys.jmax)?;
    let order = diagonal_order(&lam);
    let total = order.len();
    let mut marks = vec![0usize];
    let mut t = 1;
    while t < total {
        marks.push(t);
        t *= 2;
    }
    if total > 0 {
        marks.push(total);
    }
    let mut rows = Vec::new();
    let mut partial = GridFunction::zeros(*f.grid());
    let mut done = 0;
    for &mark in &marks {
        while done < mark {
            let key = order[done];
            fam.members[&key].add_into(&mut partial, lam.entries[&key]);
            done += 1;
        }
        let diff = f.sub(&partial)?;
        let distance = if diff.is_zero() { 0.0 } else { space_norm_of(&diff, w, p, q, pair, kind)?.value };
        rows.push(DensityRow { terms: mark, distance });
    }
    Ok(DensityTable { rows, total_terms: total })
}

/// Largest Schwartz seminorm order supported by the finite-difference proxy.
pub const MAX_SEMINORM_ORDER: usize = 4;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PairingReport {
    /// `|⟨Σ_{j>T} f_j, φ⟩|` for `T = 0..=Jmax`.
    pub tail_pairings: Vec<f64>,
    pub decaying: bool,
    /// `∫ Σ_m |λ_{jm}| |a_{jm}| |φ|` per level.
    pub level_integrals: Vec<f64>,
    /// `max_j` of the level integral over `2^{-j(α1 - n/p^-)} ‖λ | b_{p,∞}‖ 𝔭_N(φ)`.
    pub constant: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SPrimeReport {
    pub seminorm_order: usize,
    /// The order `n + 2 + ⌊α⌋` was reduced to [`MAX_SEMINORM_ORDER`].
    pub order_capped: bool,
    pub lambda_norm: f64,
    pub per_test: Vec<PairingReport>,
}

pub fn sprime_tail_diagnostic<F: Family>(
    lam: &CoeffField,
    fam: &F,
    tests: &[GridFunction],
    w: &WeightSequence,
    p: &Exponent,
) -> Result<SPrimeReport> {
    let grid = *fam.grid();
    let n = grid.dim();
    let wanted = n + 2 + w.alpha().floor() as usize;
    let order = wanted.min(MAX_SEMINORM_ORDER);
    let inf = Exponent::constant(f64::INFINITY)?;
    let lambda_norm = seq_norm(lam, w, p, &inf, SpaceKind::B)?.value;
    let levels = level_sums(lam, fam)?;
    // Σ_m |λ_{jm}| |a_{jm}| per level
    let abs_levels: Vec<Vec<f64>> = par::map(lam.jmax + 1, |j| {
        let mut acc = vec![0.0; grid.len()];
        for ((jj, m), v) in &lam.entries {
            if *jj != j {
                continue;
            }
            let a = fam.member(&(j, *m)).expect("synthesized above");
            for s0 in 0..a.shape[0] {
                for s1 in 0..a.shape[1] {
                    let k = grid.flatten([a.start[0] + s0, a.start[1] + s1]);
                    acc[k] += v.norm() * a.samples[s0 * a.shape[1] + s1].norm();
                }
            }
        }
        acc
    });
    let exponent = w.alpha1() - n as f64 / p.p_minus();
    let mut per_test = Vec::new();
    for phi in tests {
        grid.check_same(phi.grid())?;
        let seminorm = schwartz_seminorm(phi, order)?;
        let pair_with = |g: &GridFunction| integrate(&g.zip_with(phi, |a, b| a * b.conj()).expect("same grid")).norm();
        let jmax = lam.jmax;
        let mut tail_pairings = vec![0.0; jmax + 1];
        let mut acc = GridFunction::zeros(grid);
        for t in (0..jmax).rev() {
            acc.axpy(Complex64::new(1.0, 0.0), &levels[t + 1])?;
            tail_pairings[t] = pair_with(&acc);
        }
        let phi_abs = phi.abs();
        let level_integrals: Vec<f64> = abs_levels
            .iter()
            .map(|lv| lv.iter().zip(&phi_abs).map(|(a, b)| a * b).sum::<f64>() * grid.cell_volume())
            .collect();
        let denom = |j: usize| 2f64.powf(-(j as f64) * exponent) * lambda_norm * seminorm;
        let constant = level_integrals
            .iter()
            .enumerate()
            .map(|(j, v)| if *v == 0.0 { 0.0 } else { v / denom(j) })
            .fold(0.0, f64::max);
        let scale = tail_pairings[0].max(f64::MIN_POSITIVE);
        let decaying = tail_pairings.last().copied().unwrap_or(0.0) <= 1e-12 * scale
            && tail_pairings.windows(2).filter(|v| v[1] > v[0] * (1.0 + 1e-9)).count() <= tail_pairings.len() / 3;
        per_test.push(PairingReport { tail_pairings, decaying, level_integrals, constant });
    }
    Ok(SPrimeReport { seminorm_order: order, order_capped: wanted > order, lambda_norm, per_test })
}

/// Seeded test functions `exp(-(x-c)²/s²) cos(k x_1)` with `s ∈ [0.01, 0.1]`,
/// `c ∈ [-2, 2]^n`, `k ∈ [0, 40]`.
pub fn standard_family(grid: &Grid, seed: u64, count: usize) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.dim();
    (0..count)
        .map(|_| {
            let s: f64 = rng.gen_range(0.01..0.1);
            let c = [rng.gen_range(-2.0..2.0), if n == 2 { rng.gen_range(-2.0..2.0) } else { 0.0 }];
            let k: f64 = rng.gen_range(0.0..40.0);
            GridFunction::from_real_fn(*grid, move |x| {
                let d = [x[0] - c[0], x.get(1).map_or(0.0, |y| y - c[1])];
                (-norm(&d, n).powi(2) / (s * s)).exp() * (k * x[0]).cos()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rig() -> Grid {
        Grid::new(1, 16.0, 8192).unwrap()
    }

    fn gaussian(g: Grid, s: f64) -> GridFunction {
        GridFunction::from_real_fn(g, move |x| (-x[0] * x[0] / (s * s)).exp())
    }

    #[test]
    fn partition_and_moments() {
        let g = rig();
        for l in [0, 2] {
            let sys = make_reproducing_system(l, 0.5, 6, &g).unwrap();
            assert!(sys.partition_residual() < 1e-8, "L = {l}");
            for j in 1..=6 {
                assert!(sys.max_relative_moment(j) < 1e-10, "L = {l}, j = {j}");
            }
            assert!(sys.delta > 0.0);
        }
        let sys = make_reproducing_system(2, 0.5, 6, &g).unwrap();
        // ∫φ = ∫xφ = 0 for the first level, absolute
        let t = &sys.taps[1];
        let h = g.spacing();
        let m0: f64 = t.values.iter().sum::<f64>() * h;
        let m1: f64 = t.values.iter().enumerate().map(|(i, v)| v * (i as f64 - t.radius as f64) * h).sum::<f64>() * h;
        assert!(m0.abs() < 1e-10 && m1.abs() < 1e-10);
    }

    #[test]
    fn reproducing_identity_band_limited() {
        let g = rig();
        let f = gaussian(g, 0.3);
        for l in [0, 2] {
            let sys = make_reproducing_system(l, 0.5, 6, &g).unwrap();
            let back = sys.reproduce(&f).unwrap();
            assert!(back.sub(&f).unwrap().max_abs() <= 1e-6 * f.max_abs());
        }
    }

    #[test]
    fn bad_sigma_rejected() {
        let g = rig();
        assert_eq!(make_reproducing_system(4, 0.3, 6, &g).unwrap_err().kind(), "construction");
        assert!(make_reproducing_system(0, 0.0, 6, &g).is_err());
    }

    #[test]
    fn analysis_round_trip_and_atoms() {
        let g = rig();
        let sys = make_reproducing_system(2, 0.5, 6, &g).unwrap();
        let f = gaussian(g, 0.2);
        let (lam, fam) = analyze(&f, &sys, 2, 6).unwrap();
        let back = synthesize(&lam, &fam, 6, None).unwrap();
        assert!(back.sub(&f).unwrap().max_abs() < 1e-4, "{}", back.sub(&f).unwrap().max_abs());
        for ((j, m), a) in &fam.members {
            let l = if *j == 0 { 0 } else { fam.l };
            let r = verify_atom(a, *j, *m, fam.k, l, fam.d).unwrap();
            assert!(r.passed, "({j}, {m:?}): {r:?}");
        }
        assert!(lam.entries.values().all(|v| v.im == 0.0 && v.re > 0.0));
        let (lam0, fam0) = analyze(&GridFunction::zeros(g), &sys, 2, 6).unwrap();
        assert!(lam0.is_empty() && fam0.members.is_empty());
    }

    #[test]
    fn synthesis_is_linear() {
        let g = rig();
        let sys = make_reproducing_system(0, 0.5, 4, &g).unwrap();
        let (lam, fam) = analyze(&gaussian(g, 0.5), &sys, 1, 4).unwrap();
        let mut l1 = lam.clone();
        let mut l2 = lam.scale(0.0);
        for (i, (k, v)) in lam.entries.iter().enumerate() {
            let w = Complex64::new(0.3 * i as f64, -1.0);
            l1.entries.insert(*k, *v);
            l2.entries.insert(*k, w);
        }
        let mut sum = l1.clone();
        for (k, v) in &l2.entries {
            *sum.entries.get_mut(k).unwrap() += v;
        }
        let a = synthesize(&sum, &fam, 4, None).unwrap();
        let b = synthesize(&l1, &fam, 4, None).unwrap().add(&synthesize(&l2, &fam, 4, None).unwrap()).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12 * a.max_abs());
        let key = *lam.entries.keys().next().unwrap();
        let mut single = CoeffField::new(1, 4);
        single.insert(key.0, key.1, Complex64::new(2.0, 0.0)).unwrap();
        let s = synthesize(&single, &fam, 4, None).unwrap();
        assert!(s.sub(&fam.members[&key].to_grid_function().scale(2.0)).unwrap().max_abs() == 0.0);
        let mut missing = CoeffField::new(1, 4);
        missing.insert(4, [999, 0], Complex64::new(1.0, 0.0)).unwrap();
        assert!(synthesize(&missing, &fam, 4, None).is_err());
    }

    #[test]
    fn standard_family_is_seeded() {
        let g = rig();
        let a = standard_family(&g, 4, 3);
        let b = standard_family(&g, 4, 3);
        let c = standard_family(&g, 5, 3);
        assert_eq!(a.len(), 3);
        assert!(a.iter().zip(&b).all(|(x, y)| x.samples() == y.samples()));
        assert!(a[0].samples() != c[0].samples());
        assert!(a.iter().all(|f| f.max_abs() <= 1.0 + 1e-12 && f.check_decay().is_ok()));
    }

    #[test]
    fn tails_density_and_pairings() {
        use crate::exponent::{make_weight, WeightKind};
        use crate::lp_analysis::{make_admissible_pair, Profile};
        let g = rig();
        let sys = make_reproducing_system(2, 0.5, 5, &g).unwrap();
        let f = gaussian(g, 0.1);
        let (lam, fam) = analyze(&f, &sys, 2, 5).unwrap();
        let w = make_weight(&WeightKind::ConstantS { s: 0.5 }, &g, 5).unwrap();
        let p = Exponent::constant(2.0).unwrap();
        let q = Exponent::constant(2.0).unwrap();
        let pair = make_admissible_pair(Profile::CosineBump, None).unwrap();
        let tails = tail_in_space(&lam, &fam, &w, &p, &q, SpaceKind::B, &pair).unwrap();
        assert_eq!(tails.tails.len(), 6);
        assert_eq!(tails.tails[5], 0.0);
        assert!(tails.nonincreasing && tails.in_hypothesis, "{:?}", tails.tails);

        let table = density_demo(&f, &sys, 2, &w, &p, &q, SpaceKind::B, &pair).unwrap();
        assert_eq!(table.rows[0].terms, 0);
        assert_eq!(table.rows.last().unwrap().terms, table.total_terms);
        let full = space_norm_of(&f, &w, &p, &q, &pair, SpaceKind::B).unwrap().value;
        assert!((table.rows[0].distance - full).abs() < 1e-12 * full);
        assert!(table.rows.last().unwrap().distance < 1e-3 * full);
        let inf = Exponent::constant(f64::INFINITY).unwrap();
        assert!(density_demo(&f, &sys, 2, &w, &p, &inf, SpaceKind::B, &pair).is_err());

        let test = gaussian(g, 1.0);
        let sp = sprime_tail_diagnostic(&lam, &fam, &[test], &w, &p).unwrap();
        assert_eq!(sp.seminorm_order, 3);
        assert!(!sp.order_capped);
        let pr = &sp.per_test[0];
        assert!(pr.decaying, "{:?}", pr.tail_pairings);
        assert!(pr.constant.is_finite() && pr.constant > 0.0);

        let rep = synthesis_bound_check(&lam, &fam, &w, &p, &q, SpaceKind::B, &pair).unwrap();
        assert!(rep.gates.met, "{:?}", rep.gates.failures);
        assert!(rep.ratio > 0.0 && rep.ratio.is_finite());
    }
}
