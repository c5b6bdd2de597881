//! Variable-exponent Lebesgue spaces: semimodular, Luxemburg quasi-norm and
//! the standard inequality checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::grid::{cube_index_range, DyadicCube, Grid, GridFunction};
use crate::rootfind::ExpSum;

pub const DEFAULT_REL_TOL: f64 = 1e-10;
/// Values of `t` up to `1 + TIE_TOL` count as `t <= 1` for `p = ∞`.
pub const TIE_TOL: f64 = 1e-14;

/// Result of a Luxemburg-type threshold search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormResult {
    pub value: f64,
    pub bracket: (f64, f64),
    pub iterations: usize,
}

impl NormResult {
    pub fn exact(value: f64) -> Self {
        NormResult { value, bracket: (value, value), iterations: 0 }
    }
}

/// `φ_p(t)`: `t^p` for finite `p`; for `p = ∞`, `0` if `t <= 1` and `∞` otherwise.
pub fn phi_p(t: f64, p: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Precondition(format!("φ_p needs t >= 0, got {t}")));
    }
    Ok(phi(t, p))
}

#[inline]
pub(crate) fn phi(t: f64, p: f64) -> f64 {
    if p.is_infinite() {
        if t <= 1.0 + TIE_TOL {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        t.powf(p)
    }
}

/// `ρ(f) = h^n Σ φ_{p(x)}(|f(x)|)`.
pub fn semimodular(f: &GridFunction, p: &Exponent) -> f64 {
    let ps = p.samples(f.grid());
    semimodular_values(&f.abs(), &ps, f.grid().cell_volume())
}

/// Semimodular of absolute values with per-sample exponents and cell volume `w`.
pub fn semimodular_values(abs: &[f64], ps: &[f64], w: f64) -> f64 {
    let mut s = 0.0;
    for (&t, &p) in abs.iter().zip(ps) {
        if t > 0.0 {
            s += phi(t, p);
        }
    }
    w * s
}

/// Whether `ρ(f/λ) <= 1`, summing lazily and stopping as soon as the sum exceeds 1.
pub fn modular_at_most_one(abs: &[f64], ps: &[f64], w: f64, lambda: f64) -> bool {
    let limit = 1.0 / w;
    let mut s = 0.0;
    for (&t, &p) in abs.iter().zip(ps) {
        if t > 0.0 {
            s += phi(t / lambda, p);
            if s > limit {
                return false;
            }
        }
    }
    true
}

fn check_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 0.0 && rel_tol <= 1e-4) {
        return Err(Error::Precondition(format!("relTol must lie in (0, 1e-4], got {rel_tol}")));
    }
    Ok(())
}

/// `inf{λ > 0 : ρ(f/λ) <= 1}` for absolute values `abs` with exponents `ps`.
pub fn luxemburg_values(abs: &[f64], ps: &[f64], w: f64, rel_tol: f64) -> Result<NormResult> {
    check_tol(rel_tol)?;
    let mut sup_inf: f64 = 0.0;
    let mut sum = ExpSum::new(w);
    for (&t, &p) in abs.iter().zip(ps) {
        if t > 0.0 {
            if p.is_infinite() {
                sup_inf = sup_inf.max(t);
            } else {
                sum.push(p * t.ln(), p);
            }
        }
    }
    if sum.is_empty() {
        return Ok(NormResult::exact(sup_inf));
    }
    let b = sum.solve(1.0, rel_tol)?;
    let (lo, hi) = (b.lo.exp(), b.hi.exp());
    if sup_inf >= hi {
        return Ok(NormResult { value: sup_inf, bracket: (sup_inf, sup_inf), iterations: b.iterations });
    }
    let lo = lo.max(sup_inf);
    Ok(NormResult { value: hi, bracket: (lo, hi), iterations: b.iterations })
}

/// Luxemburg quasi-norm `‖f | L_{p(·)}‖`.
pub fn luxemburg_norm(f: &GridFunction, p: &Exponent, rel_tol: f64) -> Result<NormResult> {
    let ps = p.samples(f.grid());
    luxemburg_values(&f.abs(), &ps, f.grid().cell_volume(), rel_tol)
}

/// Norm with the default tolerance, value only.
pub fn lp_norm(f: &GridFunction, p: &Exponent) -> Result<f64> {
    Ok(luxemburg_norm(f, p, DEFAULT_REL_TOL)?.value)
}

/// Comparison of `ρ(f) <= 1` and `‖f‖ <= 1`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct UnitBallReport {
    pub modular: f64,
    pub norm: f64,
    pub modular_le_one: bool,
    pub norm_le_one: bool,
    /// The norm lies within the excluded band around 1.
    pub inconclusive: bool,
}

impl UnitBallReport {
    pub fn agrees(&self) -> bool {
        self.inconclusive || self.modular_le_one == self.norm_le_one
    }
}

/// Width of the excluded band `|‖f‖ - 1| <= band`.
pub const UNIT_BAND: f64 = 1e-8;

pub fn check_unit_ball(f: &GridFunction, p: &Exponent) -> Result<UnitBallReport> {
    let modular = semimodular(f, p);
    let norm = lp_norm(f, p)?;
    Ok(UnitBallReport {
        modular,
        norm,
        modular_le_one: modular <= 1.0,
        norm_le_one: norm <= 1.0,
        inconclusive: (norm - 1.0).abs() <= UNIT_BAND,
    })
}

/// `min{ρ^{1/p^-}, ρ^{1/p^+}} <= ‖f‖ <= max{ρ^{1/p^-}, ρ^{1/p^+}}`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct NormModularReport {
    pub modular: f64,
    pub norm: f64,
    pub lower: f64,
    pub upper: f64,
    pub holds: bool,
    /// Preconditions not met (`p^- = ∞`, or `ρ = 0` with `p^+ = ∞`).
    pub skipped: bool,
}

pub fn norm_modular_bounds(f: &GridFunction, p: &Exponent) -> Result<NormModularReport> {
    let modular = semimodular(f, p);
    let norm = lp_norm(f, p)?;
    let (pm, pp) = (p.p_minus(), p.p_plus());
    if pm.is_infinite() || (modular == 0.0 && pp.is_infinite()) {
        return Ok(NormModularReport { modular, norm, lower: f64::NAN, upper: f64::NAN, holds: true, skipped: true });
    }
    let a = modular.powf(1.0 / pm);
    let b = if pp.is_infinite() { 1.0 } else { modular.powf(1.0 / pp) };
    let (lower, upper) = (a.min(b), a.max(b));
    let slack = 1e-9;
    let holds = norm >= lower * (1.0 - slack) && norm <= upper * (1.0 + slack);
    Ok(NormModularReport { modular, norm, lower, upper, holds, skipped: false })
}

/// `‖fg | L_1‖ <= 2 ‖f | L_p‖ ‖g | L_{p'}‖`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HolderReport {
    pub lhs: f64,
    pub norm_f: f64,
    pub norm_g: f64,
    /// `2 ‖f‖ ‖g‖`.
    pub rhs: f64,
    pub holds: bool,
    /// `lhs <= ‖f‖‖g‖`, the classical form valid for constant exponents.
    pub holds_with_constant_one: bool,
}

pub fn holder_check(f: &GridFunction, g: &GridFunction, p: &Exponent) -> Result<HolderReport> {
    if p.p_minus() < 1.0 {
        return Err(Error::Precondition(format!("Hölder needs p^- >= 1, got {}", p.p_minus())));
    }
    let fg = f.mul(g)?;
    let lhs = fg.l1();
    let norm_f = lp_norm(f, p)?;
    let norm_g = lp_norm(g, &p.conjugate()?)?;
    let slack = 1.0 + 1e-9;
    Ok(HolderReport {
        lhs,
        norm_f,
        norm_g,
        rhs: 2.0 * norm_f * norm_g,
        holds: lhs <= 2.0 * norm_f * norm_g * slack,
        holds_with_constant_one: lhs <= norm_f * norm_g * slack,
    })
}

/// Per-level extremes of `‖χ_Q‖ / |Q|^{1/p(x)}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelRatios {
    pub j: i32,
    pub cubes: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CharfunReport {
    pub levels: Vec<LevelRatios>,
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// `max_ratio / min_ratio`.
    pub spread: f64,
    pub p_infty: f64,
}

/// Compare `‖χ_Q | L_{p(·)}‖` with `|Q|^{1/p(x)}` for every sample `x ∈ Q` when
/// `|Q| <= 1`, and with `|Q|^{1/p_∞}` when `|Q| > 1`, over all cubes of the given
/// levels lying inside the box.
pub fn charfun_norm_scaling(p: &Exponent, grid: &Grid, levels: &[i32]) -> Result<CharfunReport> {
    let n = grid.dim();
    let w = grid.cell_volume();
    let p_infty = p.p_infty().unwrap_or_else(|| crate::exponent::estimate_p_infty(p, grid));
    let ps = p.samples(grid);
    let mut out = Vec::new();
    let (mut gmin, mut gmax) = (f64::INFINITY, 0.0f64);
    for &j in levels {
        if grid.spacing() > 2f64.powi(-j) / 4.0 {
            return Err(Error::Precondition(format!("level {j} not resolved by the grid")));
        }
        let limit = grid.half_width() - grid.spacing();
        let (mut lmin, mut lmax, mut count) = (f64::INFINITY, 0.0f64, 0usize);
        let range = cube_index_range(grid, j);
        let ms: Vec<[i64; 2]> = if n == 1 {
            range.map(|m| [m, 0]).collect()
        } else {
            range.clone().flat_map(|a| range.clone().map(move |b| [a, b])).collect()
        };
        for m in ms {
            let cube = DyadicCube::new(j, m);
            let c = cube.center();
            let r = 0.5 * cube.side();
            if (0..n).any(|a| c[a].abs() + r > limit) {
                continue;
            }
            let mut idx = Vec::new();
            let r0 = cube.closed_axis_range(grid, 0);
            if n == 1 {
                idx.extend(r0);
            } else {
                let r1 = cube.closed_axis_range(grid, 1);
                for a in r0 {
                    for b in r1.clone() {
                        idx.push(grid.flatten([a, b]));
                    }
                }
            }
            let local_p: Vec<f64> = idx.iter().map(|&k| ps[k]).collect();
            let ones = vec![1.0; idx.len()];
            let norm = luxemburg_values(&ones, &local_p, w, DEFAULT_REL_TOL)?.value;
            let vol = cube.volume(n);
            let (rmin, rmax) = if vol <= 1.0 {
                let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
                for &q in &local_p {
                    let v = vol.powf(crate::exponent::recip(q));
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (norm / hi, norm / lo)
            } else {
                let v = vol.powf(crate::exponent::recip(p_infty));
                (norm / v, norm / v)
            };
            lmin = lmin.min(rmin);
            lmax = lmax.max(rmax);
            count += 1;
        }
        if count > 0 {
            gmin = gmin.min(lmin);
            gmax = gmax.max(lmax);
        }
        out.push(LevelRatios { j, cubes: count, min_ratio: lmin, max_ratio: lmax });
    }
    Ok(CharfunReport { levels: out, min_ratio: gmin, max_ratio: gmax, spread: gmax / gmin, p_infty })
}
