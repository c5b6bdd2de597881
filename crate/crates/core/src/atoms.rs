//! Atoms, molecules, their validators, and the coefficient spaces `b^w_{p,q}`, `f^w_{p,q}`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponent::{Exponent, WeightSequence};
use crate::grid::{multi_indices, norm, DyadicCube, Grid, GridFunction, Point};
use crate::mixed::{norm_lp_lq, norm_lq_lp, FunctionSequence};
use crate::modular::NormResult;
use crate::par;

/// Samples outside a support cube must stay below this.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Moments must stay below this fraction of `‖a‖_1`.
pub const MOMENT_TOL: f64 = 1e-8;

/// A grid function stored on a rectangular patch of sample indices; zero elsewhere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalFunction {
    pub grid: Grid,
    /// First axis index of the patch.
    pub start: [usize; 2],
    /// Patch extent per axis (1 on the unused axis when `n = 1`).
    pub shape: [usize; 2],
    pub samples: Vec<Complex64>,
}

impl LocalFunction {
    pub fn new(grid: Grid, start: [usize; 2], shape: [usize; 2], samples: Vec<Complex64>) -> Result<Self> {
        let np = grid.points_per_axis();
        for a in 0..grid.dim() {
            if start[a] + shape[a] > np {
                return Err(Error::Domain(format!("patch exceeds the grid on axis {a}")));
            }
        }
        if grid.dim() == 1 && (shape[1] != 1 || start[1] != 0) {
            return Err(Error::Domain("one-dimensional patches have shape [k, 1]".into()));
        }
        if samples.len() != shape[0] * shape[1] {
            return Err(Error::Domain(format!("{} samples for shape {shape:?}", samples.len())));
        }
        Ok(LocalFunction { grid, start, shape, samples })
    }

    pub fn zero(grid: Grid) -> Self {
        LocalFunction { grid, start: [0, 0], shape: [0, if grid.dim() == 1 { 1 } else { 0 }], samples: Vec::new() }
    }

    pub fn from_grid_function(f: &GridFunction) -> Self {
        let g = *f.grid();
        let np = g.points_per_axis();
        let shape = if g.dim() == 1 { [np, 1] } else { [np, np] };
        LocalFunction { grid: g, start: [0, 0], shape, samples: f.samples().to_vec() }
    }

    pub fn to_grid_function(&self) -> GridFunction {
        let mut out = GridFunction::zeros(self.grid);
        self.add_into(&mut out, Complex64::new(1.0, 0.0));
        out
    }

    /// `target += c · self`.
    pub fn add_into(&self, target: &mut GridFunction, c: Complex64) {
        let g = self.grid;
        let buf = target.samples_mut();
        for a in 0..self.shape[0] {
            for b in 0..self.shape[1] {
                let k = g.flatten([self.start[0] + a, self.start[1] + b]);
                buf[k] += c * self.samples[a * self.shape[1] + b];
            }
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        LocalFunction { samples: self.samples.iter().map(|z| z * c).collect(), ..self.clone() }
    }

    /// Grid point of patch entry `(a, b)`.
    pub fn point(&self, a: usize, b: usize) -> Point {
        let g = &self.grid;
        let mut p = [g.coord((self.start[0] + a) as i64), 0.0];
        if g.dim() == 2 {
            p[1] = g.coord((self.start[1] + b) as i64);
        }
        p
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn l1(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).sum::<f64>() * self.grid.cell_volume()
    }

    /// Same function on a patch grown by `k` samples per side (clipped to the grid).
    pub fn padded(&self, k: usize) -> Self {
        let g = self.grid;
        let np = g.points_per_axis();
        let mut start = self.start;
        let mut shape = self.shape;
        for a in 0..g.dim() {
            let lo = self.start[a].saturating_sub(k);
            let hi = (self.start[a] + self.shape[a] + k).min(np);
            start[a] = lo;
            shape[a] = hi - lo;
        }
        let mut samples = vec![Complex64::new(0.0, 0.0); shape[0] * shape[1]];
        for a in 0..self.shape[0] {
            for b in 0..self.shape[1] {
                let (ra, rb) = (a + self.start[0] - start[0], b + self.start[1] - start[1]);
                samples[ra * shape[1] + rb] = self.samples[a * self.shape[1] + b];
            }
        }
        LocalFunction { grid: g, start, shape, samples }
    }

    /// Iterated central differences `D^γ` on the patch, zero outside it.
    fn difference(&self, gamma: [usize; 2]) -> Vec<Complex64> {
        central_differences(&self.samples, self.shape, self.grid.dim(), self.grid.spacing(), gamma)
    }
}

/// Iterated central differences `D^γ` of a row-major array with spacing `h`,
/// zero-extended beyond its edges.
pub(crate) fn central_differences(values: &[Complex64], shape: [usize; 2], n: usize, h: f64, gamma: [usize; 2]) -> Vec<Complex64> {
    let mut v = values.to_vec();
    let [s0, s1] = shape;
    let zero = Complex64::new(0.0, 0.0);
    for (axis, &order) in gamma.iter().enumerate().take(n) {
        for _ in 0..order {
            let prev = v.clone();
            for a in 0..s0 {
                for b in 0..s1 {
                    let (i, len) = if axis == 0 { (a, s0) } else { (b, s1) };
                    let at = |i: usize| if axis == 0 { prev[i * s1 + b] } else { prev[a * s1 + i] };
                    let fwd = if i + 1 < len { at(i + 1) } else { zero };
                    let bwd = if i > 0 { at(i - 1) } else { zero };
                    v[a * s1 + b] = (fwd - bwd) / (2.0 * h);
                }
            }
        }
    }
    v
}

/// First failing check, located.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub check: String,
    pub gamma: [usize; 2],
    pub point: Point,
    pub value: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub support_ok: bool,
    pub derivatives_ok: bool,
    pub moments_ok: bool,
    /// Largest sample outside `dQ` (atoms only).
    pub max_outside: f64,
    /// Largest `|D^γ a| / bound` over samples and `|γ| <= K`.
    pub max_derivative_ratio: f64,
    /// Largest `|∫ (2^j(x - c))^γ a| / ‖a‖_1` over `|γ| < L`.
    pub max_moment: f64,
    pub slack: f64,
    pub witness: Option<Witness>,
}

/// Derivative-bound allowance `1 + 10 K h 2^j` for finite differences.
pub fn difference_slack(k: usize, h: f64, j: usize) -> f64 {
    1.0 + 10.0 * k as f64 * h * 2f64.powi(j as i32)
}

fn check_resolved(grid: &Grid, j: usize) -> Result<()> {
    if grid.spacing() > 2f64.powi(-(j as i32)) / 4.0 {
        return Err(Error::Precondition(format!(
            "grid spacing {} does not resolve level {j} (need h <= 2^-j/4)",
            grid.spacing()
        )));
    }
    Ok(())
}

enum Envelope {
    Atom,
    Molecule(f64),
}

fn validate(a: &LocalFunction, j: usize, m: [i64; 2], k: usize, l: usize, envelope: Envelope, d: f64) -> Result<ValidationReport> {
    let grid = a.grid;
    check_resolved(&grid, j)?;
    let n = grid.dim();
    let cube = DyadicCube::new(j as i32, m);
    let c = cube.center();
    let scale = 2f64.powi(j as i32);
    let h = grid.spacing();
    let slack = difference_slack(k, h, j);
    let mut witness: Option<Witness> = None;
    let mut note = |w: Witness| {
        witness.get_or_insert(w);
    };

    let mut max_outside: f64 = 0.0;
    let mut support_ok = true;
    if let Envelope::Atom = envelope {
        for a0 in 0..a.shape[0] {
            for b0 in 0..a.shape[1] {
                let v = a.samples[a0 * a.shape[1] + b0].norm();
                let p = a.point(a0, b0);
                if !cube.contains_dilated(&p, n, d) {
                    max_outside = max_outside.max(v);
                    if v > SUPPORT_TOL && support_ok {
                        support_ok = false;
                        note(Witness { check: "support".into(), gamma: [0, 0], point: p, value: v, bound: SUPPORT_TOL });
                    }
                }
            }
        }
    }

    let padded = a.padded(k);
    let mut max_ratio: f64 = 0.0;
    let mut derivatives_ok = true;
    for gamma in multi_indices(n, k) {
        let order = gamma[0] + gamma[1];
        let dv = padded.difference(gamma);
        let base = scale.powi(order as i32);
        for a0 in 0..padded.shape[0] {
            for b0 in 0..padded.shape[1] {
                let v = dv[a0 * padded.shape[1] + b0].norm();
                if v == 0.0 {
                    continue;
                }
                let p = padded.point(a0, b0);
                let bound = match envelope {
                    Envelope::Atom => base,
                    Envelope::Molecule(big_m) => {
                        // envelope at the stencil point closest to the center
                        let mut near = [0.0; 2];
                        for ax in 0..n {
                            let r = gamma[ax] as f64 * h;
                            near[ax] = c[ax].clamp(p[ax] - r, p[ax] + r);
                        }
                        let dist = norm(&[near[0] - c[0], near[1] - c[1]], n);
                        base * (1.0 + scale * dist).powf(-big_m)
                    }
                };
                let ratio = v / bound;
                max_ratio = max_ratio.max(ratio);
                if ratio > slack && derivatives_ok {
                    derivatives_ok = false;
                    note(Witness { check: "derivative".into(), gamma, point: p, value: v, bound: bound * slack });
                }
            }
        }
    }

    let mut max_moment: f64 = 0.0;
    let mut moments_ok = true;
    if l > 0 {
        let l1 = a.l1();
        let hn = grid.cell_volume();
        for gamma in multi_indices(n, l - 1) {
            let mut mom = Complex64::new(0.0, 0.0);
            for a0 in 0..a.shape[0] {
                for b0 in 0..a.shape[1] {
                    let p = a.point(a0, b0);
                    let mut mono = 1.0;
                    for ax in 0..n {
                        mono *= (scale * (p[ax] - c[ax])).powi(gamma[ax] as i32);
                    }
                    mom += a.samples[a0 * a.shape[1] + b0] * mono;
                }
            }
            let rel = if l1 == 0.0 { 0.0 } else { (mom * hn).norm() / l1 };
            max_moment = max_moment.max(rel);
            if rel > MOMENT_TOL && moments_ok {
                moments_ok = false;
                note(Witness { check: "moment".into(), gamma, point: c, value: rel, bound: MOMENT_TOL });
            }
        }
    }

    Ok(ValidationReport {
        passed: support_ok && derivatives_ok && moments_ok,
        support_ok,
        derivatives_ok,
        moments_ok,
        max_outside,
        max_derivative_ratio: max_ratio,
        max_moment,
        slack,
        witness,
    })
}

/// Check `a` against the `(K, L, d)`-atom conditions at `Q_{jm}`.
pub fn verify_atom(a: &LocalFunction, j: usize, m: [i64; 2], k: usize, l: usize, d: f64) -> Result<ValidationReport> {
    if !(d > 1.0) {
        return Err(Error::Domain(format!("d must exceed 1, got {d}")));
    }
    validate(a, j, m, k, l, Envelope::Atom, d)
}

/// Check `a` against the `(K, L, M)`-molecule conditions at `Q_{jm}`.
pub fn verify_molecule(a: &LocalFunction, j: usize, m: [i64; 2], k: usize, l: usize, big_m: f64) -> Result<ValidationReport> {
    if !(big_m > 0.0) {
        return Err(Error::Domain(format!("M must be positive, got {big_m}")));
    }
    validate(a, j, m, k, l, Envelope::Molecule(big_m), 1.0)
}

/// `(1 + d√n/2)^{-M}`.
pub fn atom_to_molecule_factor(d: f64, big_m: f64, n: usize) -> f64 {
    (1.0 + d * (n as f64).sqrt() / 2.0).powf(-big_m)
}

/// `(1 + d√n/2)^{-M} a`, a molecule whenever `a` is an atom.
pub fn atom_to_molecule(a: &LocalFunction, d: f64, big_m: f64) -> LocalFunction {
    a.scale(atom_to_molecule_factor(d, big_m, a.grid.dim()))
}

pub type CubeKey = (usize, [i64; 2]);

/// Finitely supported coefficients `λ_{jm}`, `0 <= j <= Jmax`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CoeffField {
    pub n: usize,
    pub jmax: usize,
    pub entries: BTreeMap<CubeKey, Complex64>,
}

impl CoeffField {
    pub fn new(n: usize, jmax: usize) -> Self {
        CoeffField { n, jmax, entries: BTreeMap::new() }
    }

    pub fn insert(&mut self, j: usize, m: [i64; 2], v: Complex64) -> Result<()> {
        if j > self.jmax {
            return Err(Error::Domain(format!("level {j} above Jmax = {}", self.jmax)));
        }
        if self.n == 1 && m[1] != 0 {
            return Err(Error::Domain("one-dimensional cubes have m[1] = 0".into()));
        }
        self.entries.insert((j, m), v);
        Ok(())
    }

    pub fn get(&self, j: usize, m: [i64; 2]) -> Complex64 {
        self.entries.get(&(j, m)).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|z| z.norm() == 0.0)
    }

    pub fn scale(&self, c: f64) -> Self {
        CoeffField { entries: self.entries.iter().map(|(k, v)| (*k, v * c)).collect(), ..self.clone() }
    }

    /// Levels `j < t` dropped.
    pub fn tail(&self, t: usize) -> Self {
        CoeffField { entries: self.entries.iter().filter(|(k, _)| k.0 >= t).map(|(k, v)| (*k, *v)).collect(), ..self.clone() }
    }

    pub fn level(&self, j: usize) -> impl Iterator<Item = ([i64; 2], Complex64)> + '_ {
        self.entries.range((j, [i64::MIN, i64::MIN])..=(j, [i64::MAX, i64::MAX])).map(|(k, v)| (k.1, *v))
    }
}

/// Where inside `Q_{jm}` the weight `w_j` is read, as a fraction of the side
/// measured from the center (`[0, 0]` is the center).
pub type WeightOffset = [f64; 2];

/// Level step functions `Σ_m λ_{jm} w_j(x_{jm}) χ_{jm}` on half-open cube windows.
pub fn step_functions(lam: &CoeffField, w: &WeightSequence, offset: WeightOffset) -> Result<FunctionSequence> {
    let grid = *w.grid();
    if lam.n != grid.dim() {
        return Err(Error::GridMismatch(format!("coefficients for n = {} on an n = {} grid", lam.n, grid.dim())));
    }
    if lam.jmax > w.jmax() {
        return Err(Error::Precondition(format!("coefficients reach level {} but weights stop at {}", lam.jmax, w.jmax())));
    }
    let n = grid.dim();
    let entries = par::map(lam.jmax + 1, |j| {
        let mut f = GridFunction::zeros(grid);
        let buf = f.samples_mut();
        for (m, v) in lam.level(j) {
            let cube = DyadicCube::new(j as i32, m);
            let c = cube.center();
            let s = cube.side();
            let x = [c[0] + offset[0] * s, c[1] + offset[1] * s];
            let val = v * w.at(j, &x);
            let r0 = cube.half_open_axis_range(&grid, 0);
            let r1 = if n == 2 { cube.half_open_axis_range(&grid, 1) } else { 0..1 };
            for a in r0 {
                for b in r1.clone() {
                    buf[grid.flatten([a, b])] = val;
                }
            }
        }
        f
    });
    FunctionSequence::new(grid, entries)
}

/// `‖λ | b^w_{p(·),q(·)}‖` with weights read at cube centers.
pub fn seq_norm_b(lam: &CoeffField, w: &WeightSequence, p: &Exponent, q: &Exponent) -> Result<NormResult> {
    seq_norm_b_at(lam, w, p, q, [0.0, 0.0])
}

pub fn seq_norm_b_at(lam: &CoeffField, w: &WeightSequence, p: &Exponent, q: &Exponent, offset: WeightOffset) -> Result<NormResult> {
    norm_lq_lp(&step_functions(lam, w, offset)?, p, q)
}

/// `‖λ | f^w_{p(·),q(·)}‖`; needs `p^+, q^+ < ∞`.
pub fn seq_norm_f(lam: &CoeffField, w: &WeightSequence, p: &Exponent, q: &Exponent) -> Result<NormResult> {
    if p.p_plus().is_infinite() || q.p_plus().is_infinite() {
        return Err(Error::Precondition("f-type sequence norms need p^+ < ∞ and q^+ < ∞".into()));
    }
    norm_lp_lq(&step_functions(lam, w, [0.0, 0.0])?, p, q)
}

/// [`seq_norm_b`] or [`seq_norm_f`] by kind.
pub fn seq_norm(lam: &CoeffField, w: &WeightSequence, p: &Exponent, q: &Exponent, kind: crate::lp_analysis::SpaceKind) -> Result<NormResult> {
    match kind {
        crate::lp_analysis::SpaceKind::B => seq_norm_b(lam, w, p, q),
        crate::lp_analysis::SpaceKind::F => seq_norm_f(lam, w, p, q),
    }
}

/// Common view of atom and molecule families.
pub trait Family: Sync {
    fn grid(&self) -> &Grid;
    fn member(&self, key: &CubeKey) -> Option<&LocalFunction>;
    fn smoothness(&self) -> usize;
    fn moments(&self) -> usize;
    /// Decay order `M` for molecules, `None` for atoms.
    fn decay(&self) -> Option<f64>;
}

/// Atoms indexed by cube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtomFamily {
    pub grid: Grid,
    pub k: usize,
    pub l: usize,
    pub d: f64,
    pub members: BTreeMap<CubeKey, LocalFunction>,
}

/// Molecules indexed by cube.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MoleculeFamily {
    pub grid: Grid,
    pub k: usize,
    pub l: usize,
    pub big_m: f64,
    pub members: BTreeMap<CubeKey, LocalFunction>,
}

impl AtomFamily {
    /// Validate every member; level-0 members are checked with `L = 0`.
    pub fn verify_all(&self) -> Result<Vec<(CubeKey, ValidationReport)>> {
        let keys: Vec<&CubeKey> = self.members.keys().collect();
        par::map(keys.len(), |i| {
            let (j, m) = *keys[i];
            let l = if j == 0 { 0 } else { self.l };
            verify_atom(&self.members[keys[i]], j, m, self.k, l, self.d).map(|r| ((j, m), r))
        })
        .into_iter()
        .collect()
    }

    pub fn to_molecules(&self, big_m: f64) -> MoleculeFamily {
        MoleculeFamily {
            grid: self.grid,
            k: self.k,
            l: self.l,
            big_m,
            members: self.members.iter().map(|(key, a)| (*key, atom_to_molecule(a, self.d, big_m))).collect(),
        }
    }
}

impl MoleculeFamily {
    pub fn verify_all(&self) -> Result<Vec<(CubeKey, ValidationReport)>> {
        let keys: Vec<&CubeKey> = self.members.keys().collect();
        par::map(keys.len(), |i| {
            let (j, m) = *keys[i];
            let l = if j == 0 { 0 } else { self.l };
            verify_molecule(&self.members[keys[i]], j, m, self.k, l, self.big_m).map(|r| ((j, m), r))
        })
        .into_iter()
        .collect()
    }
}

impl Family for AtomFamily {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn member(&self, key: &CubeKey) -> Option<&LocalFunction> {
        self.members.get(key)
    }
    fn smoothness(&self) -> usize {
        self.k
    }
    fn moments(&self) -> usize {
        self.l
    }
    fn decay(&self) -> Option<f64> {
        None
    }
}

impl Family for MoleculeFamily {
    fn grid(&self) -> &Grid {
        &self.grid
    }
    fn member(&self, key: &CubeKey) -> Option<&LocalFunction> {
        self.members.get(key)
    }
    fn smoothness(&self) -> usize {
        self.k
    }
    fn moments(&self) -> usize {
        self.l
    }
    fn decay(&self) -> Option<f64> {
        Some(self.big_m)
    }
}
