//! Uniform grids on truncated boxes, grid functions, dyadic cubes and the
//! quadrature / convolution primitives everything else is built on.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier;

/// Points are passed around as fixed arrays; only the first `n` entries are used.
pub type Point = [f64; 2];

/// Uniform grid `x_i = -A + i h`, `i = 0..N-1` per axis, on `[-A, A]^n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
    points: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize, half_width: f64, points: usize) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(Error::Precondition(format!("dimension must be 1 or 2, got {n}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Precondition(format!("half-width must be positive, got {half_width}")));
        }
        if points < 16 || !points.is_power_of_two() {
            return Err(Error::Precondition(format!(
                "samples per axis must be a power of two >= 16, got {points}"
            )));
        }
        Ok(Grid { n, half_width, points, h: 2.0 * half_width / points as f64 })
    }

    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn half_width(&self) -> f64 {
        self.half_width
    }
    pub fn points_per_axis(&self) -> usize {
        self.points
    }
    pub fn spacing(&self) -> f64 {
        self.h
    }
    /// Total number of samples `N^n`.
    pub fn len(&self) -> usize {
        self.points.pow(self.n as u32)
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.n as i32)
    }
    pub fn box_volume(&self) -> f64 {
        (2.0 * self.half_width).powi(self.n as i32)
    }

    /// Same box, twice the samples per axis.
    pub fn refined(&self) -> Grid {
        Grid::new(self.n, self.half_width, self.points * 2).expect("refinement of a valid grid")
    }

    /// Coordinate of axis index `i` (any integer, possibly outside `0..N`).
    pub fn coord(&self, i: i64) -> f64 {
        -self.half_width + i as f64 * self.h
    }

    /// Axis index of the sample closest to `x`, clamped to the grid.
    pub fn nearest_axis_index(&self, x: f64) -> usize {
        let i = ((x + self.half_width) / self.h).round();
        i.clamp(0.0, (self.points - 1) as f64) as usize
    }

    pub fn unflatten(&self, flat: usize) -> [usize; 2] {
        if self.n == 1 {
            [flat, 0]
        } else {
            [flat / self.points, flat % self.points]
        }
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        if self.n == 1 {
            idx[0]
        } else {
            idx[0] * self.points + idx[1]
        }
    }

    pub fn point(&self, flat: usize) -> Point {
        let idx = self.unflatten(flat);
        let mut p = [0.0; 2];
        for a in 0..self.n {
            p[a] = self.coord(idx[a] as i64);
        }
        p
    }

    /// Flat index of the sample nearest to `x`.
    pub fn nearest(&self, x: &[f64]) -> usize {
        let mut idx = [0usize; 2];
        for a in 0..self.n {
            idx[a] = self.nearest_axis_index(x[a]);
        }
        self.flatten(idx)
    }

    /// Whether `x` lies in the closed box `[-A, A]^n`.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().take(self.n).all(|v| v.abs() <= self.half_width)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self != other {
            return Err(Error::GridMismatch(format!("{self:?} vs {other:?}")));
        }
        Ok(())
    }
}

/// Euclidean norm of the first `n` coordinates.
pub fn norm(x: &[f64], n: usize) -> f64 {
    x.iter().take(n).map(|v| v * v).sum::<f64>().sqrt()
}

/// Complex samples at every grid point, in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(grid: Grid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::Data(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Data(format!("non-finite sample at index {i}")));
        }
        Ok(GridFunction { grid, samples })
    }

    pub(crate) fn from_vec_unchecked(grid: Grid, samples: Vec<Complex64>) -> Self {
        debug_assert_eq!(samples.len(), grid.len());
        GridFunction { grid, samples }
    }

    pub fn from_real(grid: Grid, values: &[f64]) -> Result<Self> {
        Self::new(grid, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(grid: Grid) -> Self {
        GridFunction { grid, samples: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let samples = (0..grid.len())
            .map(|k| {
                let p = grid.point(k);
                f(&p[..grid.n])
            })
            .collect();
        GridFunction { grid, samples }
    }

    pub fn from_real_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }
    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn abs(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.norm()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    /// `h^n Σ |f|`.
    pub fn l1(&self) -> f64 {
        self.grid.cell_volume() * self.samples.iter().map(|z| z.norm()).sum::<f64>()
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction { grid: self.grid, samples: self.samples.iter().map(|&z| f(z)).collect() }
    }

    /// Pointwise map with access to the sample position.
    pub fn map_with_point(&self, f: impl Fn(&[f64], Complex64) -> Complex64) -> Self {
        let n = self.grid.n;
        let samples = self
            .samples
            .iter()
            .enumerate()
            .map(|(k, &z)| {
                let p = self.grid.point(k);
                f(&p[..n], z)
            })
            .collect();
        GridFunction { grid: self.grid, samples }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    pub fn zip_with(&self, other: &GridFunction, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(GridFunction {
            grid: self.grid,
            samples: self.samples.iter().zip(&other.samples).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }
    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }
    pub fn mul(&self, other: &GridFunction) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    /// Accumulate `c * other` in place.
    pub fn axpy(&mut self, c: Complex64, other: &GridFunction) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        for (a, b) in self.samples.iter_mut().zip(&other.samples) {
            *a += c * b;
        }
        Ok(())
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    /// Largest modulus among samples on the boundary layer of the grid
    /// (first/last index along any axis).
    pub fn boundary_max(&self) -> f64 {
        let last = self.grid.points - 1;
        let n = self.grid.n;
        self.samples
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let idx = self.grid.unflatten(*k);
                (0..n).any(|a| idx[a] == 0 || idx[a] == last)
            })
            .fold(0.0, |m, (_, z)| m.max(z.norm()))
    }

    /// Pre-flight check that `f` has decayed at the box boundary:
    /// `max_boundary |f| <= 1e-12 ‖f‖_∞`.
    pub fn check_decay(&self) -> Result<()> {
        let sup = self.max_abs();
        let b = self.boundary_max();
        if b > 1e-12 * sup {
            return Err(Error::Precondition(format!(
                "function does not decay at the box boundary: boundary max {b:.3e} vs sup {sup:.3e}; enlarge the box"
            )));
        }
        Ok(())
    }
}

/// Dyadic cube `Q_{jm}` centered at `2^{-j} m` with side `2^{-j}`.
/// Negative levels give cubes larger than the unit cube.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicCube {
    pub j: i32,
    pub m: [i64; 2],
}

impl DyadicCube {
    pub fn new(j: i32, m: [i64; 2]) -> Self {
        DyadicCube { j, m }
    }
    pub fn side(&self) -> f64 {
        2f64.powi(-self.j)
    }
    pub fn center(&self) -> Point {
        let s = self.side();
        [self.m[0] as f64 * s, self.m[1] as f64 * s]
    }
    pub fn volume(&self, n: usize) -> f64 {
        self.side().powi(n as i32)
    }
    /// Closed-cube membership with a relative tolerance for samples on faces.
    pub fn contains(&self, x: &[f64], n: usize) -> bool {
        self.contains_dilated(x, n, 1.0)
    }
    /// Membership in the closed cube `d·Q` (same center, side `d 2^{-j}`).
    pub fn contains_dilated(&self, x: &[f64], n: usize, d: f64) -> bool {
        let c = self.center();
        let r = 0.5 * d * self.side() * (1.0 + 1e-12);
        (0..n).all(|a| (x[a] - c[a]).abs() <= r)
    }
    /// Whether the closed cube meets the closed box `[-A, A]^n`.
    pub fn meets_box(&self, grid: &Grid) -> bool {
        let c = self.center();
        let r = 0.5 * self.side();
        (0..grid.dim()).all(|a| (c[a].abs() - r) <= grid.half_width())
    }
    /// Range of axis indices of samples in the closed cube along `axis`
    /// (clamped to the grid; may be empty).
    pub fn closed_axis_range(&self, grid: &Grid, axis: usize) -> std::ops::Range<usize> {
        let c = self.center()[axis];
        let r = 0.5 * self.side();
        let lo = ((c - r + grid.half_width()) / grid.spacing() - 1e-9).ceil().max(0.0);
        let hi = ((c + r + grid.half_width()) / grid.spacing() + 1e-9).floor();
        let top = (grid.points_per_axis() - 1) as f64;
        if hi < 0.0 || lo > top {
            return 0..0;
        }
        lo as usize..(hi.min(top) as usize + 1)
    }
    /// Range of axis indices in the half-open window `[c - r, c + r)`.
    pub fn half_open_axis_range(&self, grid: &Grid, axis: usize) -> std::ops::Range<usize> {
        let c = self.center()[axis];
        let r = 0.5 * self.side();
        let lo = ((c - r + grid.half_width()) / grid.spacing() - 1e-9).ceil().max(0.0);
        let hi = ((c + r + grid.half_width()) / grid.spacing() - 1e-9).ceil();
        let end = (grid.points_per_axis() as f64).min(hi);
        if end <= lo {
            return 0..0;
        }
        lo as usize..end as usize
    }
}

/// Index `m` of the level-`j` cube whose half-open window `[2^{-j}(m-1/2), 2^{-j}(m+1/2))`
/// contains `x`.
pub fn half_open_cube_index(x: f64, j: i32) -> i64 {
    (x * 2f64.powi(j) + 0.5).floor() as i64
}

/// Range of cube indices `m` per axis whose closed cubes meet the box at level `j`.
pub fn cube_index_range(grid: &Grid, j: i32) -> std::ops::RangeInclusive<i64> {
    let k = (grid.half_width() * 2f64.powi(j) + 0.5).floor() as i64;
    -k..=k
}

/// All level-`j` cubes meeting the box.
pub fn cubes_at_level(grid: &Grid, j: i32) -> Vec<DyadicCube> {
    let r = cube_index_range(grid, j);
    let mut out = Vec::new();
    if grid.dim() == 1 {
        for m in r {
            out.push(DyadicCube::new(j, [m, 0]));
        }
    } else {
        for m0 in r.clone() {
            for m1 in r.clone() {
                out.push(DyadicCube::new(j, [m0, m1]));
            }
        }
    }
    out
}

/// Samples that are 1 on the closed cube and 0 elsewhere.
pub fn cube_indicator(cube: &DyadicCube, grid: &Grid) -> Result<GridFunction> {
    if grid.spacing() > cube.side() / 4.0 {
        let need = (2.0 * grid.half_width() * 4.0 / cube.side()).log2().ceil().exp2() as usize;
        return Err(Error::Precondition(format!(
            "grid too coarse for level {}: need at least N = {need} samples per axis",
            cube.j
        )));
    }
    if !cube.meets_box(grid) {
        return Err(Error::Precondition(format!("cube {cube:?} does not meet the box")));
    }
    let n = grid.dim();
    Ok(GridFunction::from_real_fn(*grid, |x| if cube.contains(x, n) { 1.0 } else { 0.0 }))
}

/// Rectangle-rule quadrature `h^n Σ f`.
pub fn integrate(f: &GridFunction) -> Complex64 {
    f.samples.iter().sum::<Complex64>() * f.grid.cell_volume()
}

/// `(f * g)(x) = ∫ f(x - y) g(y) dy` on the grid via zero-padded FFTs.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.grid.check_same(&g.grid)?;
    Ok(fourier::convolve(f, g))
}

/// `η_{ν,R}(x) = 2^{nν} (1 + 2^ν |x|)^{-R}` sampled on the grid.
pub fn eta_kernel(nu: i32, r: f64, grid: &Grid) -> Result<GridFunction> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("R must be positive, got {r}")));
    }
    let n = grid.dim();
    let s = 2f64.powi(nu);
    let amp = s.powi(n as i32);
    Ok(GridFunction::from_real_fn(*grid, |x| amp * (1.0 + s * norm(x, n)).powf(-r)))
}

/// Central finite difference `D^γ f` along axes, order `γ = (g0, g1)`, evaluated at
/// every grid sample (samples outside the grid taken as zero).
pub fn central_difference(values: &[Complex64], grid: &Grid, gamma: [usize; 2]) -> Vec<Complex64> {
    let mut out = values.to_vec();
    for (axis, &order) in gamma.iter().enumerate().take(grid.dim()) {
        for _ in 0..order {
            out = central_first(&out, grid, axis);
        }
    }
    out
}

fn central_first(v: &[Complex64], grid: &Grid, axis: usize) -> Vec<Complex64> {
    let np = grid.points_per_axis();
    let h = grid.spacing();
    let zero = Complex64::new(0.0, 0.0);
    (0..v.len())
        .map(|k| {
            let mut idx = grid.unflatten(k);
            let i = idx[axis];
            let fwd = if i + 1 < np {
                idx[axis] = i + 1;
                v[grid.flatten(idx)]
            } else {
                zero
            };
            let bwd = if i > 0 {
                idx[axis] = i - 1;
                v[grid.flatten(idx)]
            } else {
                zero
            };
            (fwd - bwd) / (2.0 * h)
        })
        .collect()
}

/// Multi-indices `γ` with `|γ| <= order` in dimension `n`.
pub fn multi_indices(n: usize, order: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    if n == 1 {
        for k in 0..=order {
            out.push([k, 0]);
        }
    } else {
        for t in 0..=order {
            for a in 0..=t {
                out.push([a, t - a]);
            }
        }
    }
    out
}

/// Grid proxy for `sup (1+|x|)^N Σ_{|γ|<=N} |D^γ f(x)|` with central differences.
pub fn schwartz_seminorm(f: &GridFunction, order: usize) -> Result<f64> {
    if order > 4 {
        return Err(Error::Precondition(format!(
            "finite-difference seminorm supports order <= 4, got {order}"
        )));
    }
    let grid = f.grid;
    let n = grid.dim();
    let mut total = vec![0.0; grid.len()];
    for gamma in multi_indices(n, order) {
        let d = central_difference(&f.samples, &grid, gamma);
        for (t, z) in total.iter_mut().zip(&d) {
            *t += z.norm();
        }
    }
    Ok(total
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let p = grid.point(k);
            (1.0 + norm(&p, n)).powi(order as i32) * t
        })
        .fold(0.0, f64::max))
}
