//! Zero-padded FFT helpers. Samples sit at padded indices `0..N` of a grid with
//! `2N` points per axis; padded index `k` corresponds to the angular frequency
//! `ξ_k = 2π k' / (2N h)` with `k'` the signed index.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::{Grid, GridFunction};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// In-place n-dimensional FFT on a square array with `side` points per axis.
/// The inverse is unnormalized.
fn fft_nd(data: &mut [Complex64], side: usize, n: usize, inverse: bool) {
    let fft = plan(side, inverse);
    // rows (last axis, contiguous)
    fft.process(data);
    if n == 2 {
        let mut col = vec![Complex64::new(0.0, 0.0); side];
        for c in 0..side {
            for r in 0..side {
                col[r] = data[r * side + c];
            }
            fft.process(&mut col);
            for r in 0..side {
                data[r * side + c] = col[r];
            }
        }
    }
}

fn padded_side(grid: &Grid) -> usize {
    2 * grid.points_per_axis()
}

fn pad(grid: &Grid, samples: &[Complex64]) -> Vec<Complex64> {
    let np = grid.points_per_axis();
    let p = padded_side(grid);
    let mut out = vec![Complex64::new(0.0, 0.0); p.pow(grid.dim() as u32)];
    if grid.dim() == 1 {
        out[..np].copy_from_slice(samples);
    } else {
        for r in 0..np {
            out[r * p..r * p + np].copy_from_slice(&samples[r * np..(r + 1) * np]);
        }
    }
    out
}

/// Crop padded data starting at padded offset `off` per axis, dividing by `scale`.
fn crop(grid: &Grid, data: &[Complex64], off: usize, scale: f64) -> Vec<Complex64> {
    let np = grid.points_per_axis();
    let p = padded_side(grid);
    if grid.dim() == 1 {
        data[off..off + np].iter().map(|z| z / scale).collect()
    } else {
        let mut out = Vec::with_capacity(np * np);
        for r in 0..np {
            let row = (r + off) * p;
            out.extend(data[row + off..row + off + np].iter().map(|z| z / scale));
        }
        out
    }
}

/// Signed angular frequency of padded index `k`.
pub fn frequency(grid: &Grid, k: usize) -> f64 {
    let p = padded_side(grid) as i64;
    let k = k as i64;
    let ks = if k < p / 2 { k } else { k - p };
    2.0 * std::f64::consts::PI * ks as f64 / (p as f64 * grid.spacing())
}

/// Largest resolved angular frequency `π / h`.
pub fn nyquist(grid: &Grid) -> f64 {
    std::f64::consts::PI / grid.spacing()
}

/// Forward transform of the zero-padded samples, reusable for several multipliers.
#[derive(Clone)]
pub struct Spectrum {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(f: &GridFunction) -> Self {
        let grid = *f.grid();
        let mut data = pad(&grid, f.samples());
        fft_nd(&mut data, padded_side(&grid), grid.dim(), false);
        Spectrum { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Apply a multiplier `m(ξ)` and return the cropped inverse transform.
    pub fn filtered(&self, m: impl Fn(&[f64]) -> Complex64) -> GridFunction {
        let mut buf = self.data.clone();
        for_each_frequency(&self.grid, |k, xi| buf[k] *= m(xi));
        self.invert(buf)
    }

    /// Apply precomputed multiplier values (one per padded frequency).
    pub fn filtered_by(&self, values: &[Complex64]) -> GridFunction {
        let buf: Vec<Complex64> = self.data.iter().zip(values).map(|(a, b)| a * b).collect();
        self.invert(buf)
    }

    fn invert(&self, mut buf: Vec<Complex64>) -> GridFunction {
        let side = padded_side(&self.grid);
        fft_nd(&mut buf, side, self.grid.dim(), true);
        let scale = (side as f64).powi(self.grid.dim() as i32);
        GridFunction::from_vec_unchecked(self.grid, crop(&self.grid, &buf, 0, scale))
    }
}

/// Visit every padded frequency with its flat index.
pub fn for_each_frequency(grid: &Grid, mut f: impl FnMut(usize, &[f64])) {
    let p = padded_side(grid);
    if grid.dim() == 1 {
        for k in 0..p {
            f(k, &[frequency(grid, k)]);
        }
    } else {
        for r in 0..p {
            let xr = frequency(grid, r);
            for c in 0..p {
                f(r * p + c, &[xr, frequency(grid, c)]);
            }
        }
    }
}

/// Number of padded frequencies `(2N)^n`.
pub fn padded_len(grid: &Grid) -> usize {
    padded_side(grid).pow(grid.dim() as u32)
}

/// `h^n Σ_z c(z) e^{-i z·ξ_k}` for a filter given on lattice offsets `z = h·o`,
/// `o ∈ [-r, r]^n`, stored row-major with side `2r+1`.
pub fn filter_transform(grid: &Grid, radius: usize, taps: &[f64]) -> Vec<Complex64> {
    let p = padded_side(grid);
    assert!(2 * radius < p, "filter wider than the padded grid");
    let side = 2 * radius + 1;
    let n = grid.dim();
    let mut data = vec![Complex64::new(0.0, 0.0); p.pow(n as u32)];
    let wrap = |o: usize| (o as i64 - radius as i64).rem_euclid(p as i64) as usize;
    if n == 1 {
        for (o, &t) in taps.iter().enumerate() {
            data[wrap(o)] = Complex64::new(t, 0.0);
        }
    } else {
        for a in 0..side {
            for b in 0..side {
                data[wrap(a) * p + wrap(b)] = Complex64::new(taps[a * side + b], 0.0);
            }
        }
    }
    fft_nd(&mut data, p, n, false);
    let hn = grid.cell_volume();
    data.iter_mut().for_each(|z| *z *= hn);
    data
}

/// Linear convolution `h^n Σ_k f_k g_{i-k+N/2}` via padded FFTs.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> GridFunction {
    let grid = *f.grid();
    let side = padded_side(&grid);
    let n = grid.dim();
    let mut a = pad(&grid, f.samples());
    let mut b = pad(&grid, g.samples());
    fft_nd(&mut a, side, n, false);
    fft_nd(&mut b, side, n, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fft_nd(&mut a, side, n, true);
    let scale = (side as f64).powi(n as i32) / grid.cell_volume();
    GridFunction::from_vec_unchecked(grid, crop(&grid, &a, grid.points_per_axis() / 2, scale))
}

/// Continuous Fourier transform `∫ f(x) e^{-i x·ξ} dx` at the padded frequencies,
/// approximated by the rectangle rule.
pub fn transform(f: &GridFunction) -> Vec<Complex64> {
    let grid = *f.grid();
    let s = Spectrum::new(f);
    let a = grid.half_width();
    let hn = grid.cell_volume();
    let mut out = s.data;
    for_each_frequency(&grid, |k, xi| {
        let phase: f64 = xi.iter().map(|v| v * a).sum();
        out[k] *= Complex64::from_polar(hn, phase);
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::norm;

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = Grid::new(1, 8.0, 512).unwrap();
        let f = GridFunction::from_real_fn(g, |x| (-x[0] * x[0] / 2.0).exp());
        let t = transform(&f);
        let c = (2.0 * std::f64::consts::PI).sqrt();
        for k in 0..padded_len(&g) {
            let xi = frequency(&g, k);
            let exact = c * (-xi * xi / 2.0).exp();
            assert!((t[k] - exact).norm() < 1e-10, "k = {k}");
        }
    }

    #[test]
    fn identity_multiplier_round_trips_in_2d() {
        let g = Grid::new(2, 4.0, 32).unwrap();
        let f = GridFunction::from_real_fn(g, |x| (-norm(x, 2).powi(2)).exp() * (1.0 + x[0]));
        let back = Spectrum::new(&f).filtered(|_| Complex64::new(1.0, 0.0));
        let err = f.sub(&back).unwrap().max_abs();
        assert!(err < 1e-13);
    }

    #[test]
    fn convolution_theorem() {
        let g = Grid::new(1, 8.0, 256).unwrap();
        let f = GridFunction::from_real_fn(g, |x| (-x[0] * x[0]).exp());
        let h = GridFunction::from_real_fn(g, |x| (-(x[0] - 0.5).powi(2) * 3.0).exp() * x[0]);
        let c = convolve(&f, &h);
        let (tf, th, tc) = (transform(&f), transform(&h), transform(&c));
        let scale = tf.iter().zip(&th).map(|(a, b)| (a * b).norm()).fold(0.0, f64::max);
        for k in 0..padded_len(&g) {
            assert!((tc[k] - tf[k] * th[k]).norm() <= 1e-8 * scale);
        }
    }

    #[test]
    fn filter_transform_of_delta_is_flat() {
        let g = Grid::new(1, 1.0, 32).unwrap();
        let t = filter_transform(&g, 2, &[0.0, 0.0, 1.0, 0.0, 0.0]);
        for z in t {
            assert!((z - Complex64::new(g.spacing(), 0.0)).norm() < 1e-15);
        }
    }
}
