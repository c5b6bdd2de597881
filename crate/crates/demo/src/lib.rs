//! Browser bindings: a Luxemburg norm explorer, Littlewood–Paley blocks and
//! the reconstruction error of the atomic decomposition.

use varexp::decomp::{analyze, level_sums, make_reproducing_system};
use varexp::lp_analysis::{lp_blocks, make_admissible_pair, Profile};
use varexp::modular::{luxemburg_norm, semimodular, DEFAULT_REL_TOL};
use varexp::{Exponent, Grid, GridFunction};
use wasm_bindgen::prelude::*;

/// Samples kept for plotting.
const PLOT_POINTS: usize = 256;

fn explorer_grid() -> Grid {
    Grid::new(1, 8.0, 1024).expect("fixed grid")
}

fn every_nth(values: &[f64]) -> Vec<f64> {
    let step = (values.len() / PLOT_POINTS).max(1);
    values.iter().step_by(step).copied().collect()
}

fn js_err(e: varexp::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct LuxemburgView {
    norm: f64,
    modular: f64,
    x: Vec<f64>,
    f: Vec<f64>,
    p: Vec<f64>,
    lambdas: Vec<f64>,
    modulars: Vec<f64>,
}

#[wasm_bindgen]
impl LuxemburgView {
    #[wasm_bindgen(getter)]
    pub fn norm(&self) -> f64 {
        self.norm
    }
    #[wasm_bindgen(getter)]
    pub fn modular(&self) -> f64 {
        self.modular
    }
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn f(&self) -> Vec<f64> {
        self.f.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn p(&self) -> Vec<f64> {
        self.p.clone()
    }
    /// Scales `λ` on a log grid around the norm.
    #[wasm_bindgen(getter)]
    pub fn lambdas(&self) -> Vec<f64> {
        self.lambdas.clone()
    }
    /// `ρ(f/λ)` at each of [`lambdas`](Self::lambdas).
    #[wasm_bindgen(getter)]
    pub fn modulars(&self) -> Vec<f64> {
        self.modulars.clone()
    }
}

/// `f = amplitude · exp(-x²/width²)` against `p = p_left` on `x < split`, `p_right` beyond.
pub fn luxemburg_view(p_left: f64, p_right: f64, split: f64, amplitude: f64, width: f64) -> varexp::Result<LuxemburgView> {
    if !(width > 0.0) {
        return Err(varexp::Error::Domain(format!("width must be positive, got {width}")));
    }
    let g = explorer_grid();
    let p = Exponent::two_piece(&g, p_left, p_right, split)?;
    let f = GridFunction::from_real_fn(g, |x| amplitude * (-x[0] * x[0] / (width * width)).exp());
    let norm = luxemburg_norm(&f, &p, DEFAULT_REL_TOL)?.value;
    let modular = semimodular(&f, &p);
    let (lambdas, modulars) = if norm > 0.0 {
        (0..64)
            .map(|i| {
                let lam = norm * 4f64.powf(i as f64 / 31.5 - 1.0);
                (lam, semimodular(&f.scale(1.0 / lam), &p))
            })
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    let x: Vec<f64> = (0..g.len()).map(|k| g.point(k)[0]).collect();
    Ok(LuxemburgView {
        norm,
        modular,
        x: every_nth(&x),
        f: every_nth(&f.abs()),
        p: every_nth(&p.samples(&g)),
        lambdas,
        modulars,
    })
}

#[wasm_bindgen]
pub fn luxemburg(p_left: f64, p_right: f64, split: f64, amplitude: f64, width: f64) -> Result<LuxemburgView, JsError> {
    luxemburg_view(p_left, p_right, split, amplitude, width).map_err(js_err)
}

#[wasm_bindgen]
pub struct BlocksView {
    x: Vec<f64>,
    blocks: Vec<f64>,
    levels: usize,
    residual: f64,
}

#[wasm_bindgen]
impl BlocksView {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }
    /// Real parts of `φ_j * f`, level after level, each as long as [`x`](Self::x).
    #[wasm_bindgen(getter)]
    pub fn blocks(&self) -> Vec<f64> {
        self.blocks.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn levels(&self) -> usize {
        self.levels
    }
    /// `sup |Σ_j φ_j * f - f|`.
    #[wasm_bindgen(getter)]
    pub fn residual(&self) -> f64 {
        self.residual
    }
}

/// Blocks of the wave packet `exp(-x²/width²) cos(frequency · x)`.
pub fn blocks_view(width: f64, frequency: f64, jmax: usize) -> varexp::Result<BlocksView> {
    if !(width > 0.0) {
        return Err(varexp::Error::Domain(format!("width must be positive, got {width}")));
    }
    let g = explorer_grid();
    let f = GridFunction::from_real_fn(g, |x| (-x[0] * x[0] / (width * width)).exp() * (frequency * x[0]).cos());
    let pair = make_admissible_pair(Profile::CosineBump, None)?;
    let seq = lp_blocks(&f, &pair, jmax)?;
    let mut sum = GridFunction::zeros(g);
    let mut blocks = Vec::new();
    for b in seq.entries() {
        sum = sum.add(b)?;
        let re: Vec<f64> = b.samples().iter().map(|v| v.re).collect();
        blocks.extend(every_nth(&re));
    }
    let x: Vec<f64> = (0..g.len()).map(|k| g.point(k)[0]).collect();
    Ok(BlocksView { x: every_nth(&x), blocks, levels: jmax + 1, residual: sum.sub(&f)?.max_abs() })
}

#[wasm_bindgen]
pub fn blocks(width: f64, frequency: f64, jmax: usize) -> Result<BlocksView, JsError> {
    blocks_view(width, frequency, jmax).map_err(js_err)
}

/// Relative sup error of `Σ_{j <= Jcut} Σ_m λ_{jm} a_{jm}` against a Gaussian
/// of the given width, for `Jcut = 0..=jmax`.
pub fn reconstruction_errors(width: f64, jmax: usize) -> varexp::Result<Vec<f64>> {
    if !(width > 0.0) {
        return Err(varexp::Error::Domain(format!("width must be positive, got {width}")));
    }
    let g = Grid::new(1, 16.0, 4096)?;
    let f = GridFunction::from_real_fn(g, |x| (-x[0] * x[0] / (width * width)).exp());
    let sys = make_reproducing_system(2, 0.5, jmax, &g)?;
    let (lam, fam) = analyze(&f, &sys, 2, jmax)?;
    let mut partial = GridFunction::zeros(g);
    let mut errors = Vec::new();
    for level in level_sums(&lam, &fam)? {
        partial = partial.add(&level)?;
        errors.push(f.sub(&partial)?.max_abs() / f.max_abs());
    }
    Ok(errors)
}

#[wasm_bindgen]
pub fn reconstruction(width: f64, jmax: usize) -> Result<Vec<f64>, JsError> {
    reconstruction_errors(width, jmax).map_err(js_err)
}
