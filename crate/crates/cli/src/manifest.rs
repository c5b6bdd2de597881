//! Run manifests: JSON descriptions of a grid, exponents, weight, system
//! parameters and the suites to run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use varexp::exponent::{make_weight, verify_admissible};
use varexp::lp_analysis::{default_tau, make_admissible_pair, max_feasible_jmax, AdmissiblePair, Profile, SpaceKind};
use varexp::{io, Exponent, Grid, GridFunction, WeightKind, WeightSequence};

use crate::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "one")]
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

/// A number that may also be written as `"inf"`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum Num {
    Finite(f64),
    Text(String),
}

impl Num {
    fn value(&self) -> Result<f64, CliError> {
        match self {
            Num::Finite(v) => Ok(*v),
            Num::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "∞") => Ok(f64::INFINITY),
            Num::Text(s) => Err(CliError::manifest(format!("not a number: {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExponentSpec {
    Constant { value: Num },
    /// `left` for `x_1 < split`, `right` otherwise.
    TwoPiece { left: f64, right: f64, split: f64 },
    /// `base + (peak - base) exp(-|x - center|² / width²)`.
    Bump {
        base: f64,
        peak: f64,
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "unit")]
        width: f64,
    },
    /// Sampled values read with [`io::read_exponent_csv`].
    File { path: PathBuf },
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputSpec {
    /// `amplitude · exp(-|x - center|² / width²)`.
    Gaussian {
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "unit")]
        width: f64,
        #[serde(default = "unit")]
        amplitude: f64,
    },
    /// Gaussian envelope times `cos(frequency · x_1)`.
    WavePacket {
        #[serde(default)]
        center: Vec<f64>,
        #[serde(default = "unit")]
        width: f64,
        frequency: f64,
    },
    Zero,
    File { path: PathBuf },
}

impl Default for InputSpec {
    fn default() -> Self {
        InputSpec::Gaussian { center: Vec::new(), width: 1.0, amplitude: 1.0 }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    #[serde(default = "two")]
    pub k: usize,
    #[serde(default = "two")]
    pub l: usize,
    /// Atom support dilation; must be at least the one the system produces.
    #[serde(default)]
    pub d: Option<f64>,
    /// Molecule decay order.
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default = "half")]
    pub sigma: f64,
    #[serde(default = "six")]
    pub jmax: usize,
    #[serde(default)]
    pub tau: Option<f64>,
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec { k: 2, l: 2, d: None, m: None, sigma: 0.5, jmax: 6, tau: None }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub grid: GridSpec,
    #[serde(default = "default_p")]
    pub p: ExponentSpec,
    #[serde(default = "default_q")]
    pub q: ExponentSpec,
    /// Larger integrability exponent for the Nikolskii and Sobolev suites.
    #[serde(default)]
    pub p_target: Option<ExponentSpec>,
    #[serde(default = "default_weight")]
    pub weight: WeightKind,
    #[serde(default = "default_space")]
    pub space: SpaceKind,
    #[serde(default)]
    pub system: SystemSpec,
    #[serde(default = "default_profile")]
    pub profile: Profile,
    #[serde(default)]
    pub input: InputSpec,
    #[serde(default = "default_family")]
    pub family_size: usize,
    #[serde(default)]
    pub suites: Vec<String>,
    /// Overrides each suite's relative slack.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default = "unit")]
    pub c0: f64,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn six() -> usize {
    6
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_family() -> usize {
    12
}
fn default_p() -> ExponentSpec {
    ExponentSpec::Constant { value: Num::Finite(2.0) }
}
fn default_q() -> ExponentSpec {
    ExponentSpec::Constant { value: Num::Finite(2.0) }
}
fn default_weight() -> WeightKind {
    WeightKind::ConstantS { s: 0.0 }
}
fn default_space() -> SpaceKind {
    SpaceKind::B
}
fn default_profile() -> Profile {
    Profile::CosineBump
}

/// A manifest with every object built and every gate checked.
pub struct Run {
    pub manifest: RunManifest,
    pub hash: String,
    pub seed: u64,
    pub out: PathBuf,
    pub grid: Grid,
    pub p: Exponent,
    pub q: Exponent,
    pub p_target: Exponent,
    pub weight: WeightSequence,
    pub pair: AdmissiblePair,
    pub input: GridFunction,
    pub tau: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Run {
    pub fn load(path: &Path, out: Option<PathBuf>, seed: Option<u64>) -> Result<Run, CliError> {
        let bytes = fs::read(path).map_err(|e| CliError::manifest(format!("cannot read {}: {e}", path.display())))?;
        let manifest: RunManifest = serde_json::from_slice(&bytes).map_err(|e| CliError::manifest(e.to_string()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let out = out.or_else(|| manifest.output.as_ref().map(|o| base.join(o))).unwrap_or_else(|| PathBuf::from("varexp-out"));
        let seed = seed.unwrap_or(manifest.seed);
        Run::build(manifest, sha256_hex(&bytes), seed, out, &base)
    }

    fn build(manifest: RunManifest, hash: String, seed: u64, out: PathBuf, base: &Path) -> Result<Run, CliError> {
        let g = &manifest.grid;
        if !(1..=2).contains(&g.dim) {
            return Err(CliError::manifest(format!("grid dimension must be 1 or 2, got {}", g.dim)));
        }
        let grid = Grid::new(g.dim, g.half_width, g.points).map_err(CliError::gate)?;
        let sys = &manifest.system;
        let feasible = max_feasible_jmax(&grid);
        if feasible.is_none_or(|j| sys.jmax > j) {
            return Err(CliError::gate_msg(format!(
                "Jmax = {} is not resolved by N = {}; largest feasible Jmax is {}",
                sys.jmax,
                g.points,
                feasible.map_or("none".into(), |j| j.to_string())
            )));
        }
        if manifest.tolerance.is_some_and(|t| !t.is_finite()) {
            return Err(CliError::manifest("tolerance must be finite".into()));
        }
        if !(manifest.c0 > 0.0 && manifest.c0 <= 1.0) {
            return Err(CliError::manifest(format!("c0 must lie in (0, 1], got {}", manifest.c0)));
        }
        if sys.m.is_some_and(|m| !(m > 0.0)) || sys.d.is_some_and(|d| !(d > 1.0)) || !(sys.sigma > 0.0) {
            return Err(CliError::manifest("system parameters need M > 0, d > 1 and σ > 0".into()));
        }
        let p = build_exponent(&manifest.p, &grid, base)?;
        let q = build_exponent(&manifest.q, &grid, base)?;
        let p_target = match &manifest.p_target {
            Some(spec) => build_exponent(spec, &grid, base)?,
            None => p.map(|v| v + 1.0).map_err(CliError::gate)?,
        };
        let (ps, ts) = (p.samples(&grid), p_target.samples(&grid));
        if ps.iter().zip(&ts).any(|(a, b)| a > b) {
            return Err(CliError::gate_msg("p_target must dominate p pointwise".into()));
        }
        let weight = make_weight(&manifest.weight, &grid, sys.jmax).map_err(CliError::gate)?;
        let adm = verify_admissible(&weight).map_err(CliError::gate)?;
        if !adm.passed {
            return Err(CliError::gate_msg(format!(
                "weight fails the admissibility check (empirical constant {} against declared {})",
                adm.c_empirical, adm.c_declared
            )));
        }
        let pair = make_admissible_pair(manifest.profile, None).map_err(CliError::gate)?;
        let input = build_input(&manifest.input, &grid, base)?;
        let tau = sys.tau.unwrap_or_else(|| default_tau(grid.dim(), &p, &q, weight.alpha()));
        Ok(Run { manifest, hash, seed, out, grid, p, q, p_target, weight, pair, input, tau })
    }
}

fn centered(center: &[f64], n: usize) -> Result<[f64; 2], CliError> {
    match center.len() {
        0 => Ok([0.0; 2]),
        l if l == n => Ok([center[0], center.get(1).copied().unwrap_or(0.0)]),
        l => Err(CliError::manifest(format!("center has {l} coordinates on a {n}-dimensional grid"))),
    }
}

fn dist2(x: &[f64], c: [f64; 2], n: usize) -> f64 {
    (0..n).map(|i| (x[i] - c[i]).powi(2)).sum()
}

fn build_exponent(spec: &ExponentSpec, grid: &Grid, base: &Path) -> Result<Exponent, CliError> {
    let n = grid.dim();
    let p = match spec {
        ExponentSpec::Constant { value } => Exponent::constant(value.value()?),
        ExponentSpec::TwoPiece { left, right, split } => Exponent::two_piece(grid, *left, *right, *split),
        ExponentSpec::Bump { base: b, peak, center, width } => {
            let (b, peak, w) = (*b, *peak, *width);
            if !(w > 0.0) {
                return Err(CliError::manifest(format!("bump width must be positive, got {w}")));
            }
            let c = centered(center, n)?;
            Exponent::from_fn(grid, move |x| b + (peak - b) * (-dist2(x, c, n) / (w * w)).exp())
        }
        ExponentSpec::File { path } => io::read_exponent_csv(&base.join(path), grid),
    };
    p.map_err(CliError::gate)
}

fn build_input(spec: &InputSpec, grid: &Grid, base: &Path) -> Result<GridFunction, CliError> {
    let n = grid.dim();
    let f = match spec {
        InputSpec::Gaussian { center, width, amplitude } => {
            let (c, w, a) = (centered(center, n)?, *width, *amplitude);
            GridFunction::from_real_fn(*grid, |x| a * (-dist2(x, c, n) / (w * w)).exp())
        }
        InputSpec::WavePacket { center, width, frequency } => {
            let (c, w, k) = (centered(center, n)?, *width, *frequency);
            GridFunction::from_real_fn(*grid, |x| (-dist2(x, c, n) / (w * w)).exp() * (k * x[0]).cos())
        }
        InputSpec::Zero => GridFunction::zeros(*grid),
        InputSpec::File { path } => {
            let f = io::read_grid_function(&base.join(path)).map_err(CliError::gate)?;
            f.grid().check_same(grid).map_err(CliError::gate)?;
            f
        }
    };
    f.check_decay().map_err(CliError::gate)?;
    Ok(f)
}
