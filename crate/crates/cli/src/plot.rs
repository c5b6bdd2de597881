//! SVG plots, only written with `--plots`.

use std::collections::BTreeMap;
use std::path::Path;

use plotters::prelude::*;

use crate::CliError;

fn draw_err<E: std::fmt::Debug>(e: E) -> CliError {
    CliError::internal(format!("plot: {e:?}"))
}

/// Log-scale curve of `(x, y)` points; non-positive values are dropped.
fn semilog(path: &Path, title: &str, x_desc: &str, y_desc: &str, points: &[(f64, f64)]) -> Result<(), CliError> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|(_, y)| *y > 0.0 && y.is_finite()).collect();
    if pts.is_empty() {
        return Ok(());
    }
    let x_max = pts.iter().map(|p| p.0).fold(1.0, f64::max);
    let y_min = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let y_max = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(64)
        .build_cartesian_2d(0.0..x_max, (y_min / 2.0..y_max * 2.0).log_scale())
        .map_err(draw_err)?;
    chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(draw_err)?;
    chart.draw_series(LineSeries::new(pts.iter().copied(), &BLUE)).map_err(draw_err)?;
    chart.draw_series(pts.iter().map(|p| Circle::new(*p, 3, BLUE.filled()))).map_err(draw_err)?;
    root.present().map_err(draw_err)
}

/// Relative reconstruction error against the level cut-off.
pub fn convergence(path: &Path, errors: &BTreeMap<usize, f64>) -> Result<(), CliError> {
    let pts: Vec<(f64, f64)> = errors.iter().map(|(j, e)| (*j as f64, *e)).collect();
    semilog(path, "reconstruction error", "Jcut", "relative sup error", &pts)
}

/// `‖w_j (φ_j * f) | L_p‖` per level.
pub fn level_norms(path: &Path, levels: &[f64]) -> Result<(), CliError> {
    let pts: Vec<(f64, f64)> = levels.iter().enumerate().map(|(j, v)| (j as f64, *v)).collect();
    semilog(path, "weighted block norms", "j", "norm", &pts)
}
