//! File formats: grid functions, coefficient fields, atom families, pairs and
//! sampled exponents.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::atoms::{AtomFamily, CoeffField, LocalFunction};
use crate::error::{Error, Result};
use crate::exponent::Exponent;
use crate::grid::{Grid, GridFunction};
use crate::lp_analysis::AdmissiblePair;

/// Write `bytes` to a sibling temporary file and rename it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().ok_or_else(|| Error::Data(format!("not a file path: {}", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn csv_bytes(header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn samples_to_string(grid: &Grid, rows: impl Iterator<Item = (usize, Complex64)>) -> Result<String> {
    let mut out = format!("# {} {} {}\n", grid.dim(), grid.half_width(), grid.points_per_axis());
    let rows = rows.map(|(i, v)| vec![i.to_string(), v.re.to_string(), v.im.to_string()]);
    let body = csv_bytes(&["index".into(), "real".into(), "imag".into()], rows)?;
    out.push_str(std::str::from_utf8(&body).expect("csv writer emits utf-8"));
    Ok(out)
}

pub fn grid_function_to_string(f: &GridFunction) -> Result<String> {
    samples_to_string(f.grid(), f.samples().iter().copied().enumerate())
}

/// CSV with header line `# n A N`, then `index,real,imag` per sample.
pub fn write_grid_function(path: &Path, f: &GridFunction) -> Result<()> {
    write_atomic(path, grid_function_to_string(f)?.as_bytes())
}

/// Header grid and the `(index, value)` rows, in file order.
fn read_samples(path: &Path) -> Result<(Grid, Vec<(usize, Complex64)>)> {
    let file = fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let parts: Vec<&str> = first.trim().trim_start_matches('#').split_whitespace().collect();
    let bad = || Error::Parse(format!("{}: expected header `# n A N`, got {:?}", path.display(), first.trim()));
    if !first.starts_with('#') || parts.len() != 3 {
        return Err(bad());
    }
    let n: usize = parts[0].parse().map_err(|_| bad())?;
    let a: f64 = parts[1].parse().map_err(|_| bad())?;
    let points: usize = parts[2].parse().map_err(|_| bad())?;
    let grid = Grid::new(n, a, points)?;
    let mut rows = Vec::new();
    let mut rdr = csv::Reader::from_reader(reader);
    for rec in rdr.deserialize::<(usize, f64, f64)>() {
        let (i, re, im) = rec?;
        if i >= grid.len() {
            return Err(Error::Data(format!("{}: index {i} outside a grid of {} samples", path.display(), grid.len())));
        }
        rows.push((i, Complex64::new(re, im)));
    }
    Ok((grid, rows))
}

pub fn read_grid_function(path: &Path) -> Result<GridFunction> {
    let (grid, rows) = read_samples(path)?;
    let mut samples = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut seen = vec![false; grid.len()];
    for (i, v) in rows {
        samples[i] = v;
        seen[i] = true;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Data(format!("{}: sample {i} missing", path.display())));
    }
    GridFunction::new(grid, samples)
}

fn coeff_header(n: usize) -> Vec<String> {
    let mut h = vec!["j".to_string()];
    h.extend((1..=n).map(|a| format!("m{a}")));
    h.extend(["real".to_string(), "imag".to_string()]);
    h
}

pub fn coeff_field_to_string(lam: &CoeffField) -> Result<String> {
    let rows = lam.entries.iter().map(|((j, m), v)| {
        let mut r = vec![j.to_string()];
        r.extend(m[..lam.n].iter().map(|c| c.to_string()));
        r.extend([v.re.to_string(), v.im.to_string()]);
        r
    });
    Ok(String::from_utf8(csv_bytes(&coeff_header(lam.n), rows)?).expect("csv writer emits utf-8"))
}

/// Rows `j, m_1[, m_2], real, imag` in cube order.
pub fn write_coeff_field(path: &Path, lam: &CoeffField) -> Result<()> {
    write_atomic(path, coeff_field_to_string(lam)?.as_bytes())
}

/// Reads a coefficient field; `jmax` defaults to the largest level present.
pub fn read_coeff_field(path: &Path, jmax: Option<usize>) -> Result<CoeffField> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let n = match header.len() {
        4 => 1,
        5 => 2,
        k => return Err(Error::Parse(format!("{}: expected 4 or 5 columns, got {k}", path.display()))),
    };
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i].trim().parse().map_err(|_| Error::Parse(format!("{}: bad number {:?}", path.display(), &rec[i])))
        };
        let int = |i: usize| -> Result<i64> {
            rec[i].trim().parse().map_err(|_| Error::Parse(format!("{}: bad integer {:?}", path.display(), &rec[i])))
        };
        let j = int(0)?;
        if j < 0 {
            return Err(Error::Data(format!("{}: negative level {j}", path.display())));
        }
        let m = [int(1)?, if n == 2 { int(2)? } else { 0 }];
        rows.push((j as usize, m, Complex64::new(num(n + 1)?, num(n + 2)?)));
    }
    let top = rows.iter().map(|r| r.0).max().unwrap_or(0);
    let jmax = jmax.unwrap_or(top);
    if top > jmax {
        return Err(Error::Data(format!("{}: level {top} exceeds Jmax = {jmax}", path.display())));
    }
    let mut lam = CoeffField::new(n, jmax);
    for (j, m, v) in rows {
        lam.insert(j, m, v)?;
    }
    Ok(lam)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AtomIndexEntry {
    j: usize,
    m: [i64; 2],
    file: String,
    start: [usize; 2],
    shape: [usize; 2],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AtomIndex {
    grid: Grid,
    k: usize,
    l: usize,
    d: f64,
    members: Vec<AtomIndexEntry>,
}

fn atom_file(j: usize, m: [i64; 2], n: usize) -> String {
    let ms: Vec<String> = m[..n].iter().map(|c| c.to_string()).collect();
    format!("atom_j{}_m{}.csv", j, ms.join("_"))
}

/// Flat grid indices of a patch, in storage order.
fn patch_indices(grid: &Grid, start: [usize; 2], shape: [usize; 2]) -> impl Iterator<Item = usize> + '_ {
    (0..shape[0]).flat_map(move |s0| (0..shape[1]).map(move |s1| grid.flatten([start[0] + s0, start[1] + s1])))
}

/// One file per atom holding its patch in the grid-function format, plus `index.json`.
pub fn write_atom_family(dir: &Path, fam: &AtomFamily) -> Result<()> {
    fs::create_dir_all(dir)?;
    let n = fam.grid.dim();
    let mut members = Vec::new();
    for ((j, m), a) in &fam.members {
        let file = atom_file(*j, *m, n);
        let rows = patch_indices(&fam.grid, a.start, a.shape).zip(a.samples.iter().copied());
        write_atomic(&dir.join(&file), samples_to_string(&fam.grid, rows)?.as_bytes())?;
        members.push(AtomIndexEntry { j: *j, m: *m, file, start: a.start, shape: a.shape });
    }
    let index = AtomIndex { grid: fam.grid, k: fam.k, l: fam.l, d: fam.d, members };
    write_atomic(&dir.join("index.json"), serde_json::to_string_pretty(&index)?.as_bytes())
}

pub fn read_atom_family(dir: &Path) -> Result<AtomFamily> {
    let index: AtomIndex = serde_json::from_slice(&fs::read(dir.join("index.json"))?)?;
    let mut fam = AtomFamily { grid: index.grid, k: index.k, l: index.l, d: index.d, members: Default::default() };
    for e in index.members {
        let path = dir.join(&e.file);
        let (g, rows) = read_samples(&path)?;
        index.grid.check_same(&g)?;
        let values: std::collections::HashMap<usize, Complex64> = rows.into_iter().collect();
        let samples = patch_indices(&g, e.start, e.shape)
            .map(|i| values.get(&i).copied().ok_or_else(|| Error::Data(format!("{}: patch sample {i} missing", path.display()))))
            .collect::<Result<Vec<_>>>()?;
        fam.members.insert((e.j, e.m), LocalFunction::new(index.grid, e.start, e.shape, samples)?);
    }
    Ok(fam)
}

/// Rows `xi, Phi_hat, phi_hat` on `count` radii evenly spaced in `[0, xi_max]`.
pub fn write_pair_csv(path: &Path, pair: &AdmissiblePair, xi_max: f64, count: usize) -> Result<()> {
    let rows = (0..count).map(|i| {
        let r = if count > 1 { xi_max * i as f64 / (count - 1) as f64 } else { 0.0 };
        vec![r.to_string(), pair.big_phi_hat(r).to_string(), pair.phi_hat(r).to_string()]
    });
    write_atomic(path, &csv_bytes(&["xi".into(), "Phi_hat".into(), "phi_hat".into()], rows)?)
}

/// Rows `x_1[, x_2], p` at the grid points; `inf` for `p = ∞`.
pub fn write_exponent_csv(path: &Path, p: &Exponent, grid: &Grid) -> Result<()> {
    let n = grid.dim();
    let samples = p.samples(grid);
    let rows = samples.iter().enumerate().map(|(k, v)| {
        let x = grid.point(k);
        let mut r: Vec<String> = x[..n].iter().map(|c| c.to_string()).collect();
        r.push(v.to_string());
        r
    });
    let mut header: Vec<String> = (1..=n).map(|a| format!("x{a}")).collect();
    header.push("p".into());
    write_atomic(path, &csv_bytes(&header, rows)?)
}

/// Sampled exponent from rows `x_1[, x_2], p`. In one dimension values are
/// interpolated linearly and held constant past the ends; in two dimensions every
/// grid point must appear.
pub fn read_exponent_csv(path: &Path, grid: &Grid) -> Result<Exponent> {
    let n = grid.dim();
    let mut rdr = csv::Reader::from_path(path)?;
    let width = rdr.headers()?.len();
    if width != n + 1 {
        return Err(Error::Parse(format!("{}: expected {} columns for n = {n}, got {width}", path.display(), n + 1)));
    }
    let mut rows: Vec<([f64; 2], f64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut v = [0.0; 3];
        for (i, slot) in v.iter_mut().enumerate().take(n + 1) {
            *slot = rec[i].trim().parse().map_err(|_| Error::Parse(format!("{}: bad number {:?}", path.display(), &rec[i])))?;
        }
        rows.push(([v[0], if n == 2 { v[1] } else { 0.0 }], v[n]));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let values = if n == 1 {
        rows.sort_by(|a, b| a.0[0].total_cmp(&b.0[0]));
        (0..grid.len())
            .map(|k| {
                let x = grid.point(k)[0];
                let i = rows.partition_point(|r| r.0[0] <= x);
                if i == 0 {
                    rows[0].1
                } else if i == rows.len() {
                    rows[i - 1].1
                } else {
                    let (a, b) = (&rows[i - 1], &rows[i]);
                    let t = (x - a.0[0]) / (b.0[0] - a.0[0]);
                    if a.1.is_infinite() || b.1.is_infinite() {
                        if t < 0.5 { a.1 } else { b.1 }
                    } else {
                        a.1 + t * (b.1 - a.1)
                    }
                }
            })
            .collect()
    } else {
        let mut values = vec![f64::NAN; grid.len()];
        let tol = 0.25 * grid.spacing();
        for (x, v) in &rows {
            let k = grid.nearest(x);
            let y = grid.point(k);
            if (y[0] - x[0]).abs() > tol || (y[1] - x[1]).abs() > tol {
                return Err(Error::Data(format!("{}: point {x:?} is not a grid point", path.display())));
            }
            values[k] = *v;
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Data(format!("{}: grid point {:?} has no value", path.display(), grid.point(k))));
        }
        values
    };
    Exponent::from_samples(grid, values)
}

/// Files written under `dir` by a run, relative to it.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d)? {
            let p = e?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(dir).expect("under dir").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::{analyze, make_reproducing_system};

    #[test]
    fn grid_function_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for g in [Grid::new(1, 3.0, 64).unwrap(), Grid::new(2, 2.0, 16).unwrap()] {
            let f = GridFunction::from_fn(g, |x| Complex64::new((-x[0] * x[0]).exp() / 3.0, x.iter().sum::<f64>().sin()));
            let path = dir.path().join(format!("f{}.csv", g.dim()));
            write_grid_function(&path, &f).unwrap();
            let back = read_grid_function(&path).unwrap();
            assert_eq!(back, f);
        }
        let bad = dir.path().join("bad.csv");
        fs::write(&bad, "n A N\nindex,real,imag\n").unwrap();
        assert_eq!(read_grid_function(&bad).unwrap_err().kind(), "parse");
        fs::write(&bad, "# 1 1 16\nindex,real,imag\n0,1,0\n").unwrap();
        assert_eq!(read_grid_function(&bad).unwrap_err().kind(), "data");
    }

    #[test]
    fn coeff_and_atoms_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1, 16.0, 4096).unwrap();
        let sys = make_reproducing_system(0, 0.5, 3, &g).unwrap();
        let f = GridFunction::from_real_fn(g, |x| (-x[0] * x[0] / 0.25).exp());
        let (lam, fam) = analyze(&f, &sys, 1, 3).unwrap();
        let cpath = dir.path().join("lam.csv");
        write_coeff_field(&cpath, &lam).unwrap();
        let back = read_coeff_field(&cpath, Some(3)).unwrap();
        assert_eq!(back.entries, lam.entries);
        assert_eq!(back.jmax, 3);

        let adir = dir.path().join("atoms");
        write_atom_family(&adir, &fam).unwrap();
        let fam2 = read_atom_family(&adir).unwrap();
        assert_eq!(fam2.members.len(), fam.members.len());
        for (k, a) in &fam.members {
            let b = &fam2.members[k];
            assert_eq!((a.start, a.shape), (b.start, b.shape));
            assert_eq!(a.samples, b.samples);
        }
    }

    #[test]
    fn exponent_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid::new(1, 2.0, 32).unwrap();
        let p = Exponent::from_fn(&g, |x| 2.0 + x[0].sin()).unwrap();
        let path = dir.path().join("p.csv");
        write_exponent_csv(&path, &p, &g).unwrap();
        let q = read_exponent_csv(&path, &g).unwrap();
        assert_eq!(q.samples(&g), p.samples(&g));
        let g2 = Grid::new(2, 1.0, 16).unwrap();
        let p2 = Exponent::from_fn(&g2, |x| 1.5 + x[0] * x[0] + x[1].abs()).unwrap();
        write_exponent_csv(&path, &p2, &g2).unwrap();
        assert_eq!(read_exponent_csv(&path, &g2).unwrap().samples(&g2), p2.samples(&g2));
        assert!(read_exponent_csv(&path, &g).is_err());
    }
}
