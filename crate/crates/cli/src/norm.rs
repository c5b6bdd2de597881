use serde::Serialize;
use varexp::atoms::seq_norm;
use varexp::decomp::{analyze, make_reproducing_system};
use varexp::lp_analysis::{peetre_maximal, space_norm_of, weighted_blocks, SpaceKind};
use varexp::mixed::{norm_lp_lq, norm_lq_lp};
use varexp::modular::{lp_norm, luxemburg_norm, NormResult, DEFAULT_REL_TOL};

use crate::manifest::Run;
use crate::report::{self, num, ser_num};
use crate::{check_suites, create_out, plot, CliError, Outcome};

pub const SUITES: &[&str] = &["lp", "mixed", "space", "sequence", "peetre"];

#[derive(Serialize)]
struct Entry {
    name: String,
    #[serde(serialize_with = "ser_num")]
    value: f64,
    #[serde(serialize_with = "ser_num")]
    lower: f64,
    #[serde(serialize_with = "ser_num")]
    upper: f64,
    iterations: usize,
}

impl Entry {
    fn from_result(name: impl Into<String>, r: NormResult) -> Entry {
        Entry { name: name.into(), value: r.value, lower: r.bracket.0, upper: r.bracket.1, iterations: r.iterations }
    }
}

#[derive(Serialize)]
struct NormReport<'a> {
    command: &'static str,
    manifest_sha256: &'a str,
    seed: u64,
    grid: [String; 3],
    norms: Vec<Entry>,
}

fn kind_name(kind: SpaceKind) -> &'static str {
    match kind {
        SpaceKind::B => "B",
        SpaceKind::F => "F",
    }
}

pub fn run(run: &Run, plots: bool) -> Result<Outcome, CliError> {
    check_suites(run, SUITES)?;
    if run.manifest.suites.is_empty() {
        return Ok(Outcome::Done);
    }
    let (f, p, q, w) = (&run.input, &run.p, &run.q, &run.weight);
    let sys = &run.manifest.system;
    let mut norms = Vec::new();
    let mut levels = None;
    for suite in &run.manifest.suites {
        match suite.as_str() {
            "lp" => norms.push(Entry::from_result("lp", luxemburg_norm(f, p, DEFAULT_REL_TOL)?)),
            "mixed" => {
                let blocks = weighted_blocks(f, w, &run.pair)?;
                norms.push(Entry::from_result("lq_lp", norm_lq_lp(&blocks, p, q)?));
                norms.push(Entry::from_result("lp_lq", norm_lp_lq(&blocks, p, q)?));
            }
            "space" => {
                let kind = run.manifest.space;
                let s = space_norm_of(f, w, p, q, &run.pair, kind)?;
                norms.push(Entry { name: kind_name(kind).into(), value: s.value, lower: s.bracket.0, upper: s.bracket.1, iterations: s.iterations });
                let blocks = weighted_blocks(f, w, &run.pair)?;
                levels = Some(blocks.entries().iter().map(|b| lp_norm(b, p)).collect::<varexp::Result<Vec<_>>>()?);
            }
            "sequence" => {
                let rs = make_reproducing_system(sys.l, sys.sigma, sys.jmax, &run.grid).map_err(CliError::gate)?;
                let (lam, _) = analyze(f, &rs, sys.k, sys.jmax)?;
                let kind = run.manifest.space;
                let name = format!("{}_sequence", kind_name(kind).to_lowercase());
                norms.push(Entry::from_result(name, seq_norm(&lam, w, p, q, kind)?));
            }
            "peetre" => {
                for j in 0..=sys.jmax {
                    let m = peetre_maximal(f, &run.pair, j, run.tau)?;
                    let v = lp_norm(&m, p)?;
                    norms.push(Entry { name: format!("peetre_j{j}"), value: v, lower: v, upper: v, iterations: 0 });
                }
            }
            _ => unreachable!("suite names checked"),
        }
    }
    create_out(run)?;
    let g = &run.grid;
    let rep = NormReport {
        command: "norm",
        manifest_sha256: &run.hash,
        seed: run.seed,
        grid: [g.dim().to_string(), num(g.half_width()), g.points_per_axis().to_string()],
        norms,
    };
    let rows: Vec<Vec<String>> =
        rep.norms.iter().map(|e| vec![e.name.clone(), num(e.value), num(e.lower), num(e.upper), e.iterations.to_string()]).collect();
    report::write(&run.out.join("norms.csv"), &report::table_csv(&["name", "value", "lower", "upper", "iterations"], &rows)?)?;
    report::write(&run.out.join("norms.json"), &report::json_bytes(&rep)?)?;
    if plots {
        if let Some(levels) = levels {
            plot::level_norms(&run.out.join("levels.svg"), &levels)?;
        }
    }
    Ok(Outcome::Done)
}
