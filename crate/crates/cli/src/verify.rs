use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use varexp::atoms::MOMENT_TOL;
use varexp::decomp::{analyze, make_reproducing_system, standard_family};
use varexp::embeddings::{nikolskii_variable_q, random_coeffs, random_level_coeffs, sobolev_partner_weight, sobolev_seq_embed};
use varexp::lp_analysis::weighted_blocks;
use varexp::mixed::{check_embeddings, check_unit_ball_lq_lp, norm_modular_estimate, FunctionSequence};
use varexp::modular::{check_unit_ball, holder_check, norm_modular_bounds, UnitBallReport};
use varexp::GridFunction;

use crate::manifest::Run;
use crate::report::{self, Row};
use crate::{check_suites, create_out, CliError, Outcome};

pub const SUITES: &[&str] = &[
    "unit_ball",
    "norm_modular",
    "holder",
    "mixed_unit_ball",
    "mixed_norm_modular",
    "mixed_embedding",
    "nikolskii",
    "sobolev",
    "atoms",
];

const DEFAULT_TOL: f64 = 1e-9;

fn anchor(suite: &str) -> &'static str {
    match suite {
        "unit_ball" => "unit ball property of the Luxemburg norm",
        "norm_modular" => "norm-modular inequality in L_p(.)",
        "holder" => "Hölder inequality with constant 2",
        "mixed_unit_ball" => "unit ball property of l_q(.)(L_p(.))",
        "mixed_norm_modular" => "norm-modular inequality in l_q(.)(L_p(.))",
        "mixed_embedding" => "monotonicity of mixed norms in q",
        "nikolskii" => "Nikolskii inequality for step functions with variable q",
        "sobolev" => "Sobolev embedding of sequence spaces",
        "atoms" => "support, smoothness and moment conditions of atoms",
        _ => unreachable!("suite names checked"),
    }
}

/// Rows for one suite, or the reason it made no claims.
struct SuiteResult {
    name: String,
    rows: Vec<Row>,
    skipped: Option<String>,
}

#[derive(Serialize)]
struct SuiteSummary<'a> {
    name: &'a str,
    anchor: &'static str,
    file: String,
    cases: usize,
    failures: usize,
    skipped: Option<&'a str>,
}

#[derive(Serialize)]
struct Failure<'a> {
    suite: &'a str,
    #[serde(flatten)]
    row: &'a Row,
}

#[derive(Serialize)]
struct Summary<'a> {
    command: &'static str,
    manifest_sha256: &'a str,
    seed: u64,
    tolerance: Option<f64>,
    passed: bool,
    suites: Vec<SuiteSummary<'a>>,
    failures: Vec<Failure<'a>>,
}

/// Seeded family with amplitudes spread over `[10^{-0.7}, 10^{0.7}]` so both
/// sides of the unit sphere are hit.
fn family(run: &Run) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(run.seed.wrapping_add(1));
    standard_family(&run.grid, run.seed, run.manifest.family_size)
        .into_iter()
        .map(|f| f.scale(10f64.powf(rng.gen_range(-0.7..0.7))))
        .collect()
}

fn unit_ball_row(case: String, r: &UnitBallReport, tol: f64, anchor: &'static str) -> Row {
    let witness = format!("modular={:e} norm={:e}", r.modular, r.norm);
    if r.inconclusive {
        Row::vacuous(case, r.norm, 1.0, anchor, format!("{witness} (within the excluded band)"))
    } else if r.modular_le_one {
        Row::new(case, r.norm, 1.0, tol, anchor, witness)
    } else {
        Row::new(case, 1.0, r.norm, tol, anchor, witness)
    }
}

fn run_suite(name: &str, run: &Run, fam: &[GridFunction], tol: f64) -> varexp::Result<Vec<Row>> {
    let (p, q, w) = (&run.p, &run.q, &run.weight);
    let a = anchor(name);
    let sys = &run.manifest.system;
    let mut rows = Vec::new();
    let sequences = || -> varexp::Result<Vec<FunctionSequence>> { fam.iter().map(|f| weighted_blocks(f, w, &run.pair)).collect() };
    match name {
        "unit_ball" => {
            for (i, f) in fam.iter().enumerate() {
                rows.push(unit_ball_row(format!("f{i}"), &check_unit_ball(f, p)?, tol, a));
            }
        }
        "norm_modular" => {
            for (i, f) in fam.iter().enumerate() {
                let r = norm_modular_bounds(f, p)?;
                let witness = format!("modular={:e}", r.modular);
                if r.skipped {
                    rows.push(Row::vacuous(format!("f{i}"), r.norm, r.upper, a, "outside the hypothesis"));
                    continue;
                }
                rows.push(Row::new(format!("f{i}.upper"), r.norm, r.upper, tol, a, witness.clone()));
                rows.push(Row::new(format!("f{i}.lower"), r.lower, r.norm, tol, a, witness));
            }
        }
        "holder" => {
            for (i, pair) in fam.windows(2).enumerate() {
                let r = holder_check(&pair[0], &pair[1], p)?;
                let witness = format!("norm_f={:e} norm_g={:e}", r.norm_f, r.norm_g);
                rows.push(Row::new(format!("f{i}*f{}", i + 1), r.lhs, r.rhs, tol, a, witness));
            }
        }
        "mixed_unit_ball" => {
            for (i, s) in sequences()?.iter().enumerate() {
                rows.push(unit_ball_row(format!("f{i}"), &check_unit_ball_lq_lp(s, p, q)?, tol, a));
            }
        }
        "mixed_norm_modular" => {
            for (i, s) in sequences()?.iter().enumerate() {
                let r = norm_modular_estimate(s, p, q)?;
                if r.skipped {
                    rows.push(Row::vacuous(format!("f{i}"), r.norm, r.bound, a, "outside the hypothesis"));
                } else {
                    rows.push(Row::new(format!("f{i}"), r.norm, r.bound, tol, a, format!("modular={:e}", r.modular)));
                }
            }
        }
        "mixed_embedding" => {
            let q1 = q.map(|v| v + 1.0)?;
            for (i, s) in sequences()?.iter().enumerate() {
                let r = check_embeddings(s, p, q, &q1)?;
                rows.push(Row::new(format!("f{i}.lq_lp"), r.lq_lp_ratio, 1.0, tol, a, "norm with q+1 over norm with q"));
                rows.push(Row::new(format!("f{i}.lp_lq"), r.lp_lq_ratio, 1.0, tol, a, "norm with q+1 over norm with q"));
            }
        }
        "nikolskii" => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed.wrapping_add(2));
            let reach = (run.grid.half_width() / 2.0).min(2.0);
            for i in 0..fam.len() {
                let j = i % (sys.jmax + 1);
                let lam = random_level_coeffs(&mut rng, &run.grid, j, 4, reach).scale(10f64.powf(rng.gen_range(-2.5..0.0)));
                let r = nikolskii_variable_q(&lam, j, p, &run.p_target, q, w, run.manifest.c0)?;
                let case = format!("case{i}.j{j}");
                if r.skipped {
                    rows.push(Row::vacuous(case, r.left, r.right + r.slack, a, "right side above 1"));
                } else {
                    rows.push(Row::new(case, r.left, r.right + r.slack, tol, a, format!("c0={} cubes={}", r.c0, lam.len())));
                }
            }
        }
        "sobolev" => {
            let mut rng = ChaCha8Rng::seed_from_u64(run.seed.wrapping_add(3));
            let reach = (run.grid.half_width() / 2.0).min(2.0);
            let w0 = sobolev_partner_weight(w, p, &run.p_target)?;
            for i in 0..fam.len() {
                let lam = random_coeffs(&mut rng, &run.grid, sys.jmax, 3, reach);
                let r = sobolev_seq_embed(&lam, p, &run.p_target, q, &w0, w, run.manifest.c0)?;
                rows.push(Row::new(format!("case{i}"), r.ratio, r.bound, tol, a, format!("lhs={:e} rhs={:e}", r.lhs, r.rhs)));
            }
        }
        "atoms" => {
            let rs = make_reproducing_system(sys.l, sys.sigma, sys.jmax, &run.grid)?;
            for (i, f) in fam.iter().enumerate() {
                let (_, atoms) = analyze(f, &rs, sys.k, sys.jmax)?;
                let reports = atoms.verify_all()?;
                let worst = |key: fn(&varexp::atoms::ValidationReport) -> f64| {
                    reports.iter().map(|(c, r)| (key(r), *c, r)).fold(None, |acc: Option<(f64, _, _)>, x| match acc {
                        Some(b) if b.0 >= x.0 => Some(b),
                        _ => Some(x),
                    })
                };
                let located = |c: &varexp::atoms::CubeKey, r: &varexp::atoms::ValidationReport| match &r.witness {
                    Some(wit) => format!("cube j={} m={:?}: {} at {:?}", c.0, c.1, wit.check, wit.point),
                    None => format!("cube j={} m={:?}", c.0, c.1),
                };
                if let Some((v, c, r)) = worst(|r| r.max_derivative_ratio / r.slack) {
                    rows.push(Row::new(format!("f{i}.derivatives"), v, 1.0, tol, a, located(&c, r)));
                }
                if let Some((v, c, r)) = worst(|r| r.max_outside) {
                    rows.push(Row::new(format!("f{i}.support"), v, 0.0, tol, a, located(&c, r)));
                }
                if let Some((v, c, r)) = worst(|r| r.max_moment) {
                    rows.push(Row::new(format!("f{i}.moments"), v, MOMENT_TOL, tol, a, located(&c, r)));
                }
            }
        }
        _ => unreachable!("suite names checked"),
    }
    Ok(rows)
}

pub fn run(run: &Run, _plots: bool) -> Result<Outcome, CliError> {
    check_suites(run, SUITES)?;
    if run.manifest.suites.is_empty() {
        return Ok(Outcome::Done);
    }
    create_out(run)?;
    let tol = run.manifest.tolerance.unwrap_or(DEFAULT_TOL);
    let fam = family(run);
    let results: Vec<SuiteResult> = run
        .manifest
        .suites
        .par_iter()
        .map(|name| {
            let result = match run_suite(name, run, &fam, tol) {
                Ok(rows) => SuiteResult { name: name.clone(), rows, skipped: None },
                Err(e @ (varexp::Error::Precondition(_) | varexp::Error::Domain(_))) => {
                    SuiteResult { name: name.clone(), rows: Vec::new(), skipped: Some(e.to_string()) }
                }
                Err(e) => return Err(CliError::from(e)),
            };
            report::write(&run.out.join(format!("{name}.csv")), &report::rows_csv(&result.rows)?)?;
            Ok(result)
        })
        .collect::<Result<_, _>>()?;

    let suites = results
        .iter()
        .map(|r| SuiteSummary {
            name: &r.name,
            anchor: anchor(&r.name),
            file: format!("{}.csv", r.name),
            cases: r.rows.len(),
            failures: r.rows.iter().filter(|row| !row.pass).count(),
            skipped: r.skipped.as_deref(),
        })
        .collect();
    let failures: Vec<Failure> =
        results.iter().flat_map(|r| r.rows.iter().filter(|row| !row.pass).map(|row| Failure { suite: &r.name, row })).collect();
    let passed = failures.is_empty();
    let summary = Summary { command: "verify", manifest_sha256: &run.hash, seed: run.seed, tolerance: run.manifest.tolerance, passed, suites, failures };
    report::write(&run.out.join("summary.json"), &report::json_bytes(&summary)?)?;
    Ok(if passed { Outcome::Done } else { Outcome::Failed })
}
