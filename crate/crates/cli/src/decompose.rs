use std::collections::BTreeMap;
use std::fs;

use num_complex::Complex64;
use serde::Serialize;
use varexp::decomp::{analyze, level_sums, make_reproducing_system, synthesis_gates, GateReport};
use varexp::io::{write_atom_family, write_coeff_field};
use varexp::modular::lp_norm;
use varexp::GridFunction;

use crate::manifest::Run;
use crate::report::{self, num, ser_num};
use crate::{create_out, plot, CliError, Outcome};

#[derive(Serialize)]
struct ConvergenceRow {
    jcut: usize,
    atoms: usize,
    #[serde(serialize_with = "ser_num")]
    sup_error: f64,
    #[serde(serialize_with = "ser_num")]
    lp_error: f64,
}

#[derive(Serialize)]
struct DecomposeReport<'a> {
    command: &'static str,
    manifest_sha256: &'a str,
    seed: u64,
    k: usize,
    l: usize,
    d: f64,
    sigma: f64,
    jmax: usize,
    delta: f64,
    c_k_phi: f64,
    #[serde(serialize_with = "ser_num")]
    partition_residual: f64,
    #[serde(serialize_with = "ser_num")]
    reproduce_error: f64,
    coefficients: usize,
    /// Errors relative to the input, in sup norm and in `L_{p(·)}`.
    convergence: Vec<ConvergenceRow>,
    monotone: bool,
    gates: GateReport,
}

fn relative(err: f64, size: f64) -> f64 {
    if size == 0.0 {
        0.0
    } else {
        err / size
    }
}

pub fn run(run: &Run, plots: bool) -> Result<Outcome, CliError> {
    let sys_spec = &run.manifest.system;
    let (f, p) = (&run.input, &run.p);
    let sys = make_reproducing_system(sys_spec.l, sys_spec.sigma, sys_spec.jmax, &run.grid).map_err(CliError::gate)?;
    let produced = sys.atom_dilation();
    if let Some(d) = sys_spec.d.filter(|d| *d < produced) {
        return Err(CliError::gate_msg(format!("d = {d} is below the support dilation {produced} of this system")));
    }
    let gates = synthesis_gates(sys_spec.k, sys_spec.l, sys_spec.m, &run.weight, p, &run.q, run.manifest.space)?;
    let (lam, mut fam) = analyze(f, &sys, sys_spec.k, sys_spec.jmax)?;
    fam.d = sys_spec.d.unwrap_or(produced);

    let (sup, size) = (f.max_abs(), lp_norm(f, p)?);
    let mut convergence = Vec::new();
    if !lam.is_zero() {
        let mut partial = GridFunction::zeros(run.grid);
        let mut count = 0;
        for (j, level) in level_sums(&lam, &fam)?.iter().enumerate() {
            partial.axpy(Complex64::new(1.0, 0.0), level)?;
            count += lam.level(j).count();
            let diff = f.sub(&partial)?;
            convergence.push(ConvergenceRow {
                jcut: j,
                atoms: count,
                sup_error: relative(diff.max_abs(), sup),
                lp_error: relative(lp_norm(&diff, p)?, size),
            });
        }
    }
    let monotone = convergence.windows(2).all(|w| w[1].sup_error <= w[0].sup_error);
    let reproduce_error = relative(sys.reproduce(f)?.sub(f)?.max_abs(), sup);

    create_out(run)?;
    write_coeff_field(&run.out.join("coefficients.csv"), &lam)?;
    let atoms = run.out.join("atoms");
    if atoms.join("index.json").exists() {
        fs::remove_dir_all(&atoms).map_err(CliError::io)?;
    }
    fs::create_dir_all(&atoms).map_err(CliError::io)?;
    write_atom_family(&atoms, &fam)?;

    let rows: Vec<Vec<String>> =
        convergence.iter().map(|r| vec![r.jcut.to_string(), r.atoms.to_string(), num(r.sup_error), num(r.lp_error)]).collect();
    report::write(&run.out.join("convergence.csv"), &report::table_csv(&["jcut", "atoms", "sup_error", "lp_error"], &rows)?)?;
    let rep = DecomposeReport {
        command: "decompose",
        manifest_sha256: &run.hash,
        seed: run.seed,
        k: sys_spec.k,
        l: sys_spec.l,
        d: fam.d,
        sigma: sys_spec.sigma,
        jmax: sys_spec.jmax,
        delta: sys.delta,
        c_k_phi: sys.c_k_phi(sys_spec.k),
        partition_residual: sys.partition_residual(),
        reproduce_error,
        coefficients: lam.len(),
        convergence,
        monotone,
        gates,
    };
    report::write(&run.out.join("decomposition.json"), &report::json_bytes(&rep)?)?;
    if plots && !rep.convergence.is_empty() {
        let points: BTreeMap<usize, f64> = rep.convergence.iter().map(|r| (r.jcut, r.sup_error)).collect();
        plot::convergence(&run.out.join("convergence.svg"), &points)?;
    }
    Ok(Outcome::Done)
}
