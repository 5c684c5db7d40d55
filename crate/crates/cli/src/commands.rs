use std::path::{Path, PathBuf};

use cone_foliation::asymptotics::{area_supersolution_check, default_supersolution_grid, fit_leaf, fit_tail, mu_max, mu_theory, mu_theory_normalized};
use cone_foliation::exec::{self, Execution};
use cone_foliation::foliation::{
    curvature_residual, dilate_leaf, divergence_check, perturbation_test, CalibrationOptions, GridSpec, Leaf, LeafSide,
    PerturbationOptions,
};
use cone_foliation::integrand::{
    build_integrand, certify_integrand, certify_profile_with, compat_q, fourier_approximate, matched_b_psi, CertificationReport,
    CertifyOptions, ConeParams, GluingParams, Integrand, Profile, Side,
};
use cone_foliation::ode::{el_residual_max, integrate_leaf_report, PhaseTrajectory, ProfileTable, SolverOptions, Termination};
use serde_json::{json, Value};

use crate::args::*;
use crate::output::{csv, num, write_atomic, write_json};
use crate::CliError;

fn params(k: Option<u32>, l: Option<u32>) -> Result<ConeParams, CliError> {
    let k = k.ok_or_else(|| CliError::Invalid("--k is required".into()))?;
    let l = l.ok_or_else(|| CliError::Invalid("--l is required".into()))?;
    Ok(ConeParams::new(k, l)?)
}

fn build(a: &ProfileArgs) -> Result<Integrand, CliError> {
    let params = params(a.k, a.l)?;
    let it = if a.area {
        Integrand::area(params)
    } else {
        let p = a.p.ok_or_else(|| CliError::Invalid("--p is required unless --area is given".into()))?;
        let q = match a.q {
            Some(q) => q,
            None => compat_q(params, p)?,
        };
        let b_psi = a.b_psi.unwrap_or_else(|| matched_b_psi(p, q, a.b));
        let gluing = a.delta.map(GluingParams::new).transpose()?;
        build_integrand(params, p, q, a.b, b_psi, gluing)?
    };
    match a.fourier_n {
        Some(n) => Ok(fourier_approximate(&it, n)?),
        None => Ok(it),
    }
}

fn solver_options(a: &SolverArgs) -> Result<SolverOptions, CliError> {
    let mut o = SolverOptions::default();
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut o.t_switch, a.t_switch);
    set(&mut o.rk_tol, a.rk_tol);
    set(&mut o.converge_tol, a.converge_tol);
    set(&mut o.region_tol, a.region_tol);
    set(&mut o.tau_max, a.tau_max);
    set(&mut o.t_end, a.t_end);
    o.validate()?;
    Ok(o)
}

fn floats(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|f| f.trim().parse::<f64>().map_err(|e| CliError::Invalid(format!("{what}: {f:?}: {e}"))))
        .collect()
}

fn pair(s: &str, what: &str) -> Result<[f64; 2], CliError> {
    match floats(s, what)?[..] {
        [a, b] if a < b => Ok([a, b]),
        _ => Err(CliError::Invalid(format!("{what} must be two increasing numbers, got {s:?}"))),
    }
}

/// `a..b` (inclusive) or `a,b,c`.
fn values(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    if let Some((a, b)) = s.split_once("..") {
        let parse = |x: &str| {
            x.trim().parse::<i64>().map_err(|e| CliError::Invalid(format!("{what}: {x:?}: {e}")))
        };
        let (a, b) = (parse(a)?, parse(b)?);
        if a > b {
            return Err(CliError::Invalid(format!("{what}: empty range {s:?}")));
        }
        return Ok((a..=b).map(|i| i as f64).collect());
    }
    floats(s, what)
}

fn side_of(s: Side) -> (&'static str, LeafSide) {
    match s {
        Side::Phi => ("phi", LeafSide::YSide),
        Side::Psi => ("psi", LeafSide::XSide),
    }
}

/// Certification verdict, plus the exponent inequalities for raw power
/// profiles (`b = 0`), where they are the stated sufficient conditions.
fn gate(report: &CertificationReport, profile: &Profile) -> bool {
    let raw = profile.as_power().is_some_and(|pp| pp.b == 0.0);
    report.verdict && !(raw && report.p_inequalities_ok == Some(false))
}

/// Certification reports for both sides and the gate verdict.
///
/// The area integrand fails the trapping hypothesis for every `k`; its leaves
/// are confined by the supersolution barrier instead, which needs `k = l`
/// and `L(t) <= 0`. Its reports are computed for `phi / phi(1)` (the leaf
/// equation is unchanged by scaling `phi`).
fn certified(it: &Integrand, exec: Execution) -> ([CertificationReport; 2], bool, Option<Value>) {
    let opts = CertifyOptions { exec, ..Default::default() };
    if let Profile::Area = it.phi {
        let unit = Profile::custom("area/sqrt2", |s| (1.0 + s * s).sqrt() / std::f64::consts::SQRT_2);
        let p = it.params;
        let reports = [certify_profile_with(&unit, p, &opts), certify_profile_with(&unit, p.swapped(), &opts)];
        let sup = area_supersolution_check(p.k, &default_supersolution_grid());
        let (ok, extra) = match sup {
            Ok(r) => (
                p.k == p.l && r.supersolution,
                json!({ "k": r.k, "max_l": r.max_l, "argmax_t": r.argmax_t, "supersolution": r.supersolution }),
            ),
            Err(e) => (false, json!({ "error": e.to_string() })),
        };
        return (reports, ok, Some(extra));
    }
    let reports = certify_integrand(it, &opts);
    let ok = gate(&reports[0], &it.phi) && gate(&reports[1], &it.psi);
    (reports, ok, None)
}

pub fn certify(a: &CertifyArgs) -> Result<bool, CliError> {
    let it = build(&a.profile)?;
    let ([phi, psi], ok, barrier) = certified(&it, Execution::Parallel);
    let normalization = it.phi.eval(1.0, 0)?;
    let path = match a.run.format {
        Format::Json => write_json(
            &a.run.out,
            "certify.json",
            json!({
                "command": "certify",
                "integrand": it.recipe,
                "jet_mismatch": it.jet_mismatch,
                "normalization": normalization,
                "phi": phi,
                "psi": psi,
                "area_barrier": barrier,
                "passed": ok,
            }),
        )?,
        Format::Csv => {
            let row = |name: &str, r: &CertificationReport| {
                vec![
                    name.to_string(),
                    r.one_jet_ok.to_string(),
                    num(r.kappa_estimate),
                    num(r.second_deriv_margin),
                    num(r.convexity_margin),
                    num(r.monotonicity_margin),
                    r.p_inequalities_ok.map_or("".into(), |b| b.to_string()),
                    r.sample_count.to_string(),
                    r.verdict.to_string(),
                ]
            };
            let header = [
                "side",
                "one_jet_ok",
                "kappa_estimate",
                "second_deriv_margin",
                "convexity_margin",
                "monotonicity_margin",
                "p_inequalities_ok",
                "sample_count",
                "verdict",
            ];
            write_atomic(&a.run.out, "certify.csv", &csv(&header, &[row("phi", &phi), row("psi", &psi)]))?
        }
    };
    println!("certify: {} -> {}", verdict(ok), path.display());
    Ok(ok)
}

fn verdict(b: bool) -> &'static str {
    if b {
        "pass"
    } else {
        "fail"
    }
}

fn sides(both: bool) -> &'static [Side] {
    if both {
        &[Side::Phi, Side::Psi]
    } else {
        &[Side::Phi]
    }
}

fn gate_or_force(it: &Integrand, force: bool) -> Result<Option<Value>, CliError> {
    if force {
        return Ok(None);
    }
    let (reports, ok, barrier) = certified(it, Execution::Parallel);
    if !ok {
        return Err(CliError::Failed("certification failed; use --force to integrate anyway".into()));
    }
    Ok(Some(json!({ "phi": reports[0], "psi": reports[1], "area_barrier": barrier })))
}

pub fn solve(a: &SolveArgs) -> Result<bool, CliError> {
    let it = build(&a.profile)?;
    let opts = solver_options(&a.solver)?;
    let cert = gate_or_force(&it, a.force)?;
    let mut out = serde_json::Map::new();
    let mut ok = true;
    for &side in sides(a.both_sides) {
        let (name, _) = side_of(side);
        let (profile, params) = it.side(side);
        let entry = match integrate_leaf_report(profile, params, &opts) {
            Ok(sol) => {
                write_atomic(&a.run.out, &format!("leaf_{name}.csv"), &sol.table.to_csv())?;
                write_atomic(&a.run.out, &format!("phase_{name}.csv"), &sol.trajectory.to_csv())?;
                let (residual, at) = el_residual_max(profile, params, &sol.table)?;
                let d = &sol.diagnostics;
                let good = d.termination == Termination::Converged && d.region_violations == 0;
                if !good {
                    eprintln!("solve: {name} side terminated with {:?} at tau = {}", d.termination, d.final_tau);
                }
                ok &= good;
                json!({
                    "converged": good,
                    "diagnostics": d,
                    "el_residual_max": residual,
                    "el_residual_at": sol.table.t[at],
                    "table_check": sol.table.check(),
                    "rows": sol.table.len(),
                    "t_max": sol.table.range().1,
                    "meta": sol.table.meta,
                })
            }
            Err(e) => match CliError::from(e) {
                CliError::Failed(msg) => {
                    eprintln!("solve: {name} side: {msg}");
                    ok = false;
                    json!({ "converged": false, "error": msg })
                }
                invalid => return Err(invalid),
            },
        };
        out.insert(name.into(), entry);
    }
    let path = write_json(
        &a.run.out,
        "solve.json",
        json!({
            "command": "solve",
            "integrand": it.recipe,
            "solver": opts,
            "forced": a.force,
            "certification": cert,
            "sides": out,
            "passed": ok,
        }),
    )?;
    println!("solve: {} -> {}", verdict(ok), path.display());
    Ok(ok)
}

pub fn foliate(a: &FoliateArgs) -> Result<bool, CliError> {
    let s = &a.solve;
    let it = build(&s.profile)?;
    let opts = solver_options(&s.solver)?;
    let scales = floats(&a.scales, "--scales")?;
    if scales.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(CliError::Invalid("--scales must be positive".into()));
    }
    let [t_lo, t_hi] = pair(&a.range, "--range")?;
    let interval = pair(&a.interval, "--interval")?;
    if a.samples < 2 || t_lo <= 0.0 {
        return Err(CliError::Invalid("need --samples >= 2 and a positive --range".into()));
    }
    gate_or_force(&it, s.force)?;
    let popts = PerturbationOptions { trials: a.trials, eps: a.eps, seed: s.run.seed, ..Default::default() };

    let mut out = serde_json::Map::new();
    let mut ok = true;
    for &side in sides(s.both_sides) {
        let (name, leaf_side) = side_of(side);
        let (profile, params) = it.side(side);
        let sol = integrate_leaf_report(profile, params, &opts)?;
        if sol.diagnostics.termination != Termination::Converged {
            return Err(CliError::Failed(format!("{name} leaf terminated with {:?}", sol.diagnostics.termination)));
        }
        let unit = Leaf::solution(leaf_side, sol.table.clone(), profile, params)?;
        let mut sorted = scales.clone();
        sorted.sort_by(f64::total_cmp);
        let leaves = sorted.iter().map(|&lam| dilate_leaf(&unit, lam)).collect::<Result<Vec<_>, _>>()?;
        let mut rows = Vec::new();
        for lf in &leaves {
            let hi = t_hi.min(lf.t_max());
            for (u, v) in lf.sample_curve(a.samples, t_lo, hi)? {
                rows.push(vec![num(lf.scale), num(u), num(v)]);
            }
        }
        write_atomic(&s.run.out, &format!("foliation_{name}.csv"), &csv(&["lambda", "u", "v"], &rows))?;

        // dilations of one leaf are nested: heights increase strictly with lambda
        let ts = cone_foliation::asymptotics::log_grid(t_lo, t_hi, a.samples);
        let mut nested = true;
        for w in leaves.windows(2) {
            for &t in ts.iter().filter(|&&t| t <= w[0].t_max()) {
                nested &= w[1].graph(t)?.0 > w[0].graph(t)?.0;
            }
        }
        let curvature = curvature_residual(&unit, profile, params)?;
        let pert = perturbation_test(profile, params, &sol.table, interval, &popts)?;
        let good = nested && curvature <= 1e-6 && pert.passed;
        ok &= good;
        out.insert(
            name.into(),
            json!({
                "passed": good,
                "nested": nested,
                "curvature_residual": curvature,
                "perturbation": pert,
            }),
        );
    }
    let path = write_json(
        &s.run.out,
        "foliate.json",
        json!({
            "command": "foliate",
            "integrand": it.recipe,
            "seed": s.run.seed,
            "scales": scales,
            "sides": out,
            "passed": ok,
        }),
    )?;
    println!("foliate: {} -> {}", verdict(ok), path.display());
    Ok(ok)
}

fn leaf_path(explicit: &Option<PathBuf>, out: &Path, side: SideArg) -> PathBuf {
    explicit.clone().unwrap_or_else(|| out.join(format!("leaf_{}.csv", side.name())))
}

fn read_table(path: &Path) -> Result<ProfileTable, CliError> {
    ProfileTable::read(path).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

fn profile_side(s: SideArg) -> Side {
    match s {
        SideArg::Phi => Side::Phi,
        SideArg::Psi => Side::Psi,
    }
}

pub fn calibrate(a: &CalibrateArgs) -> Result<bool, CliError> {
    let it = build(&a.profile)?;
    let side = profile_side(a.side);
    let (_, leaf_side) = side_of(side);
    let path = leaf_path(&a.leaf, &a.run.out, a.side);
    let table = read_table(&path)?;
    let (profile, params) = it.side(side);
    let (residual, _) = el_residual_max(profile, params, &table)?;
    let leaf = Leaf::solution(leaf_side, table, profile, params)?;
    let default_grid = match side {
        Side::Phi => "0.2,0.8,1.2,2.0,1e-3",
        Side::Psi => "1.2,2.0,0.2,0.8,1e-3",
    };
    let mut grid = GridSpec::parse(a.grid.as_deref().unwrap_or(default_grid))?;
    if a.nodes < 2 {
        return Err(CliError::Invalid("--nodes must be at least 2".into()));
    }
    grid.nodes = a.nodes;
    let opts = CalibrationOptions { seed: a.run.seed, ..Default::default() };
    let r = divergence_check(&it, &leaf, &grid, &opts)?;
    let ok = r.order >= 1.8
        && r.extrapolated_limit <= 1e-6
        && r.euler_identity_max_error <= 1e-10
        && r.support_inequality_violations == 0;
    let out = write_json(
        &a.run.out,
        "calibrate.json",
        json!({
            "command": "calibrate",
            "integrand": it.recipe,
            "leaf": path,
            "seed": a.run.seed,
            "leaf_el_residual_max": residual,
            "report": r,
            "passed": ok,
        }),
    )?;
    println!(
        "calibrate: {} (order {:.3}, limit {:.2e}) -> {}",
        verdict(ok),
        r.order,
        r.extrapolated_limit,
        out.display()
    );
    Ok(ok)
}

pub fn asymptote(a: &AsymptoteArgs) -> Result<bool, CliError> {
    let it = build(&a.profile)?;
    let side = profile_side(a.side);
    let window = pair(&a.window, "--window")?;
    let path = leaf_path(&a.leaf, &a.run.out, a.side);
    let table = read_table(&path)?;
    let phase = match &a.phase {
        Some(p) => Some(p.clone()),
        None => {
            let p = path.with_file_name(format!("phase_{}.csv", a.side.name()));
            p.exists().then_some(p)
        }
    };
    let fit = match &phase {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
            let traj = PhaseTrajectory::from_csv(&text, Termination::Converged)?;
            fit_leaf(&table, &traj, window)?
        }
        None => fit_tail(&table, window)?,
    };
    let (profile, params) = it.side(side);
    let literal = mu_theory(profile, params)?;
    // the rate equation is invariant under scaling phi, so compare with phi''(1)/phi(1)
    let fit = fit.with_theory(mu_theory_normalized(profile, params)?);
    let ok = fit.rel_err <= a.rate_tol;
    let row = [
        params.k.to_string(),
        params.l.to_string(),
        num(fit.a_hat),
        num(fit.mu_hat),
        num(fit.mu_theory),
        num(fit.rel_err),
        num(mu_max(params)),
    ];
    let out = match a.run.format {
        Format::Json => write_json(
            &a.run.out,
            "asymptote.json",
            json!({
                "command": "asymptote",
                "integrand": it.recipe,
                "leaf": path,
                "phase": phase,
                "side": a.side.name(),
                "fit": fit,
                "mu_theory_literal": literal,
                "mu_max": mu_max(params),
                "rate_tol": a.rate_tol,
                "passed": ok,
            }),
        )?,
        Format::Csv => write_atomic(
            &a.run.out,
            "asymptote.csv",
            &csv(&["k", "l", "a_hat", "mu_hat", "mu_theory", "rel_err", "mu_max"], &[row.to_vec()]),
        )?,
    };
    println!(
        "asymptote: {} (mu_hat {:.6}, theory {:.6}, rel {:.3e}) -> {}",
        verdict(ok),
        fit.mu_hat,
        fit.mu_theory,
        fit.rel_err,
        out.display()
    );
    Ok(ok)
}

struct Cell {
    k: u32,
    l: u32,
    p: f64,
}

struct SweepRow {
    q: f64,
    mu_theory: f64,
    mu_hat: f64,
    rel_err: f64,
    mu_max: f64,
    verdict: bool,
    note: Option<String>,
}

fn sweep_cell(c: &Cell, b: f64, window: [f64; 2], opts: &SolverOptions) -> Result<SweepRow, CliError> {
    let params = ConeParams::new(c.k, c.l)?;
    let q = compat_q(params, c.p)?;
    let it = build_integrand(params, c.p, q, b, matched_b_psi(c.p, q, b), None)?;
    let mut row = SweepRow {
        q,
        mu_theory: mu_theory(&it.phi, params)?,
        mu_hat: f64::NAN,
        rel_err: f64::NAN,
        mu_max: mu_max(params),
        verdict: false,
        note: None,
    };
    let (_, ok, _) = certified(&it, Execution::Sequential);
    if !ok {
        row.note = Some("certification failed".into());
        return Ok(row);
    }
    let sol = integrate_leaf_report(&it.phi, params, opts)?;
    if sol.diagnostics.termination != Termination::Converged {
        row.note = Some(format!("leaf terminated with {:?}", sol.diagnostics.termination));
        return Ok(row);
    }
    let fit = fit_leaf(&sol.table, &sol.trajectory, window)?.with_theory(row.mu_theory);
    row.mu_hat = fit.mu_hat;
    row.rel_err = fit.rel_err;
    row.verdict = true;
    Ok(row)
}

pub fn sweep(a: &SweepArgs) -> Result<bool, CliError> {
    let ks = values(&a.k, "--k")?;
    let ls = values(&a.l, "--l")?;
    let ps = values(&a.p, "--p")?;
    let window = pair(&a.window, "--window")?;
    let opts = solver_options(&a.solver)?;
    let mut cells = Vec::new();
    for &k in &ks {
        for &l in &ls {
            for &p in &ps {
                if k < 1.0 || l < 1.0 || k.fract() != 0.0 || l.fract() != 0.0 {
                    return Err(CliError::Invalid(format!("k and l must be positive integers, got ({k}, {l})")));
                }
                ConeParams::new(k as u32, l as u32)?;
                compat_q(ConeParams::new(k as u32, l as u32)?, p)?;
                cells.push(Cell { k: k as u32, l: l as u32, p });
            }
        }
    }
    let results = exec::map(Execution::Parallel, &cells, |c| sweep_cell(c, a.b, window, &opts));

    let mut rows = Vec::new();
    let mut details = Vec::new();
    let mut ok = true;
    for (c, r) in cells.iter().zip(results) {
        let r = match r {
            Ok(r) => r,
            Err(CliError::Failed(msg)) => SweepRow {
                q: f64::NAN,
                mu_theory: f64::NAN,
                mu_hat: f64::NAN,
                rel_err: f64::NAN,
                mu_max: f64::NAN,
                verdict: false,
                note: Some(msg),
            },
            Err(e) => return Err(e),
        };
        ok &= r.verdict;
        rows.push(vec![
            c.k.to_string(),
            c.l.to_string(),
            c.p.to_string(),
            num(r.q),
            num(r.mu_theory),
            num(r.mu_hat),
            num(r.rel_err),
            num(r.mu_max),
            r.verdict.to_string(),
        ]);
        details.push(json!({
            "k": c.k,
            "l": c.l,
            "p": c.p,
            "verdict": r.verdict,
            "mu_theory_le_mu_max": r.mu_theory <= r.mu_max,
            "note": r.note,
        }));
    }
    let header = ["k", "l", "p", "q", "mu_theory", "mu_hat", "rel_err", "mu_max", "verdict"];
    let path = write_atomic(&a.run.out, "sweep.csv", &csv(&header, &rows))?;
    write_json(
        &a.run.out,
        "sweep.json",
        json!({
            "command": "sweep",
            "b": a.b,
            "window": window,
            "solver": opts,
            "cells": details,
            "passed": ok,
        }),
    )?;
    println!("sweep: {} rows, {} -> {}", rows.len(), verdict(ok), path.display());
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!(values("1..3", "k").unwrap(), [1.0, 2.0, 3.0]);
        assert_eq!(values("6,8,10", "p").unwrap(), [6.0, 8.0, 10.0]);
        assert!(values("3..1", "k").is_err());
        assert!(values("a", "k").is_err());
        assert!(pair("1e2,1e4", "w").is_ok());
        assert!(pair("1e4,1e2", "w").is_err());
    }
}
