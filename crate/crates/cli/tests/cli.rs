use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cone_foliation::integrand::{build_integrand, compat_q, matched_b_psi, ConeParams};
use cone_foliation::ode::{integrate_leaf, ProfileTable, SolverOptions};
use serde_json::Value;

fn conefol(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conefol"))
        .args(args)
        .env("FOLIATION_OUT", dir)
        .output()
        .expect("spawn conefol")
}

fn code(dir: &Path, args: &str) -> i32 {
    let out = conefol(dir, &args.split_whitespace().collect::<Vec<_>>());
    out.status.code().expect("exit code")
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn certify_exit_codes() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(d.path(), "certify --k 1 --l 1 --p 6 --b 0.01"), 0);
    let r = json(&d.path().join("certify.json"));
    assert_eq!(r["schema"], "v1");
    assert_eq!(r["phi"]["verdict"], true);
    assert_eq!(r["psi"]["verdict"], true);
    assert_eq!(code(d.path(), "certify --k 1 --l 1 --p 5 --b 0"), 1);
    assert_eq!(code(d.path(), "certify --k 0 --l 1 --p 6"), 2);
}

#[test]
fn malformed_input_exits_2() {
    let d = tempfile::tempdir().unwrap();
    for args in [
        "certify --k abc --l 1 --p 6",
        "certify --k 1 --l 1",
        "certify --k 1 --l 1 --p 6 --bogus 3",
        "certify --k 1 --l 1 --p 6 --q 7",
        "certify --area --k 1 --l 1 --p 6",
        "solve --k 1 --l 1 --p 6 --rk-tol -1",
        "sweep --k 3..1 --l 1 --p 6",
        "calibrate --k 1 --l 1 --p 6 --leaf /nonexistent/leaf.csv",
        "frobnicate",
    ] {
        let out = conefol(d.path(), &args.split_whitespace().collect::<Vec<_>>());
        assert_eq!(out.status.code(), Some(2), "{args}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!String::from_utf8_lossy(&out.stderr).contains("panicked"));
    }
    assert_eq!(code(d.path(), "--help"), 0);
}

#[test]
fn solve_writes_tables_that_round_trip() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(d.path(), "solve --k 1 --l 1 --p 6 --b 0.01 --both-sides"), 0);
    for f in ["leaf_phi.csv", "phase_phi.csv", "leaf_psi.csv", "phase_psi.csv", "solve.json"] {
        assert!(d.path().join(f).exists(), "{f}");
    }
    let r = json(&d.path().join("solve.json"));
    assert_eq!(r["sides"]["phi"]["diagnostics"]["termination"], "converged");
    assert!(r["sides"]["phi"]["el_residual_max"].as_f64().unwrap() <= 1e-6);

    let read = ProfileTable::read(&d.path().join("leaf_phi.csv")).unwrap();
    assert!(read.dsigma.windows(2).all(|w| w[1] >= w[0]));
    let params = ConeParams::new(1, 1).unwrap();
    let q = compat_q(params, 6.0).unwrap();
    let it = build_integrand(params, 6.0, q, 0.01, matched_b_psi(6.0, q, 0.01), None).unwrap();
    let (table, _) = integrate_leaf(&it.phi, params, &SolverOptions::default()).unwrap();
    assert_eq!(read.t, table.t);
    assert_eq!(read.sigma, table.sigma);
    assert_eq!(read.dsigma, table.dsigma);
}

#[test]
fn solve_gate_and_failures() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(d.path(), "solve --area --k 3 --l 3"), 0);
    assert_eq!(code(d.path(), "asymptote --area --k 3 --l 3"), 0);
    let r = json(&d.path().join("asymptote.json"));
    assert!((r["fit"]["mu_hat"].as_f64().unwrap() - 2.0).abs() < 0.02);

    let e = tempfile::tempdir().unwrap();
    assert_eq!(code(e.path(), "solve --area --k 1 --l 1"), 1);
    assert_eq!(code(e.path(), "solve --k 1 --l 1 --p 6 --b 0.1"), 1);
    assert_eq!(code(e.path(), "solve --k 1 --l 1 --p 6 --b 0.1 --force"), 1);
    let r = json(&e.path().join("solve.json"));
    assert_eq!(r["passed"], false);
    assert_eq!(r["forced"], true);
}

#[test]
fn calibrate_and_asymptote_read_leaf_files() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(d.path(), "solve --k 1 --l 2 --p 6 --b 0.01 --both-sides"), 0);
    assert_eq!(code(d.path(), "calibrate --k 1 --l 2 --p 6 --b 0.01 --nodes 9"), 0);
    let r = json(&d.path().join("calibrate.json"));
    assert!(r["report"]["order"].as_f64().unwrap() > 1.8);
    assert_eq!(code(d.path(), "calibrate --k 1 --l 2 --p 6 --b 0.01 --nodes 9 --side psi"), 0);
    assert_eq!(code(d.path(), "asymptote --k 1 --l 2 --p 6 --b 0.01"), 0);
    assert_eq!(code(d.path(), "asymptote --k 1 --l 2 --p 6 --b 0.01 --side psi --format csv"), 0);
    let text = fs::read_to_string(d.path().join("asymptote.csv")).unwrap();
    assert!(text.starts_with("k,l,a_hat,mu_hat,mu_theory,rel_err,mu_max\n2,1,"));
    // grid touching the cone is rejected as input
    assert_eq!(code(d.path(), "calibrate --k 1 --l 2 --p 6 --b 0.01 --grid 0.2,1.5,1.2,2.0,1e-3"), 2);
}

#[test]
fn sweep_grid() {
    let d = tempfile::tempdir().unwrap();
    assert_eq!(code(d.path(), "sweep --k 1..3 --l 1..3 --p 6,8,10 --b 0.01 --jobs 2"), 0);
    let text = fs::read_to_string(d.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "k,l,p,q,mu_theory,mu_hat,rel_err,mu_max,verdict");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 27);
    assert!(rows.iter().all(|r| r[8] == "true"));
    let mu = |r: &Vec<&str>| r[4].parse::<f64>().unwrap();
    assert!((mu(&rows[0]) - 0.2917).abs() < 1e-4);
    for cell in rows.chunks(3) {
        assert!(mu(&cell[0]) > mu(&cell[1]) && mu(&cell[1]) > mu(&cell[2]));
    }
    assert_eq!(json(&d.path().join("sweep.json"))["schema"], "v1");
}

#[test]
fn foliate_is_seeded() {
    let d = tempfile::tempdir().unwrap();
    let e = tempfile::tempdir().unwrap();
    let args = "foliate --k 1 --l 1 --p 6 --b 0.01 --trials 4 --samples 20 --seed 3";
    assert_eq!(code(d.path(), args), 0);
    assert_eq!(code(e.path(), args), 0);
    let a = fs::read_to_string(d.path().join("foliate.json")).unwrap();
    let b = fs::read_to_string(e.path().join("foliate.json")).unwrap();
    assert_eq!(a, b);
    let r: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(r["seed"], 3);
    assert_eq!(r["sides"]["phi"]["nested"], true);
    let csv = fs::read_to_string(d.path().join("foliation_phi.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 20);
}

#[test]
fn config_file_and_overrides() {
    let d = tempfile::tempdir().unwrap();
    let cfg = d.path().join("run.conf");
    fs::write(&cfg, "# leaf\nk = 1\nl = 1\np = 6\nb = 0.01\nrk_tol = 1e-9\n").unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(code(d.path(), &format!("solve --config {c}")), 0);
    assert_eq!(json(&d.path().join("solve.json"))["solver"]["rk_tol"], 1e-9);
    assert_eq!(code(d.path(), &format!("solve --config {c} --rk-tol 1e-10")), 0);
    assert_eq!(json(&d.path().join("solve.json"))["solver"]["rk_tol"], 1e-10);

    fs::write(&cfg, "k = 1\nl = 1\np = 6\nwobble = 2\n").unwrap();
    assert_eq!(code(d.path(), &format!("certify --config {c}")), 2);
    assert_eq!(code(d.path(), "certify --config /nonexistent.conf"), 2);
}

#[test]
fn out_flag_beats_environment() {
    let d = tempfile::tempdir().unwrap();
    let sub = d.path().join("nested/run");
    let s = sub.to_str().unwrap();
    assert_eq!(code(d.path(), &format!("certify --k 2 --l 2 --p 6 --b 0.01 --out {s} --format csv")), 0);
    let text = fs::read_to_string(sub.join("certify.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(!d.path().join("certify.csv").exists());
    // no temporary files left behind
    assert_eq!(fs::read_dir(&sub).unwrap().count(), 1);
}
