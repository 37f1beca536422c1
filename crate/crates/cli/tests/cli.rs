use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn hepflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hepflow"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_string()
}

const TRUTH: &str = "mean=5,sigma=0.5,tau=3,n_sig=600,n_bkg=1400";

fn dataset(dir: &TempDir) -> String {
    let data = path(dir, "data.csv");
    let out = hepflow(&[
        "generate", "--range", "0,10", "--init", TRUTH, "--events", "2000", "--seed", "5", "--output", &data,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    data
}

#[test]
fn phsp_emits_block_csv() {
    let out = hepflow(&["phsp", "--mother-mass", "1.0", "--masses", "0.1,0.1,0.1", "--events", "1000", "--seed", "7"]);
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "weight,p1_e,p1_px,p1_py,p1_pz,p2_e,p2_px,p2_py,p2_pz,p3_e,p3_px,p3_py,p3_pz"
    );
    let mut rows = 0;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|f| f.parse().unwrap()).collect();
        let e = v[1] + v[5] + v[9];
        let px = v[2] + v[6] + v[10];
        assert!((e - 1.0).abs() < 1e-12 && px.abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 1000);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("seed = 7") && stderr.contains("events = 1000"));
}

#[test]
fn integrate_gk_on_x_squared() {
    let out = hepflow(&["integrate", "--method", "gk", "--calls", "0", "--integrand", "pow", "--exponent", "2"]);
    let text = stdout(&out);
    let row: Vec<f64> = text.lines().nth(1).unwrap().split(',').map(|f| f.parse().unwrap()).collect();
    assert!((row[0] - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(text.lines().next().unwrap(), "value,error,chi2_per_dof,calls_used");
}

#[test]
fn exit_codes() {
    // Usage errors.
    assert_eq!(code(&hepflow(&["phsp", "--bogus"])), 2);
    assert_eq!(code(&hepflow(&["phsp", "--mother-mass", "1", "--masses", "a", "--events", "1", "--seed", "1"])), 2);
    assert_eq!(code(&hepflow(&["integrate", "--method", "gk", "--dim", "2"])), 2);
    assert_eq!(code(&hepflow(&["integrate", "--method", "plain"])), 2, "seed required without a terminal");
    assert_eq!(code(&hepflow(&["fit", "--input", "x.csv", "--range", "1,0"])), 2);
    assert_eq!(code(&hepflow(&["toys", "--n", "1", "--events", "10", "--range", "0,1", "--model", "poly"])), 2);
    assert_eq!(code(&hepflow(&["hist", "--input", "x.csv", "--column", "x", "--bins", "0", "--range", "0,1"])), 2);
    assert_eq!(code(&hepflow(&["bench", "--worker-counts", "0", "--seed", "1"])), 2);
    assert_eq!(code(&hepflow(&[])), 2);
    assert_eq!(code(&hepflow(&["--help"])), 0);
    // Domain errors.
    let below = hepflow(&["phsp", "--mother-mass", "0.2", "--masses", "0.1,0.1,0.1", "--events", "1", "--seed", "1"]);
    assert_eq!(code(&below), 1);
    let err = String::from_utf8_lossy(&below.stderr);
    assert_eq!(err.lines().filter(|l| l.starts_with("error:")).count(), 1);
    assert_eq!(code(&hepflow(&["fit", "--input", "/nonexistent.csv", "--range", "0,1"])), 1);
    assert_eq!(code(&hepflow(&["integrate", "--method", "gk-adaptive", "--rel-tol", "1e-20"])), 1);
    assert_eq!(code(&hepflow(&["hist", "--input", "/nonexistent.csv", "--column", "x", "--bins", "1", "--range", "0,1"])), 1);
}

#[test]
fn fit_splot_hist_pipeline() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let fit = path(&dir, "fit.csv");
    assert_eq!(code(&hepflow(&["fit", "--input", &data, "--range", "0,10", "--output", &fit])), 0);
    let text = std::fs::read_to_string(&fit).unwrap();
    assert_eq!(text.lines().next().unwrap(), "name,value,error,status");
    assert!(text.lines().last().unwrap().starts_with("nll_min,"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",converged")));

    // Unknown column and a missing fit result are domain errors.
    assert_eq!(code(&hepflow(&["fit", "--input", &data, "--range", "0,10", "--column", "y"])), 1);
    let no_fit = hepflow(&["splot", "--input", &data, "--range", "0,10", "--fit-result", "/nonexistent"]);
    assert_eq!(code(&no_fit), 1);

    let sw = stdout(&hepflow(&["splot", "--input", &data, "--range", "0,10", "--fit-result", &fit]));
    assert_eq!(sw.lines().next().unwrap(), "sw_sig,sw_bkg");
    assert_eq!(sw.lines().count(), 2001);

    let joined = path(&dir, "joined.csv");
    let out = hepflow(&[
        "splot", "--input", &data, "--range", "0,10", "--fit-result", &fit, "--with-input", "--output", &joined,
    ]);
    assert_eq!(code(&out), 0);
    let one_bin = stdout(&hepflow(&["hist", "--input", &joined, "--column", "x", "--bins", "1", "--range", "0,10"]));
    assert_eq!(one_bin.lines().nth(1).unwrap(), "5,2000,44.721359549995796");
    let weighted = stdout(&hepflow(&[
        "hist", "--input", &joined, "--column", "x", "--bins", "1", "--range", "0,10", "--weight", "sw_sig",
    ]));
    let sum: f64 = weighted.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    let n_sig: f64 = text.lines().find(|l| l.starts_with("n_sig,")).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((sum - n_sig).abs() < 1e-6 * n_sig);
    assert_eq!(code(&hepflow(&["hist", "--input", &joined, "--column", "nope", "--bins", "1", "--range", "0,1"])), 1);

    // A fit result away from the optimum is refused.
    let moved = path(&dir, "moved.csv");
    let shifted: String = text
        .lines()
        .map(|l| if l.starts_with("n_sig,") { "n_sig,100,1,converged".to_string() } else { l.to_string() })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(&moved, shifted).unwrap();
    assert_eq!(code(&hepflow(&["splot", "--input", &data, "--range", "0,10", "--fit-result", &moved])), 1);
}

#[test]
fn config_file_supplies_missing_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "run.cfg");
    std::fs::write(&cfg, "# phase space\nseed = 9\nmasses = 0.1,0.2\nevents = 50\nmother_mass = 2\n").unwrap();
    let from_file = stdout(&hepflow(&["phsp", "--config", &cfg, "--events", "5"]));
    let direct = stdout(&hepflow(&["phsp", "--mother-mass", "2", "--masses", "0.1,0.2", "--events", "5", "--seed", "9"]));
    assert_eq!(from_file, direct, "flags win over file values");

    std::fs::write(&cfg, "unweight = maybe\n").unwrap();
    assert_eq!(code(&hepflow(&["phsp", "--config", &cfg])), 2);
    std::fs::write(&cfg, "workers = 2\nnot a line\n").unwrap();
    assert_eq!(code(&hepflow(&["phsp", "--config", &cfg])), 2);
    assert_eq!(code(&hepflow(&["phsp", "--config", "/nonexistent.cfg"])), 2);
}

#[test]
fn resolved_config_round_trips_as_config_file() {
    let dir = TempDir::new().unwrap();
    let first = hepflow(&["integrate", "--method", "plain", "--dim", "2", "--calls", "500", "--seed", "4"]);
    let cfg = path(&dir, "resolved.cfg");
    std::fs::write(&cfg, &first.stderr).unwrap();
    let again = hepflow(&["integrate", "--config", &cfg]);
    assert_eq!(stdout(&first), stdout(&again));
}

fn run_at(workers: &str, args: &[&str], out: &Path) -> Vec<u8> {
    let mut full: Vec<&str> = args.to_vec();
    let out_s = out.to_str().unwrap();
    full.extend(["--workers", workers, "--output", out_s]);
    let o = hepflow(&full);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::read(out).unwrap()
}

#[test]
fn byte_identical_across_worker_counts() {
    let dir = TempDir::new().unwrap();
    let data = dataset(&dir);
    let fit = path(&dir, "fit.csv");
    assert_eq!(code(&hepflow(&["fit", "--input", &data, "--range", "0,10", "--output", &fit])), 0);
    let cases: Vec<Vec<&str>> = vec![
        vec!["phsp", "--mother-mass", "3", "--masses", "0.5,0.4,0.3,0.2", "--events", "9000", "--seed", "11"],
        vec!["phsp", "--mother-mass", "1", "--masses", "0.1,0.2,0.3", "--events", "9000", "--unweight", "--seed", "1"],
        vec!["integrate", "--method", "vegas", "--dim", "3", "--calls", "9000", "--iterations", "3", "--seed", "2"],
        vec!["integrate", "--method", "plain", "--dim", "2", "--calls", "9000", "--seed", "2"],
        vec!["generate", "--range", "0,10", "--init", TRUTH, "--events", "9000", "--fluctuate", "--seed", "2"],
        vec!["fit", "--input", &data, "--range", "0,10"],
        vec!["toys", "--n", "2", "--events", "5000", "--range", "0,10", "--init", TRUTH, "--seed", "3"],
        vec!["splot", "--input", &data, "--range", "0,10", "--fit-result", &fit],
    ];
    for (i, args) in cases.iter().enumerate() {
        let outs: Vec<Vec<u8>> = ["1", "2", "8"]
            .iter()
            .map(|w| run_at(w, args, &dir.path().join(format!("out{i}_{w}.csv"))))
            .collect();
        assert!(!outs[0].is_empty());
        assert!(outs.iter().all(|o| *o == outs[0]), "{} differs across workers", args[0]);
    }
}

#[test]
fn bench_single_worker_speedup_is_one() {
    let out = hepflow(&[
        "bench", "--kernel", "phsp", "--worker-counts", "1", "--events", "2000", "--repeat", "1", "--evals", "1", "--seed", "1",
    ]);
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "workers,wall_seconds,speedup");
    assert!(text.lines().nth(1).unwrap().starts_with("1,") && text.lines().nth(1).unwrap().ends_with(",1"));
}
