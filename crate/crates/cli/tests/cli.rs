use std::io::Write;
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bandsphere"));
    c.env_remove("BANDSPHERE_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

#[test]
fn covariance_table_has_requested_rows() {
    let o = run(&["covariance", "--n", "200", "--beta", "0.5", "--points", "500"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rows = text.lines().filter(|l| !l.starts_with('#'));
    assert_eq!(rows.next(), Some("psi,theta,exact,cd,hilb,lemma1_r1,lemma1_r2"));
    let rows: Vec<Vec<&str>> = rows.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 500);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 1.0);
    for r in &rows {
        let e: f64 = r[2].parse().unwrap();
        let c: f64 = r[3].parse().unwrap();
        assert_eq!(format!("{e:.10}"), format!("{c:.10}"));
    }
    assert!(text.contains("# n=200\n") && text.contains("# epsilon=0.1\n"));
}

#[test]
fn covariance_json_report() {
    let o = run(&["covariance", "--n", "64", "--points", "20", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["config"]["n"], 64);
    assert_eq!(v["profile"]["exact"].as_array().unwrap().len(), 20);
    assert_eq!(v["pass"], true);
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["covariance", "--epsilon", "3.2"],
        vec!["covariance", "--epsilon", "3.141592653589793"],
        vec!["covariance", "--beta", "1.5"],
        vec!["covariance", "--no-such-flag"],
        vec!["excursion", "--n", "128,64"],
        vec!["clt", "--replicates", "100", "--n", "16"],
        vec!["scaling", "--n", "16,32"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn help_lists_design_defaults() {
    let o = run(&["covariance", "--help"]);
    let h = stdout(&o);
    assert!(h.contains("[default: 0.1]") && h.contains("[default: 500]") && h.contains("[default: ceil]"));
    let o = run(&["excursion", "--help"]);
    let h = stdout(&o);
    for needle in [
        "[default: 64,128,256]",
        "[default: 4]",
        "[default: 1000]",
        "[default: 42]",
        "BANDSPHERE_SEED",
        "[default: field-full]",
        "2000 in field-full mode, 100000 in h2-direct mode",
    ] {
        assert!(h.contains(needle), "missing {needle}");
    }
}

#[test]
fn clt_runs_are_byte_identical_and_worker_independent() {
    let args = ["clt", "--n", "256", "--beta", "0.5", "--u", "1.0", "--replicates", "2000", "--seed", "42"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut with_workers = args.to_vec();
    with_workers.extend(["--workers", "2"]);
    let c = run(&with_workers);
    assert_eq!(a.stdout, c.stdout);
    let v = json(&a);
    assert_eq!(v["config"]["master_seed"], 42);
    assert_eq!(v["command"], "clt");
    assert_eq!(a.status.code(), Some(if v["pass"] == true { 0 } else { 1 }));
}

#[test]
fn scaling_reports_exponent_near_law() {
    let o = run(&["scaling", "--beta", "0.5", "--n", "64,128,256", "--u", "1.0"]);
    let v = json(&o);
    let slope = v["fitted_exponent"]["slope"].as_f64().unwrap();
    assert!((slope + 1.5).abs() < 0.15, "slope {slope}");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn direct_second_chaos_variance() {
    let o = run(&["excursion", "--mode", "h2-direct", "--n", "100", "--beta", "0.5", "--replicates", "100000"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let row = &v["rows"][0]["stats"];
    let var = row["var_h2"]["value"].as_f64().unwrap();
    let se = row["var_h2"]["se"].as_f64().unwrap();
    assert!((var - 0.268_56).abs() <= 3.0 * se, "{var} ± {se}");
    assert_eq!(row["dof"], 1176);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "n = [16, 24]\nreplicates = 100\nbootstrap = 50\nseed = 9").unwrap();
    let path = f.path().to_str().unwrap();
    let o = run(&["excursion", "--config", path, "--replicates", "120"]);
    let v = json(&o);
    assert_eq!(v["config"]["n_list"], serde_json::json!([16, 24]));
    assert_eq!(v["config"]["replicates"], 120);
    assert_eq!(v["config"]["master_seed"], 9);
    assert_eq!(v["config"]["bootstrap_resamples"], 50);

    let mut bad = tempfile::NamedTempFile::new().unwrap();
    writeln!(bad, "no_such_key = 1").unwrap();
    let o = run(&["excursion", "--config", bad.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let base = ["excursion", "--mode", "h2-direct", "--n", "10", "--replicates", "100", "--bootstrap", "10"];
    let o = bin().args(base).env("BANDSPHERE_SEED", "7").output().unwrap();
    assert_eq!(json(&o)["config"]["master_seed"], 7);
    let o = bin().args(base).args(["--seed", "8"]).env("BANDSPHERE_SEED", "7").output().unwrap();
    assert_eq!(json(&o)["config"]["master_seed"], 8);
}

#[test]
fn csv_output_regenerates_from_its_header() {
    let args = ["excursion", "--n", "16,24", "--replicates", "100", "--bootstrap", "20", "--seed", "5", "--format", "csv"];
    let first = run(&args);
    let text = stdout(&first);
    assert!(text.contains("replicate,seed,u,area,h1,h2_quad,h2_exact,h3,h4"));
    let mut regen: Vec<String> = Vec::new();
    for line in text.lines().take_while(|l| l.starts_with("# ") && !l.starts_with("# block")) {
        let (k, v) = line[2..].split_once('=').unwrap();
        if k == "command" {
            regen.insert(0, v.to_string());
        } else {
            regen.push(format!("--{}", k.replace('_', "-")));
            regen.push(v.to_string());
        }
    }
    regen.extend(["--format".to_string(), "csv".to_string()]);
    let second = bin().args(&regen).output().unwrap();
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn simulate_dumps() {
    let o = run(&["simulate", "--n", "8", "--oversample", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "theta_index,phi_index,value");
    // degree 16: 9 colatitudes, 18 longitudes
    assert_eq!(data.len() - 1, 9 * 18);
    let o = run(&["simulate", "--n", "8", "--oversample", "2", "--format", "binary"]);
    assert_eq!(o.stdout.len(), 8 + 8 * 9 * 18);
    assert_eq!(u32::from_le_bytes(o.stdout[0..4].try_into().unwrap()), 9);
    assert_eq!(u32::from_le_bytes(o.stdout[4..8].try_into().unwrap()), 18);
}
