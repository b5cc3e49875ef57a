use std::path::Path;
use std::process::{Command, Output};

fn pass_cr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pass-cr")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn configs() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

#[test]
fn validate_accepts_shipped_configs() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let o = pass_cr(&["validate", path.to_str().unwrap()]);
        assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("ok") || stdout(&o).contains("sweep over"));
    }
}

#[test]
fn validate_rejects_bad_override() {
    let path = configs().join("scenario_default.toml");
    let o = pass_cr(&["validate", path.to_str().unwrap(), "--set", "num_waveguides=0"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

#[test]
fn run_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    let o = pass_cr(&[
        "run",
        "--seed",
        "4",
        "--set",
        "num_waveguides=2",
        "--set",
        "solver.max_outer_iters=3",
        "--scheme",
        "uniform_pass",
        "--scheme",
        "mimo_ula",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("uniform_pass") && text.contains("mimo_ula"));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("seed,scheme,axis,axis_value,sum_rate_nats"));
    assert!(lines[1].starts_with("4,uniform_pass,"));
    let side = std::fs::read_to_string(dir.path().join("run.csv.json")).unwrap();
    let side: serde_json::Value = serde_json::from_str(&side).unwrap();
    assert_eq!(side["results"].as_array().unwrap().len(), 2);
}

#[test]
fn sweep_is_reproducible_from_the_command_line() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("s.toml");
    std::fs::write(
        &spec,
        "axis = \"power_budget_dbm\"\nvalues = [10.0, 20.0]\nschemes = [\"discrete_pass:16\"]\nnum_seeds = 2\n\n[scenario]\nnum_waveguides = 2\n\n[scenario.solver]\nmax_outer_iters = 3\n",
    )
    .unwrap();
    let mut rows = Vec::new();
    for (name, extra) in [("a.csv", None), ("b.csv", Some("--sequential"))] {
        let out = dir.path().join(name);
        let mut args = vec!["sweep", spec.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend(extra);
        let o = pass_cr(&args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("wrote"));
        rows.push(std::fs::read_to_string(&out).unwrap());
    }
    assert_eq!(rows[0], rows[1]);
    assert_eq!(rows[0].lines().count(), 5);
}

#[test]
fn unknown_scheme_is_a_usage_error() {
    let o = pass_cr(&["run", "--scheme", "phased_array"]);
    assert!(!o.status.success());
}
