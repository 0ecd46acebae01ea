use std::path::Path;
use std::process::{Command, Output};

fn edgephase(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edgephase")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn data_rows(csv: &str) -> Vec<String> {
    csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(str::to_string).collect()
}

#[test]
fn unknown_config_key_is_reported_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[vumps]\ntol = 1e-8\nmax_iters = 10\n");
    let o = edgephase(&["scan", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("'vumps.max_iters'"), "{}", stderr(&o));
}

#[test]
fn empty_chi_list_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[critical]\nchi = []\n");
    let o = edgephase(&["critical", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("critical.chi"));
}

#[test]
fn bad_flag_values_are_config_errors() {
    assert_eq!(code(&edgephase(&["scan", "--theta", "2.0"])), 2);
    assert_eq!(code(&edgephase(&["scan", "--solver", "lanczos"])), 2);
    assert_eq!(code(&edgephase(&["fixed-point", "--theta", "0.1,0.2", "--chi", "4"])), 2);
}

#[test]
fn print_config_round_trips() {
    let o = edgephase(&["scan", "--print-config", "--chi", "8,16", "--seed", "5"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("seed = 5"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &text);
    let again = edgephase(&["scan", "--print-config", "--config", &cfg]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn product_state_point_has_zero_entropy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = edgephase(&["scan", "--theta", "0", "--chi", "8", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# config = {")));
    assert!(csv.lines().any(|l| l == "# seed = 0"));
    let rows = data_rows(&csv);
    assert_eq!(rows.len(), 1);
    let f: Vec<&str> = rows[0].split(',').collect();
    assert_eq!(f.len(), 15);
    assert_eq!(f[0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(f[2].parse::<f64>().unwrap(), 0.0);
    assert_eq!(f[12], "vumps");
    let json = std::fs::read_to_string(dir.path().join("points/theta_0_chi_8_vumps.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(doc["record"]["chi"], 8);
    assert_eq!(doc["schmidt_values"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("plot/plot_scan.py").exists());
    assert!(dir.path().join("plot/spectrum.csv").exists());
}

#[test]
fn repeated_scans_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "record_wall_time = false\n[grid]\ntheta = [0.2, 0.5]\nchi = [4]\nsolver = \"both\"\n");
    let mut outputs = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let o = edgephase(&["scan", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outputs.push(std::fs::read(out.join("scan.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(data_rows(&String::from_utf8(outputs[0].clone()).unwrap()).len(), 4);
}

#[test]
fn resume_skips_finished_points() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("scan");
    let out = out.to_str().unwrap();
    let o = edgephase(&["scan", "--theta", "0.1,0.3", "--chi", "4", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    // A second run into the same directory needs --resume.
    let o = edgephase(&["scan", "--theta", "0.1,0.3", "--chi", "4", "--out", out]);
    assert_eq!(code(&o), 2);

    // Simulate an interrupted append.
    let csv_path = Path::new(out).join("scan.csv");
    let mut text = std::fs::read_to_string(&csv_path).unwrap();
    text.push_str("0.5,4,0.0");
    std::fs::write(&csv_path, text).unwrap();

    let o = edgephase(&["scan", "--theta", "0.1:0.5:0.2", "--chi", "4", "--out", out, "--resume"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let computed: Vec<String> = stderr(&o).lines().filter(|l| l.starts_with("θ=")).map(str::to_string).collect();
    assert_eq!(computed.len(), 1, "{computed:?}");
    assert!(computed[0].starts_with("θ=0.5"));
    let rows = data_rows(&std::fs::read_to_string(&csv_path).unwrap());
    let thetas: Vec<f64> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(thetas, vec![0.1, 0.3, 0.5]);

    // Changing solver settings invalidates the resume.
    let o = edgephase(&["scan", "--theta", "0.1", "--chi", "4", "--out", out, "--resume", "--seed", "9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn strict_mode_reports_non_convergence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[power]\nmax_layers = 2\n[grid]\nsolver = \"power\"\n");
    let out = dir.path().join("o");
    let args = ["scan", "--config", &cfg, "--theta", "1.0", "--chi", "4", "--out", out.to_str().unwrap()];
    let o = edgephase(&args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut strict = args.to_vec();
    strict.extend(["--strict", "--resume"]);
    let o = edgephase(&strict);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
}

#[test]
fn fixed_point_prints_point_documents() {
    let o = edgephase(&["fixed-point", "--theta", "0.4", "--chi", "4", "--solver", "both"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let docs: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let docs = docs.as_array().unwrap();
    assert_eq!(docs.len(), 2);
    let ee: Vec<f64> = docs.iter().map(|d| d["record"]["ee"].as_f64().unwrap()).collect();
    assert!((ee[0] - ee[1]).abs() < 1e-6);
    assert!(docs.iter().all(|d| d["provisional"] == false));
}

#[test]
fn validate_passes_and_injected_fault_fails() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good");
    let o = edgephase(&["validate", "--out", good.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(good.join("validate.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let checks = report["checks"].as_array().unwrap();
    assert!(checks.len() > 10);
    assert!(checks.iter().all(|c| c["residual"].is_number()));

    let bad = dir.path().join("bad");
    let o = edgephase(&["validate", "--inject-fault", "--out", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.lines().any(|l| l.starts_with("FAIL peps")));
}

#[test]
fn critical_failure_dumps_probe_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[critical]\nchi = [4]\nbracket = [0.6, 0.9]\npower_check_layers = 0\n");
    let o = edgephase(&["critical", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("probe table for χ=4"));
    let probes = std::fs::read_to_string(dir.path().join("critical_probes_chi_4.csv")).unwrap();
    assert_eq!(data_rows(&probes).len(), 2);
}

#[test]
fn noise_zero_epsilon_matches_reference() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = edgephase(&["noise", "--theta", "1.0", "--chi", "4", "--epsilon", "0", "--layers", "6", "--seed", "3", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let noiseless = std::fs::read_to_string(dir.path().join("noise_seed_3.csv")).unwrap();
    assert_eq!(data_rows(&noiseless).len(), 6);

    let dir2 = tempfile::tempdir().unwrap();
    let out2 = dir2.path().to_str().unwrap();
    let o = edgephase(&["noise", "--theta", "1.0", "--chi", "4", "--epsilon", "0.02", "--layers", "6", "--seed", "3", "--out", out2]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let reference = std::fs::read_to_string(dir2.path().join("noise_reference.csv")).unwrap();
    assert_eq!(data_rows(&reference), data_rows(&noiseless));
    let noisy = std::fs::read_to_string(dir2.path().join("noise_seed_3.csv")).unwrap();
    assert_ne!(data_rows(&noisy), data_rows(&noiseless));
    let summary = std::fs::read_to_string(dir2.path().join("noise_summary.csv")).unwrap();
    assert_eq!(data_rows(&summary).len(), 2);
}

#[test]
fn finite_open_chain_scan() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = edgephase(&["finite", "--theta", "0.8,1.0", "--chi", "4", "--n", "6", "--bc", "open", "--out", out]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rows = data_rows(&std::fs::read_to_string(dir.path().join("finite.csv")).unwrap());
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.contains(",open,")));
    let crossing = data_rows(&std::fs::read_to_string(dir.path().join("finite_crossing.csv")).unwrap());
    assert_eq!(crossing.len(), 1);
}
