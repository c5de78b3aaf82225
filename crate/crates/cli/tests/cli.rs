use std::process::{Command, Output};

fn symheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_symheat")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn kernel_csv_has_a_json_header_and_fixed_columns() {
    let out = symheat(&["kernel", "--space", "sphere", "--dim", "3", "--t", "0.5", "--method", "spectral", "--grid", "0.05:3.1:128"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let meta: serde_json::Value = serde_json::from_str(header.strip_prefix("# ").unwrap()).unwrap();
    assert_eq!(meta["request"]["command"]["kernel"]["t"], 0.5);
    assert_eq!(lines.next().unwrap(), "space,n,t,coordinate,method,value,err_est,extra");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 128);
    assert!(rows[0].starts_with("S3,3,0.5,0.05,spectral,"));
}

#[test]
fn monte_carlo_output_is_deterministic() {
    let args = ["mc", "--space", "S2", "--t", "0.2", "--grid", "0.1:1.5:8", "--steps", "40", "--samples", "4000", "--seed", "5"];
    let a = symheat(&args);
    let b = symheat(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let single = symheat(&[&args[..], &["--threads", "1"]].concat());
    let strip = |o: &Output| stdout(o).lines().skip(1).map(String::from).collect::<Vec<_>>();
    assert_eq!(strip(&a), strip(&single));
    assert!(stdout(&a).contains("killed_mass="));
}

#[test]
fn json_output_and_file_destination() {
    let dir = std::env::temp_dir().join(format!("symheat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("potential.json");
    let out = symheat(&["potential", "--space", "S2", "--grid", "0:3:7", "--format", "json", "--output", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0]["method"], "omega_star");
    assert!((rows[0]["value"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert!(rows[0]["t"].is_null());
}

#[test]
fn spaces_can_come_from_a_config_file() {
    let dir = std::env::temp_dir().join(format!("symheat-cfg-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("spaces.ini");
    std::fs::write(&path, "[MyProjective]\npreset = CP2\n").unwrap();
    let out = symheat(&["potential", "--space", "MyProjective", "--grid", "0.1:1:4", "--config", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stdout(&out).lines().count(), 2 + 4);
}

#[test]
fn errors_set_the_exit_status() {
    let usage = symheat(&["kernel", "--space", "S2", "--t", "0", "--grid", "0:1:5"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("--t"));
    let module = symheat(&["kernel", "--space", "H3", "--t", "0.5", "--grid", "0.1:1:5", "--method", "spectral"]);
    assert_eq!(module.status.code(), Some(1));
    let unknown = symheat(&["kernel", "--space", "nowhere", "--t", "0.5", "--grid", "0.1:1:5"]);
    assert_eq!(unknown.status.code(), Some(1));
}

#[test]
fn suite_emits_a_machine_readable_verdict() {
    let out = symheat(&["suite", "--criterion", "3", "--criterion", "10", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["summary"]["passed"], true);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PASS criterion  3"));
}

#[test]
fn every_kernel_route_runs() {
    for (space, method) in [
        ("S2", "spectral"),
        ("S2", "gaussian_wrap"),
        ("S3", "shifted_kernel"),
        ("H3", "closed_form"),
        ("H3", "gaussian_wrap"),
        ("R2", "flat"),
        ("S2", "pde"),
    ] {
        let out = symheat(&["kernel", "--space", space, "--t", "0.3", "--grid", "0.2:2:10", "--method", method, "--dx", "4e-3", "--dt", "4e-4"]);
        assert!(out.status.success(), "{space} {method}: {}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(stdout(&out).lines().count(), 12, "{space} {method}");
    }
}
