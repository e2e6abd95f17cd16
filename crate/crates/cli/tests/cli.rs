use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

use trilevel::equivalence::map_to_partner;
use trilevel_cli::{describe_map, parse_scenario, run, Scenario, ScenarioError, Task};

const FIG1A: &str = r#"
[system]
config = "fig1a"
gamma21 = 1.0
gamma23 = 0.4
omega21 = 1.5
omega31 = 0.8
delta21 = 0.3
delta31 = -0.6
"#;

const FIG2A: &str = r#"
[system]
config = "fig2a"
gamma21 = 1.0
gamma31 = 0.05
omega21 = 1.0
omega23 = 0.3
delta2 = 0.2
delta3 = -0.1
"#;

fn scenario_file(dir: &Path, header: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join("scenario.toml");
    let out = dir.join("out");
    fs::write(&path, format!("schema = 1\noutput = {:?}\n{header}\n{body}", out.to_str().unwrap())).unwrap();
    path
}

fn trilevel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trilevel")).args(args).output().expect("binary runs")
}

fn data_rows(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

#[test]
fn simulate_with_zero_final_time_writes_one_row() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "", &format!("{FIG2A}\n[time]\nstart = 0.0\nstop = 0.0\ncount = 1\n"));
    let report = run(&parse_scenario(&cfg).unwrap()).unwrap();
    assert!(report.pass);
    let rows = data_rows(&dir.path().join("out/populations.dat"));
    assert_eq!(rows.len(), 1);
    assert!(rows[0].starts_with("0e0\t1e0\t0e0\t0e0"), "{}", rows[0]);
    let header = fs::read_to_string(dir.path().join("out/populations.dat")).unwrap();
    assert!(header.contains("t [1/Γ_ref]"));
}

#[test]
fn equivalence_check_passes_through_the_binary() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "", FIG1A);
    let out = trilevel(&["equiv-check", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    let check = &report["checks"][0];
    assert_eq!(check["name"], "max Frobenius distance");
    assert!(check["measured"].as_f64().unwrap() < 1e-8);
    assert!((check["tolerance"].as_f64().unwrap() / 1e-8 - 1.0).abs() < 1e-12);
    assert_eq!(report["pass"], true);
    assert_eq!(report["map"]["family"], "fig1");
}

#[test]
fn wrong_partner_fails_with_exit_status_one() {
    let dir = TempDir::new().unwrap();
    let partner = "system_b = { config = \"fig1b\", gamma21 = 1.0, gamma23 = 0.4, omega21 = 1.0, omega23 = 0.5, delta2 = 0.0, delta3 = 0.0, phi = 1.0 }";
    let cfg = scenario_file(dir.path(), partner, FIG1A);
    let out = trilevel(&["equiv-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn trajectories_are_byte_identical_for_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(
        dir.path(),
        "seed = 42",
        &format!("{FIG2A}\n[time]\nstart = 0.0\nstop = 100.0\ncount = 11\n[trajectories]\ncount = 50\n"),
    );
    let mut scenario = parse_scenario(&cfg).unwrap();
    scenario.task = Task::Trajectories;
    let first_dir = dir.path().join("first");
    let second_dir = dir.path().join("second");
    scenario.output = first_dir.clone();
    let a = run(&scenario).unwrap();
    scenario.output = second_dir.clone();
    let b = run(&scenario).unwrap();
    let jumps_a = fs::read(first_dir.join("jumps.dat")).unwrap();
    assert_eq!(jumps_a, fs::read(second_dir.join("jumps.dat")).unwrap());
    assert!(data_rows(&first_dir.join("jumps.dat")).len() > 50);
    assert_eq!(a.results, b.results);

    scenario.seed = 43;
    scenario.output = dir.path().join("third");
    run(&scenario).unwrap();
    assert_ne!(jumps_a, fs::read(dir.path().join("third/jumps.dat")).unwrap());
}

#[test]
fn trajectory_populations_check() {
    let dir = TempDir::new().unwrap();
    let body = format!(
        "{FIG2A}\n[time]\nstart = 0.0\nstop = 10.0\ncount = 6\n[trajectories]\ncount = 400\ncheck_populations = true\n"
    );
    let cfg = scenario_file(dir.path(), "task = \"trajectories\"\nseed = 5", &body);
    let out = trilevel(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert_eq!(data_rows(&dir.path().join("out/mc_populations.dat")).len(), 6);
}

#[test]
fn partner_checks_for_spectrum_and_photon_statistics() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(
        dir.path(),
        "",
        &format!("{FIG2A}\n[checks]\npartner = true\n[frequency]\nstart = -5.0\nstop = 5.0\ncount = 201\n"),
    );
    let mut scenario = parse_scenario(&cfg).unwrap();
    for task in [Task::Spectrum, Task::G2, Task::WaitingTime] {
        scenario.task = task;
        let report = run(&scenario).unwrap();
        assert!(report.pass, "{task}: {:?}", report.checks);
        assert!(report.checks.iter().any(|c| c.name.starts_with("partner")));
    }
    let rows = data_rows(&dir.path().join("out/spectrum.dat"));
    assert_eq!(rows.len(), 201);
    assert_eq!(rows[0].split('\t').count(), 3);
}

#[test]
fn decoupled_level_spectrum_uses_long_time_limit() {
    let dir = TempDir::new().unwrap();
    let body = FIG1A.replace("gamma23 = 0.4", "gamma23 = 0.0").replace("omega31 = 0.8", "omega31 = 0.0");
    let cfg = scenario_file(dir.path(), "task = \"spectrum\"", &body);
    let out = trilevel(&["run", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn describe_map_prints_parallel_and_perpendicular_dipoles() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "", &FIG1A.replace("gamma23 = 0.4", "gamma23 = 0.0"));
    let out = trilevel(&["describe-map", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["phi", "0"]), "{text}");

    let symmetric = FIG2A.replace("gamma31 = 0.05", "gamma31 = 1.0");
    let cfg = scenario_file(dir.path(), "", &symmetric);
    let out = trilevel(&["describe-map", "--config", cfg.to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains(&format!("phi           {}", std::f64::consts::FRAC_PI_2)), "{text}");
}

#[test]
fn describe_map_matches_equivalence_module() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "", FIG2A);
    let s = parse_scenario(&cfg).unwrap();
    let summary = describe_map(&s.system).unwrap();
    let (partner, map) = map_to_partner(&s.system).unwrap();
    assert_eq!(summary.theta, map.theta);
    assert_eq!(summary.phi, map.phi);
    assert_eq!(
        (summary.gamma_p21, summary.gamma_p_second, summary.gamma_cross),
        (map.gamma_p21, map.gamma_p_second, map.gamma_cross)
    );
    assert_eq!(summary.unitary, map.unitary_rows().map(|row| row.map(|v| v + 0.0)));
    assert_eq!(summary.partner, partner);
}

#[test]
fn degenerate_basis_is_explained() {
    let dir = TempDir::new().unwrap();
    let body = FIG1A.replace("omega31 = 0.8", "omega31 = 0.0").replace("delta31 = -0.6", "delta31 = 0.0");
    let cfg = scenario_file(dir.path(), "", &body);
    let out = trilevel(&["describe-map", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("dressed basis"));
}

#[test]
fn invalid_files_are_reported() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "", &FIG2A.replace("gamma21 = 1.0", "gamma21 = -1.0"));
    let out = trilevel(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gamma21"));
    assert!(matches!(parse_scenario(&dir.path().join("missing.toml")), Err(ScenarioError::Io { .. })));
}

#[test]
fn flags_override_the_scenario() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "", FIG1A);
    let other = dir.path().join("elsewhere");
    let out = trilevel(&[
        "equiv-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        other.to_str().unwrap(),
        "--tol",
        "1e-30",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(other.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["scenario"]["seed"], 3);
    assert!((report["checks"][0]["tolerance"].as_f64().unwrap() / 1e-30 - 1.0).abs() < 1e-12);
}

#[test]
fn echoed_scenario_parses_back() {
    let dir = TempDir::new().unwrap();
    let cfg = scenario_file(dir.path(), "task = \"g2\"", FIG2A);
    let s = parse_scenario(&cfg).unwrap();
    assert_eq!(Scenario::from_toml(&s.to_toml()).unwrap(), s);
}

#[test]
fn shipped_scenarios_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            parse_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
