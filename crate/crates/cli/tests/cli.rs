use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinkgate_cli::ResultDocument;

const BIN: &str = env!("CARGO_BIN_EXE_kinkgate");

fn golden(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    fs::read_to_string(path).unwrap()
}

fn kinkgate(out: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn ok(out: &Path, args: &[&str]) -> ResultDocument {
    let o = kinkgate(out, args);
    assert_eq!(o.status.code(), Some(0), "{args:?}\n{}", String::from_utf8_lossy(&o.stderr));
    ResultDocument::load(&out.join(args[0]).join("result.json")).unwrap()
}

fn header(dir: &Path, file: &str) -> String {
    let text = fs::read_to_string(dir.join(file)).unwrap();
    format!("{}\n", text.lines().next().unwrap())
}

fn cache_files(out: &Path) -> Vec<PathBuf> {
    fs::read_dir(out.join("cache")).unwrap().map(|e| e.unwrap().path()).collect()
}

#[test]
fn crystal_writes_positions_and_kink() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = ok(tmp.path(), &["crystal"]);
    assert_eq!(header(&tmp.path().join("crystal"), "positions.csv"), golden("positions.csv"));
    assert_eq!(doc.labels["kink"], "localized");
    assert_eq!(doc.scalars["n_ions"], 31.0);
    assert!(doc.scalars["gradient_norm"] < 1e-8);
    assert_eq!(doc.series["positions"], "crystal/positions.csv");
    let rows = fs::read_to_string(tmp.path().join("crystal/positions.csv")).unwrap().lines().count();
    assert_eq!(rows, 32);
}

#[test]
fn modes_spectrum_header_and_scalars() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = ok(tmp.path(), &["modes"]);
    assert_eq!(header(&tmp.path().join("modes"), "spectrum.csv"), golden("spectrum.csv"));
    let bus = doc.scalars["bus_axial"];
    assert!((bus - 12.02).abs() < 0.05, "{bus}");
    assert!(doc.scalars["gap_ratio"] > 1.0);
    assert_eq!(doc.artifacts.len(), 1);
}

#[test]
fn repeated_runs_are_bit_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fresh = ok(a.path(), &["modes", "--seed", "3"]);
    let cached = ok(a.path(), &["modes", "--seed", "3"]);
    let other = ok(b.path(), &["modes", "--seed", "3", "--no-cache"]);
    assert_eq!(fresh.scalars, cached.scalars);
    assert_eq!(fresh.scalars, other.scalars);
    assert_eq!(fresh.artifacts, cached.artifacts);
    assert_eq!(fs::read(a.path().join("modes/spectrum.csv")).unwrap(), fs::read(b.path().join("modes/spectrum.csv")).unwrap());
}

#[test]
fn echoed_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = ok(tmp.path(), &["crystal", "--set", "crystal.n_ions=21", "--set", "seed=5", "--no-cache"]);
    assert_eq!(first.config.crystal.n_ions, 21);
    let file = tmp.path().join("echo.toml");
    fs::write(&file, first.config.to_toml()).unwrap();
    let again = ok(tmp.path(), &["crystal", "--config", file.to_str().unwrap(), "--no-cache"]);
    assert_eq!(first.config, again.config);
    assert_eq!(first.scalars, again.scalars);
}

#[test]
fn config_command_prints_effective_toml() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kinkgate(tmp.path(), &["config", "--set", "gate.heating_rate=0.0002"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let c = kinkgate_cli::ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(c.gate.heating_rate, 2e-4);
}

#[test]
fn reference_configs_parse_and_resolve() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for n in [31, 61, 91, 121, 151] {
        let c = kinkgate_cli::ExperimentConfig::load(&dir.join(format!("kink_{n}.toml"))).unwrap();
        assert_eq!(c.crystal.n_ions, n);
        c.resolve().unwrap();
    }
}

#[test]
fn invalid_configuration_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("bad.toml");
    fs::write(&file, "seed = 1\n[gate]\nheating_rate = 1e-4\nmystery = 2\n").unwrap();
    let o = kinkgate(tmp.path(), &["crystal", "--config", file.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("mystery") && err.contains("line 4"), "{err}");

    let o = kinkgate(tmp.path(), &["crystal", "--set", "trap.axial_frequency=\"3 m\""]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("trap.axial_frequency"));

    let o = kinkgate(tmp.path(), &["gate", "--set", "gate.heating_rate=-1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gate.heating_rate"));
}

#[test]
fn stale_artifact_aborts() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["crystal"]);
    let files = cache_files(tmp.path());
    assert_eq!(files.len(), 1);
    let mut env: serde_json::Value = serde_json::from_str(&fs::read_to_string(&files[0]).unwrap()).unwrap();
    let energy = &mut env["payload"]["config"]["energy"];
    *energy = serde_json::json!(energy.as_f64().unwrap() + 1.0);
    fs::write(&files[0], env.to_string()).unwrap();
    let o = kinkgate(tmp.path(), &["crystal", "--on-stale", "abort"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("stale artifact"));
    let doc = ok(tmp.path(), &["crystal", "--on-stale", "recompute"]);
    assert_eq!(doc.labels["kink"], "localized");
}

#[test]
fn gate_without_heating_leaves_the_bus_pure() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = ok(tmp.path(), &["gate", "--set", "gate.heating_rate=0"]);
    assert_eq!(header(&tmp.path().join("gate"), "gate.csv"), golden("gate.csv"));
    assert!(doc.scalars["final_bus_purity"] >= 0.999, "{}", doc.scalars["final_bus_purity"]);
    assert!(doc.scalars["final_fidelity"] > 0.999);
}

#[test]
fn short_heating_run_writes_occupation() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = ok(tmp.path(), &["heating", "--set", "heating.ensemble_size=4"]);
    assert_eq!(header(&tmp.path().join("heating"), "occupation.csv"), golden("occupation.csv"));
    assert_eq!(doc.scalars["ensemble_size"], 4.0);
    assert!(doc.scalars["heating_rate"].is_finite());
}

#[test]
fn transport_frames_and_phase_scan() {
    let tmp = tempfile::tempdir().unwrap();
    let doc = ok(tmp.path(), &["transport", "--set", "transport.scan_phases=[1.9, 4.7]"]);
    let dir = tmp.path().join("transport");
    assert_eq!(header(&dir, "frames.csv"), golden("frames.csv"));
    assert_eq!(header(&dir, "phase_scan.csv"), golden("phase_scan.csv"));
    assert_eq!(doc.scalars["success"], 1.0);
    assert_eq!(doc.scalars["scan_successes"], 1.0);
}

#[test]
fn unreachable_transport_exits_with_criterion_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kinkgate(tmp.path(), &["transport", "--set", "transport.phonons=0"]);
    assert_eq!(o.status.code(), Some(kinkgate_cli::EXIT_CRITERION));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL success"));
}

#[test]
fn alpha_from_quoted_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kinkgate(tmp.path(), &["paper", "eq4-alpha"]);
    let doc = ResultDocument::load(&tmp.path().join("paper-eq4-alpha/result.json")).unwrap();
    let crystal = doc.checks.iter().find(|c| c.name == "alpha_magnitude").unwrap();
    assert!(crystal.passed, "{crystal:?}");
    let literal = doc.scalars["alpha_literal"];
    assert!((literal + 2.22).abs() <= 0.01, "alpha from quoted inputs = {literal}");
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn fig2_fidelities() {
    let tmp = tempfile::tempdir().unwrap();
    let o = kinkgate(tmp.path(), &["paper", "fig2"]);
    let doc = ResultDocument::load(&tmp.path().join("paper-fig2/result.json")).unwrap();
    assert_eq!(header(&tmp.path().join("paper-fig2"), "fig2.csv"), golden("gate.csv"));
    let ratio = doc.scalars["infidelity_ratio"];
    assert!((1.6..=2.4).contains(&ratio), "{ratio}");
    let f = doc.scalars["ghz_final_fidelity"];
    assert!((0.96..=0.985).contains(&f), "GHZ fidelity at t* = {f}");
    assert_eq!(o.status.code(), Some(0));
}
