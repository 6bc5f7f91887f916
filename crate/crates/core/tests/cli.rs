use std::path::Path;
use std::process::{Command, Output};

use freqlab::config::ExperimentConfig;

fn freqlab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freqlab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn spectrum_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let free = freqlab(d, &["spectrum", "--out", "free"]);
    assert_eq!(code(&free), 0, "{}", String::from_utf8_lossy(&free.stderr));
    let table = std::fs::read_to_string(d.join("free/spectrum.csv")).unwrap();
    let second: Vec<f64> = table.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(second[0], 0.0);
    assert!(second[1].abs() < 1e-10);

    let cfg = write(d, "ca.toml", "[potential]\nfamily = \"constant_a\"\nstrength = 0.3\n");
    let o = freqlab(d, &["spectrum", "--config", &cfg, "--out", "ca"]);
    assert_eq!(code(&o), 2);
    assert!(d.join("ca/spectrum.csv").exists());
}

#[test]
fn failure_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let nc = write(
        d,
        "nc.toml",
        "[perturbation]\nfamily = \"inverse_square_eps\"\nzonal = 0.5\n[nonlinearity]\nfamily = \"power\"\ncoupling = 50.0\n[solver]\nmax_iter = 3\n",
    );
    assert_eq!(code(&freqlab(d, &["asymptotics", "--config", &nc, "--out", "nc"])), 3);

    let nl = write(d, "nl.toml", "[boundary]\nmodes = [0, 1]\nre = [1e-2, 1.0]\nim = [0.0, 0.0]\n");
    assert_eq!(code(&freqlab(d, &["asymptotics", "--config", &nl, "--out", "nl"])), 4);

    let bad = write(d, "bad.toml", "foo = 1\n");
    let o = freqlab(d, &["spectrum", "--config", &bad]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("foo"));
    assert_eq!(code(&freqlab(d, &["spectrum", "--radii", "0.5,abc"])), 1);
    assert_eq!(code(&freqlab(d, &["nonsense"])), 1);
}

#[test]
fn outputs_are_byte_identical_and_config_is_echoed() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(
        d,
        "run.toml",
        "[potential]\nfamily = \"rotation\"\nstrength = 0.5\n[perturbation]\nfamily = \"inverse_square_eps\"\nc = 0.1\n",
    );
    for out in ["a", "b"] {
        let o = freqlab(d, &["asymptotics", "--config", &cfg, "--out", out, "--threads", "2"]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stdout).contains("gamma = "));
    }
    let (a, b) = (d.join("a"), d.join("b"));
    assert_eq!(files(&a), files(&b));
    for name in files(&a) {
        if name == "config.toml" {
            continue;
        }
        assert_eq!(std::fs::read(a.join(&name)).unwrap(), std::fs::read(b.join(&name)).unwrap(), "{name}");
    }
    // The echo lists every default and reloads to the same configuration.
    let echoed = std::fs::read_to_string(a.join("config.toml")).unwrap();
    for key in ["seed = 42", "[tolerances]", "[quotients]", "runtime_verify"] {
        assert!(echoed.contains(key), "{key}");
    }
    let reloaded = ExperimentConfig::from_toml(&echoed).unwrap();
    let mut original = ExperimentConfig::from_toml(&std::fs::read_to_string(d.join(&cfg)).unwrap()).unwrap();
    original.output = "a".into();
    original.threads = 2;
    assert_eq!(reloaded, original);
}

#[test]
fn quotients_and_pohozaev_run_on_explicit_radii() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(d, "q.toml", "[perturbation]\nfamily = \"inverse_square_eps\"\neps = 0.5\n");
    let o = freqlab(d, &["quotients", "--config", &cfg, "--out", "q"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("q/eta.json")).unwrap()).unwrap();
    assert_eq!(report["holds"], serde_json::Value::Bool(true));

    let o = freqlab(d, &["pohozaev", "--config", &cfg, "--out", "p", "--radii", "1,0.5,0.25"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(d.join("p/pohozaev.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn verify_names_the_failing_criterion() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = write(d, "t.toml", "[tolerances]\nspectrum = 0.0\n");
    let o = freqlab(d, &["verify", "--config", &cfg, "--out", "v"]);
    assert_eq!(code(&o), 1);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("spectrum oracle"), "{err}");
    let summary = String::from_utf8_lossy(&o.stdout);
    assert!(summary.lines().any(|l| l.starts_with("[FAIL]") && l.contains("spectrum oracle")), "{summary}");
    assert!(summary.lines().any(|l| l.starts_with("[PASS]") && l.contains("nonlinear pipeline")), "{summary}");
}
