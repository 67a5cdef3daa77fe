use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use parabolic_lab::output::sha256_hex;

const NOISE_FREE: &str = r#"
kind = "solve"
seed = 3

[problem]
n = 16
horizon = 1.0
mu = 1.0
beta = 1.0
sigma = 0.3
delta = 0.7
delta1 = 0.9
a0 = 1.0
b0 = 0.0
a = { form = "affine-in-time", offset = 1.0, slope = 0.5 }
b = { form = "constant", value = 0.0 }
forcing = { time = { form = "constant", value = 1.0 }, space = { form = "sine-mode", mode = 1, amplitude = 1.0 } }
noise = { time = { form = "constant", value = 0.0 }, space = { form = "bubble", amplitude = 1.0 } }
initial = { form = "sine-mode", mode = 2, amplitude = 0.5 }

[grid]
steps = 64
"#;

const ENSEMBLE: &str = r#"
kind = "ensemble"
seed = 11

[problem]
preset = "section4"
n = 8

[grid]
steps = 64

[ensemble]
paths = 24
"#;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_parabolic-lab")).args(args).output().unwrap()
}

fn run_config(dir: &Path, name: &str, text: &str, extra: &[&str]) -> Output {
    let cfg = dir.join(format!("{name}.toml"));
    fs::write(&cfg, text).unwrap();
    let out = dir.join(name);
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lab(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn invalid_configuration_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), "empty", "", &[]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("kind"));
    assert!(!dir.path().join("empty").join("manifest.json").exists());

    let o = run_config(dir.path(), "typo", "kind = \"solve\"\nsede = 1\n", &[]);
    assert_eq!(code(&o), 1);

    let bad_sigma = NOISE_FREE.replace("sigma = 0.3", "sigma = 1.5");
    let o = run_config(dir.path(), "sigma", &bad_sigma, &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("(F1)"), "{}", stderr(&o));

    let o = lab(&["--out", "x", "--bogus"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn runtime_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, NOISE_FREE).unwrap();
    let o = lab(&["--config", cfg.to_str().unwrap(), "--out", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));

    let o = lab(&["--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(), "--threads", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn manifest_hashes_match_and_reruns_archive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), "solve", NOISE_FREE, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = dir.path().join("solve");
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "solve");
    assert_eq!(manifest["seed"], 3);
    let files = manifest["files"].as_array().unwrap();
    assert!(files.iter().any(|f| f["path"] == "trajectory.csv"));
    for f in files {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }

    let first = fs::read(out.join("manifest.json")).unwrap();
    let o = run_config(dir.path(), "solve", NOISE_FREE, &[]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read(out.join("manifest.1.json")).unwrap(), first);
    assert_eq!(fs::read(out.join("manifest.json")).unwrap(), first);
}

#[test]
fn noise_free_runs_ignore_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_config(dir.path(), "a", NOISE_FREE, &[])), 0);
    assert_eq!(code(&run_config(dir.path(), "b", NOISE_FREE, &["--seed", "99"])), 0);
    let a = fs::read(dir.path().join("a/trajectory.csv")).unwrap();
    let b = fs::read(dir.path().join("b/trajectory.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap();
    assert!(header.starts_with("t,x_norm,ax_norm"), "{header}");
    assert_eq!(text.lines().count(), 66);
}

#[test]
fn ensembles_do_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run_config(dir.path(), "one", ENSEMBLE, &["--threads", "1"])), 0);
    assert_eq!(code(&run_config(dir.path(), "three", ENSEMBLE, &["--threads", "3"])), 0);
    let one: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("one/manifest.json")).unwrap()).unwrap();
    let three: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("three/manifest.json")).unwrap()).unwrap();
    assert_eq!(one["files"], three["files"]);

    let o = run_config(dir.path(), "more", ENSEMBLE, &["--paths", "30"]);
    assert_eq!(code(&o), 0);
    let more: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("more/manifest.json")).unwrap()).unwrap();
    assert_eq!(more["config"]["ensemble"]["paths"], 30);
    assert_ne!(one["files"], more["files"]);
}

#[test]
fn quick_acceptance_reports_every_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_config(dir.path(), "acc", "kind = \"acceptance\"\n[acceptance]\nscale = \"quick\"\n", &[]);
    let stdout = String::from_utf8_lossy(&o.stdout);
    let lines: Vec<&str> = stdout.lines().filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]")).collect();
    assert_eq!(lines.len(), 14, "{stdout}");
    let any_failed = lines.iter().any(|l| l.starts_with("[FAIL]"));
    assert_eq!(code(&o), if any_failed { 3 } else { 0 });
    assert!(dir.path().join("acc/acceptance.json").exists());
    assert!(dir.path().join("acc/criteria/10_brownian_holder.csv").exists());
}
