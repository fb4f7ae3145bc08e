use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

fn mcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcn")).args(args).output().expect("spawn mcn")
}

fn ok(args: &[&str]) -> Output {
    let out = mcn(args);
    assert!(
        out.status.success(),
        "mcn {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(args: &[&str]) -> i32 {
    mcn(args).status.code().expect("exit code")
}

/// Every file under `dir`, keyed by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, acc);
            } else {
                acc.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(dir, dir, &mut acc);
    acc
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL_SPLIT: &str = "splits=[0.5,0.25,0.25]";

/// A tiny dataset and a one-epoch model shared by several tests.
struct Fixture {
    _dir: tempfile::TempDir,
    data: PathBuf,
    model: PathBuf,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        ok(&["gen-data", "--envs", "8", "--seed", "7", "--set", SMALL_SPLIT, "--out", s(&data)]);
        let run = dir.path().join("run");
        ok(&["train", "--data", s(&data), "--mode", "l2", "--epochs", "1", "--seed", "1", "--out", s(&run)]);
        let model = run.join("generator.ckpt");
        assert!(model.exists());
        Fixture { data, model, _dir: dir }
    })
}

#[test]
fn help_and_version_succeed() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["train", "--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
}

#[test]
fn bad_input_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&[]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["train", "--data", out, "--epochs=-5", "--out", out]), 2);
    assert_eq!(code(&["train", "--data", out, "--epochs", "0", "--out", out]), 2);
    assert_eq!(code(&["gen-data", "--envs", "4", "--bogus", "--out", out]), 2);
    assert_eq!(code(&["gen-data", "--set", "no.such.key=1", "--out", out]), 2);
    assert_eq!(code(&["gen-data", "--set", "seed", "--out", out]), 2);
    assert_eq!(code(&["gen-data", "--mode", "fancy", "--out", out]), 2);
    assert_eq!(code(&["render", "--in", "x.pgm", "--out", "x.png", "--scale", "0"]), 2);
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, "{ not json").unwrap();
    assert_eq!(code(&["gen-data", "--config", s(&cfg), "--out", out]), 2);
}

#[test]
fn runtime_failures_exit_one_with_one_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.ckpt");
    let pgm = dir.path().join("in.pgm");
    let out = mcn(&["complete", "--model", s(&missing), "--in", s(&pgm), "--out", s(&dir.path().join("o.pgm"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");

    let f = fixture();
    let out = mcn(&["eval1", "--data", s(&f.data), "--gan", s(&missing), "--out", s(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.ckpt"));
}

#[test]
fn gen_data_is_byte_identical_and_echoes_config() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["gen-data", "--envs", "6", "--seed", "3", "--mode", "sim", "--style", "b", "--set", SMALL_SPLIT, "--out", s(d)]);
    }
    let snap = snapshot(&a);
    assert_eq!(snap, snapshot(&b));
    let cfg: serde_json::Value = serde_json::from_slice(&snap[Path::new("config.json")]).unwrap();
    assert_eq!(cfg["n_envs"], 6);
    assert_eq!(cfg["seed"], 3);
    assert_eq!(cfg["mode"], "sim_partial");

    let c = dir.path().join("c");
    ok(&["gen-data", "--envs", "6", "--seed", "4", "--mode", "sim", "--style", "b", "--set", SMALL_SPLIT, "--out", s(&c)]);
    assert_ne!(snap, snapshot(&c));
}

#[test]
fn config_file_is_overridden_by_set_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    fs::write(&cfg, r#"{"seed": 11, "n_envs": 8, "splits": [0.5, 0.25, 0.25]}"#).unwrap();
    let out = dir.path().join("o");
    ok(&["gen-data", "--config", s(&cfg), "--set", "n_envs=4", "--seed", "12", "--out", s(&out)]);
    let echo: serde_json::Value = serde_json::from_slice(&fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(echo["seed"], 12);
    assert_eq!(echo["n_envs"], 4);
}

#[test]
fn train_is_byte_identical() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["train", "--data", s(&f.data), "--mode", "gan", "--epochs", "1", "--seed", "1", "--out", s(d)]);
    }
    assert_eq!(snapshot(&a), snapshot(&b));
    assert!(a.join("config.json").exists());
}

#[test]
fn slam_writes_log_and_maps_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["slam", "--env-seed", "9", "--steps", "200", "--out", s(d)]);
    }
    let snap = snapshot(&a);
    assert_eq!(snap, snapshot(&b));
    for f in ["config.json", "episode.jsonl", "best_map.pgm", "truth.pgm", "summary.json"] {
        assert!(snap.contains_key(Path::new(f)), "missing {f}");
    }
    let log = String::from_utf8(snap[Path::new("episode.jsonl")].clone()).unwrap();
    assert!(log.lines().count() > 1);
}

#[test]
fn complete_and_render_round_trip() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let env = fs::read_dir(f.data.join("test"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .min()
        .expect("a test environment");
    let partial = env.join("partial.pgm");
    let mut outputs = Vec::new();
    for name in ["a.pgm", "b.pgm"] {
        let out = dir.path().join(name);
        ok(&["complete", "--model", s(&f.model), "--in", s(&partial), "--out", s(&out)]);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = &outputs[0];
    assert!(text.starts_with(b"P5") || text.starts_with(b"P2"));
    for _ in 0..2 {
        let out = dir.path().join("s.pgm");
        ok(&["complete", "--model", s(&f.model), "--in", s(&partial), "--out", s(&out), "--stochastic", "--seed", "5"]);
        outputs.push(fs::read(&out).unwrap());
    }
    assert_eq!(outputs[2], outputs[3]);

    let png = dir.path().join("a.png");
    for _ in 0..2 {
        ok(&["render", "--in", s(&dir.path().join("a.pgm")), "--out", s(&png), "--scale", "3"]);
    }
    let bytes = fs::read(&png).unwrap();
    assert_eq!(&bytes[..8], b"\x89PNG\r\n\x1a\n");
}

#[test]
fn eval1_is_byte_identical() {
    let f = fixture();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = ok(&["eval1", "--data", s(&f.data), "--l2", s(&f.model), "--panels", "1", "--out", s(d)]);
        assert!(String::from_utf8_lossy(&out.stdout).contains("F"));
    }
    let snap = snapshot(&a);
    assert_eq!(snap, snapshot(&b));
    assert!(snap.contains_key(Path::new("report.json")));
    assert!(snap.keys().any(|k| k.starts_with("panels") && k.extension().is_some_and(|e| e == "png")));
}

#[test]
fn eval2_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        ok(&["eval2", "--envs", "2", "--seed", "3", "--set", "panels=1", "--out", s(d)]);
    }
    let snap = snapshot(&a);
    assert_eq!(snap, snapshot(&b));
    let report: serde_json::Value = serde_json::from_slice(&snap[Path::new("report.json")]).unwrap();
    assert!(!report["rows"].as_array().unwrap().is_empty() || !report["skipped"].as_array().unwrap().is_empty());
}
