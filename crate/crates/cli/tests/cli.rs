//! End-to-end tests of the `pathnas` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const ORACLE: &str =
    "seeds = [0, 1]\nspace.groups = [{ name = \"layers\", layers = 5, choices = 3 }]\n\
                      evaluator.kind = \"oracle\"\nevaluator.oracle.landscape = \"separable\"\n";

const SUPERNET: &str = "space.groups = [{ name = \"body\", layers = 2, choices = 4 }, \
                        { name = \"inter\", layers = 1, labels = [\"r4\", \"r8\", \"r16\"] }]\n\
                        evaluator.kind = \"supernet\"\n\
                        evaluator.supernet.task = { train_size = 96, val_size = 48 }\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathnas"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn fails(dir: &Path, args: &[&str], code: i32) -> Value {
    let out = run(dir, args);
    assert_eq!(
        out.status.code(),
        Some(code),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    serde_json::from_str(&stderr).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::write(dir.join(name), text).unwrap();
}

fn search(dir: &Path, name: &str, method: &str) -> PathBuf {
    write(dir, name, &format!("{ORACLE}method.name = \"{method}\"\n"));
    dir.join(ok(dir, &["search", name]).trim())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = TempDir::new().unwrap();
    assert!(ok(tmp.path(), &["--help"]).contains("train-supernet"));
    assert!(ok(tmp.path(), &["--version"]).contains("pathnas"));
}

#[test]
fn config_errors_exit_one() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let e = fails(d, &["search", "missing.toml"], 1);
    assert_eq!(e["error"], "config");
    write(d, "unknown.toml", &format!("{ORACLE}bogus = 1\n"));
    fails(d, &["search", "unknown.toml"], 1);
    write(
        d,
        "budget.toml",
        &format!("{ORACLE}method.path_priority.models_per_cycle = 10\n"),
    );
    fails(d, &["search", "budget.toml"], 1);
    fails(d, &["frobnicate"], 1);
    write(d, "ok.toml", ORACLE);
    fails(d, &["eval-arch", "ok.toml", "0,1,2"], 1);
    fails(d, &["eval-arch", "ok.toml", "0,x"], 1);
}

#[test]
fn runtime_errors_exit_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(
        d,
        "sn.toml",
        &format!("{SUPERNET}evaluator.supernet.checkpoint = \"nowhere.bin\"\n"),
    );
    let e = fails(d, &["search", "sn.toml"], 2);
    assert_eq!(e["error"], "runtime");
    write(
        d,
        "bad.toml",
        &format!("{ORACLE}evaluator.oracle.file = \"garbage.json\"\n"),
    );
    write(d, "garbage.json", "{ not json");
    fails(d, &["search", "bad.toml"], 2);
}

#[test]
fn search_budgets_match_methods() {
    let tmp = TempDir::new().unwrap();
    for (method, n) in [("path-priority", 60), ("ea", 1000), ("random", 300)] {
        let report_path = search(tmp.path(), &format!("{method}.toml"), method);
        let report = json(&report_path);
        assert_eq!(report["budget"], n);
        for seed in 0..2 {
            let run = &report["runs"][seed];
            assert_eq!(run["evaluations"], n);
            let csv = std::fs::read_to_string(
                report_path
                    .parent()
                    .unwrap()
                    .join(format!("evaluations-seed-{seed}.csv")),
            )
            .unwrap();
            assert_eq!(csv.lines().count(), n + 1);
        }
    }
}

#[test]
fn report_is_pretty_json_with_trailing_newline() {
    let tmp = TempDir::new().unwrap();
    let path = search(tmp.path(), "pp.toml", "path-priority");
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("{\n  \"format\": \"pathnas-report\",\n"));
    assert!(text.ends_with("}\n"));
    let value: Value = serde_json::from_str(&text).unwrap();
    assert!(value["runs"][0]["leaderboard"]["scores"].is_array());
}

#[test]
fn search_is_deterministic_apart_from_timing() {
    let tmp = TempDir::new().unwrap();
    let path = search(tmp.path(), "ea.toml", "ea");
    let strip = |p: &Path| {
        let mut v = json(p);
        v["wall_clock_seconds"] = Value::Null;
        v
    };
    let first = strip(&path);
    let csv = std::fs::read(path.parent().unwrap().join("evaluations-seed-1.csv")).unwrap();
    let again = search(tmp.path(), "ea.toml", "ea");
    assert_eq!(again, path);
    assert_eq!(strip(&again), first);
    assert_eq!(
        std::fs::read(path.parent().unwrap().join("evaluations-seed-1.csv")).unwrap(),
        csv
    );
}

#[test]
fn seed_flag_overrides_config_seeds() {
    let tmp = TempDir::new().unwrap();
    write(tmp.path(), "s.toml", ORACLE);
    let path = tmp
        .path()
        .join(ok(tmp.path(), &["search", "s.toml", "--seed", "9"]).trim());
    let report = json(&path);
    assert_eq!(report["runs"].as_array().unwrap().len(), 1);
    assert_eq!(report["runs"][0]["seed"], 9);
}

#[test]
fn compare_tabulates_methods() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let reports: Vec<String> = [
        ("pp.toml", "path-priority"),
        ("ea.toml", "ea"),
        ("rs.toml", "random"),
    ]
    .iter()
    .map(|(n, m)| search(d, n, m).display().to_string())
    .collect();
    let mut args = vec!["compare"];
    args.extend(reports.iter().map(String::as_str));
    let table = ok(d, &args);
    assert!(table.lines().next().unwrap().contains("win_rate"));
    for m in ["path-priority", "ea", "random"] {
        assert!(table.contains(m), "{table}");
    }
}

#[test]
fn compare_rejects_single_run_and_mismatched_evaluators() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let a = search(d, "a.toml", "random").display().to_string();
    let e = fails(d, &["compare", &a], 1);
    assert!(e["message"]
        .as_str()
        .unwrap()
        .contains("need at least two runs"));
    write(
        d,
        "b.toml",
        "seeds = [0, 1]\nspace.groups = [{ name = \"layers\", layers = 5, choices = 3 }]\n\
         evaluator.kind = \"oracle\"\nevaluator.oracle.landscape = \"noisy\"\nmethod.name = \"ea\"\n",
    );
    let b = d
        .join(ok(d, &["search", "b.toml"]).trim())
        .display()
        .to_string();
    let e = fails(d, &["compare", &a, &b], 1);
    assert!(e["message"]
        .as_str()
        .unwrap()
        .contains("evaluator mismatch"));
}

#[test]
fn train_supernet_is_fair_and_resumes_exactly() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(
        d,
        "full.toml",
        &format!("{SUPERNET}evaluator.supernet.macro_steps = 6\n"),
    );
    write(
        d,
        "part.toml",
        &format!("{SUPERNET}evaluator.supernet.macro_steps = 2\n"),
    );
    let full = PathBuf::from(ok(d, &["train-supernet", "full.toml"]).trim());
    let report = json(&d.join(&full).parent().unwrap().join("report.json"));
    let run = &report["runs"][0];
    assert_eq!(run["fair"], true);
    assert_eq!(run["macro_steps"], 6);
    assert_eq!(run["losses"].as_array().unwrap().len(), 6);
    for row in run["update_counts"].as_array().unwrap() {
        let row = row.as_array().unwrap();
        assert!(row.iter().all(|c| c == &row[0]));
    }

    let part = PathBuf::from(ok(d, &["train-supernet", "part.toml"]).trim());
    let resumed_out = ok(
        d,
        &[
            "train-supernet",
            "full.toml",
            "--resume",
            part.to_str().unwrap(),
        ],
    );
    let resumed = PathBuf::from(resumed_out.trim());
    assert_eq!(
        std::fs::read(d.join(resumed)).unwrap(),
        std::fs::read(d.join(&full)).unwrap()
    );

    let e = fails(
        d,
        &[
            "train-supernet",
            "part.toml",
            "--resume",
            full.to_str().unwrap(),
        ],
        1,
    );
    assert!(e["message"].as_str().unwrap().contains("already has"));
}

#[test]
fn zero_macro_steps_writes_untrained_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(
        d,
        "zero.toml",
        &format!("{SUPERNET}evaluator.supernet.macro_steps = 0\n"),
    );
    let ckpt = PathBuf::from(ok(d, &["train-supernet", "zero.toml"]).trim());
    assert!(d.join(&ckpt).exists());
    let report = json(&d.join(&ckpt).parent().unwrap().join("report.json"));
    assert_eq!(report["runs"][0]["macro_steps"], 0);
    assert_eq!(report["runs"][0]["fair"], true);
}

#[test]
fn supernet_search_and_eval_arch_use_checkpoint() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "sn.toml", &format!("{SUPERNET}evaluator.supernet.macro_steps = 3\nevaluator.supernet.checkpoint = \"sn.bin\"\n"));
    let ckpt = ok(d, &["train-supernet", "sn.toml"]);
    std::fs::copy(d.join(ckpt.trim()), d.join("sn.bin")).unwrap();
    let report = json(&d.join(ok(d, &["search", "sn.toml"]).trim()));
    let run = &report["runs"][0];
    assert_eq!(run["evaluations"], 60);
    assert!(run["optimum"].is_null());
    let line = ok(d, &["eval-arch", "sn.toml", "0,3,2"]);
    let v: Value = serde_json::from_str(line.trim()).unwrap();
    let acc = v["fitness"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    assert_eq!(v["evaluator_fingerprint"], run["evaluator_fingerprint"]);
}

#[test]
fn transfer_onto_itself_has_zero_gap() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "t.toml", ORACLE);
    let report = json(&d.join(ok(d, &["transfer", "t.toml", "t.toml"]).trim()));
    assert_eq!(report["mean_gap"], 0.0);
    for run in report["runs"].as_array().unwrap() {
        assert_eq!(run["source_selection"], run["native_selection"]);
    }
}

#[test]
fn transfer_rejects_space_mismatch() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    write(d, "a.toml", ORACLE);
    write(d, "b.toml", &ORACLE.replace("layers = 5", "layers = 4"));
    let e = fails(d, &["transfer", "a.toml", "b.toml"], 1);
    assert!(e["message"].as_str().unwrap().contains("space mismatch"));
}
