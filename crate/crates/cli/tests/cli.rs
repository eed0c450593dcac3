use std::path::Path;
use std::process::{Command, Output};

use sail_core::metrics::{emit_csv, parse_summary};
use sail_core::EvalRow;

fn sail(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sail")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const SMOKE_CONFIG: &str = r#"
[env]
sticky = 0.25

[agent]
warmup = 20
batch_size = 8
hidden = 8

[run]
steps = 100
eval_every = 50
eval_episodes = 2
"#;

fn write_config(dir: &Path) -> String {
    let path = dir.join("smoke.toml");
    std::fs::write(&path, SMOKE_CONFIG).unwrap();
    path.display().to_string()
}

#[test]
fn smoke_train_writes_header_and_eval_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = sail(&["train", "--config", &config, "--seed", "7", "--out", "runs"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csv = std::fs::read_to_string(dir.path().join("runs/sail_key_door_treasure_seed7.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,env,seed,step,eval_return,mean_action_gap,stale_fraction,loss");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("sail,key_door_treasure,7,50,"));
    assert!(lines[2].starts_with("sail,key_door_treasure,7,100,"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    for out_dir in ["first", "second"] {
        let out = sail(&["train", "--config", &config, "--seed", "3", "--seed", "4", "--out", out_dir], dir.path());
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    for seed in [3, 4] {
        let name = format!("sail_key_door_treasure_seed{seed}.csv");
        let a = std::fs::read(dir.path().join("first").join(&name)).unwrap();
        let b = std::fs::read(dir.path().join("second").join(&name)).unwrap();
        assert_eq!(a, b);
    }
}

fn constant_run(path: &Path, method: &str, score: f64) {
    let rows: Vec<EvalRow> = (0..2)
        .flat_map(|seed| {
            (1..=4).map(move |i| EvalRow {
                method: method.into(),
                env: "key_door_treasure".into(),
                seed,
                step: 1000 * i,
                eval_return: score,
                mean_action_gap: None,
                stale_fraction: None,
                loss: None,
            })
        })
        .collect();
    emit_csv(&rows, path).unwrap();
}

#[test]
fn compare_fixture_curves() {
    let dir = tempfile::tempdir().unwrap();
    let (two, one) = (dir.path().join("two.csv"), dir.path().join("one.csv"));
    constant_run(&two, "sail", 2.0);
    constant_run(&one, "dqn", 1.0);

    let out = sail(&["compare", "two.csv", "one.csv", "--out", "cmp"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let summary = parse_summary(dir.path().join("cmp/summary.csv")).unwrap();
    assert_eq!(summary.len(), 1);
    // (2 - 1) / (1 + 1e-6)
    assert!((summary[0].rel_improvement_vs_baseline - 1.0 / (1.0 + 1e-6)).abs() < 1e-15);
    assert!(String::from_utf8_lossy(&out.stdout).contains("+100.00%"));

    let out = sail(&["compare", "two.csv", "two.csv", "--out", "same"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(parse_summary(dir.path().join("same/summary.csv")).unwrap()[0].rel_improvement_vs_baseline, 0.0);
}

#[test]
fn compare_reports_missing_files() {
    let dir = tempfile::tempdir().unwrap();
    constant_run(&dir.path().join("one.csv"), "dqn", 1.0);
    let out = sail(&["compare", "absent.csv", "one.csv"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("absent.csv"), "{}", stderr(&out));
}

#[test]
fn oracle_on_a_random_mdp() {
    let dir = tempfile::tempdir().unwrap();
    let out = sail(&["oracle", "--alpha", "0.9", "--seed", "5"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("policy agreement: 100.00%"), "{text}");
    let ratio: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("gap ratio: "))
        .and_then(|v| v.trim().parse().ok())
        .unwrap();
    assert!(ratio >= 1.0);

    let out = sail(&["oracle", "--alpha", "0"], dir.path());
    assert!(String::from_utf8_lossy(&out.stdout).contains("gap ratio: 1.000000"));
}

#[test]
fn oracle_reports_the_malformed_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.mdp"), "2 1 0.9\n0 0.5 0.5\n1 0.5 oops\n").unwrap();
    let out = sail(&["oracle", "bad.mdp"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn empty_sweep_axis_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = sail(&["sweep", "--axis", "alpha", "--values", ""], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no values"), "{}", stderr(&out));
}

#[test]
fn variant_sweep_runs_every_variant() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = sail(&["sweep", "--axis", "variant", "--config", &config, "--seed", "0", "--seed", "1", "--out", "sw"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let csvs = std::fs::read_dir(dir.path().join("sw"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|name| name.contains("_seed"))
        .count();
    assert_eq!(csvs, 8);
    let summary = parse_summary(dir.path().join("sw/summary.csv")).unwrap();
    assert_eq!(summary.len(), 4);
    assert_eq!(summary.iter().find(|r| r.method == "dqn").unwrap().rel_improvement_vs_baseline, 0.0);
}

#[test]
fn argument_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sail(&["train", "--variant", "ppo"], dir.path()).status.code(), Some(1));
    assert_eq!(sail(&["train", "--sticky", "2"], dir.path()).status.code(), Some(1));
    assert_eq!(sail(&["bogus"], dir.path()).status.code(), Some(1));
    assert_eq!(sail(&["--help"], dir.path()).status.code(), Some(0));
    let out = sail(&["train", "--config", "nowhere.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nowhere.toml"));
}
