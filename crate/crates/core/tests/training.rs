use std::path::Path;

use sail_core::agents::{LossVariant, Representation};
use sail_core::envs::EnvSpec;
use sail_core::experiment::{run_seed, sweep, RunConfig, SweepAxis};
use sail_core::metrics::{emit_csv, parse_csv, parse_summary, summarize, RunRecord, DEFAULT_IMPROVEMENT_EPS};
use sail_core::EvalRow;

fn chain_config(variant: LossVariant) -> RunConfig {
    let mut c = RunConfig::default();
    c.env = EnvSpec { name: EnvSpec::SPARSE_CHAIN.into(), sticky: 0.0, length: Some(4), step_limit: Some(12), ..EnvSpec::default() };
    c.agent.loss_variant = variant;
    c.agent.representation = Representation::Tabular;
    c.agent.learning_rate = 0.05;
    c.agent.warmup = 50;
    c.agent.target_sync_period = 50;
    c.agent.epsilon.decay_steps = 2_000;
    c.run.steps = 4_000;
    c.run.eval_every = 1_000;
    c.run.eval_episodes = 3;
    c.run.eval_epsilon = 0.0;
    c
}

#[test]
fn tabular_agents_solve_a_short_chain() {
    for variant in LossVariant::ALL {
        let outcome = run_seed(&chain_config(variant), 0).unwrap();
        assert!(outcome.failure.is_none());
        assert_eq!(outcome.final_return(), Some(1.0), "{variant}: {:?}", outcome.rows);
    }
}

#[test]
fn runs_are_deterministic_per_seed() {
    let config = chain_config(LossVariant::Sail);
    let a = run_seed(&config, 9).unwrap();
    let b = run_seed(&config, 9).unwrap();
    assert_eq!(a, b);
    let c = run_seed(&config, 10).unwrap();
    assert_ne!(a.rows, c.rows);
}

#[test]
fn sweep_summary_matches_the_per_seed_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = chain_config(LossVariant::Sail);
    base.run.steps = 1_500;
    base.run.seeds = vec![0, 1];
    base.run.out = dir.path().to_path_buf();
    base.run.workers = Some(2);
    let axis = SweepAxis::Variant(vec![LossVariant::Dqn, LossVariant::Sail]);
    let result = sweep(&base, &axis).unwrap();
    assert_eq!(result.outcomes.len(), 4);
    assert_eq!(result.baseline, "dqn");

    let mut rows: Vec<EvalRow> = Vec::new();
    for entry in std::fs::read_dir(dir.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.file_name().unwrap() != "summary.csv" {
            rows.extend(parse_csv(&path).unwrap());
        }
    }
    let runs = RunRecord::from_rows(&rows).unwrap();
    let mut recomputed = summarize(&runs, "dqn", "dqn", DEFAULT_IMPROVEMENT_EPS).unwrap();
    recomputed.extend(summarize(&runs, "sail", "dqn", DEFAULT_IMPROVEMENT_EPS).unwrap());
    assert_eq!(parse_summary(dir.path().join("summary.csv")).unwrap(), recomputed);
}

#[test]
fn eval_csv_matches_the_golden_fixture() {
    let row = |method: &str, seed, step, ret, gap, stale, loss| EvalRow {
        method: method.into(),
        env: "key_door_treasure".into(),
        seed,
        step,
        eval_return: ret,
        mean_action_gap: gap,
        stale_fraction: stale,
        loss,
    };
    let rows = vec![
        row("sail", 1, 2000, 7.0, Some(1.5), Some(0.0), Some(0.001)),
        row("dqn", 0, 1000, 0.5, None, None, None),
        row("sail", 1, 1000, 7.0, Some(0.25), Some(0.125), Some(0.03125)),
    ];
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    emit_csv(&rows, &path).unwrap();
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/eval_rows.csv");
    assert_eq!(std::fs::read_to_string(&path).unwrap(), std::fs::read_to_string(&fixture).unwrap());
    assert_eq!(parse_csv(&fixture).unwrap().len(), 3);
}
