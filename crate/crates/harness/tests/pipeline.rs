use std::collections::BTreeMap;

use ropo_harness::config::ExperimentConfig;
use ropo_harness::output::{read_aggregate, read_rows};
use ropo_harness::report::{aggregate_csv, seed_csv, write_results};
use ropo_harness::runner::{run_experiment, RunResult};
use ropo_harness::HarnessError;

const CONFIG: &str = r#"
schema_version = 1

[experiment]
name = "pipeline"
episodes = 40
seeds = [5, 1, 9]

[environment]
kind = "gridworld"
horizon = 8
layout = """
o+o
oxo
ooo
"""

[evaluation]
kernel = "perturbed"
perturbation = { radius = 0.2, metric = "l1" }
every = 7
rollouts = 4

[[runs]]
label = "robust"
algorithm = "ropo"
uncertainty = { kind = "l1-sa", radius = 0.2 }
bonus = { scale = 0.01 }

[[runs]]
label = "nominal"
algorithm = "nonrobust-po"
bonus = { scale = 0.01 }
"#;

// Sample mean and standard deviation, written out independently of the
// harness.
fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - m).powi(2)).sum();
    (m, if xs.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 })
}

#[test]
fn aggregate_file_matches_recomputation_from_seed_files() {
    let config = ExperimentConfig::parse(CONFIG, &[]).unwrap();
    let results = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&config, &results, dir.path()).unwrap();
    for label in ["robust", "nominal"] {
        let mut by_episode: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        for seed in [1, 5, 9] {
            let rows = read_rows(&seed_csv(dir.path(), label, seed)).unwrap();
            let episodes: Vec<usize> = rows.iter().map(|r| r.episode).collect();
            assert_eq!(episodes, vec![1, 7, 14, 21, 28, 35, 40]);
            for r in rows {
                assert_eq!(r.seed, seed);
                by_episode
                    .entry(r.episode)
                    .or_default()
                    .push((r.eval_return_mean, r.cumulative_regret.unwrap()));
            }
        }
        let agg = read_aggregate(&aggregate_csv(dir.path(), label)).unwrap();
        assert_eq!(agg.len(), by_episode.len());
        for (a, (episode, xs)) in agg.iter().zip(by_episode) {
            assert_eq!(a.episode, episode);
            assert_eq!(a.seeds, 3);
            let (m, s) = moments(&xs.iter().map(|x| x.0).collect::<Vec<_>>());
            assert!((a.eval_return_mean - m).abs() <= 1e-12);
            assert!((a.eval_return_std - s).abs() <= 1e-12);
            let (m, s) = moments(&xs.iter().map(|x| x.1).collect::<Vec<_>>());
            assert!((a.cumulative_regret_mean.unwrap() - m).abs() <= 1e-12 * m.abs().max(1.0));
            assert!((a.cumulative_regret_std.unwrap() - s).abs() <= 1e-12 * m.abs().max(1.0));
        }
    }
}

#[test]
fn cumulative_regret_is_monotone_when_instants_are_nonnegative() {
    let config = ExperimentConfig::parse(CONFIG, &["evaluation.every=1".into()]).unwrap();
    let results = run_experiment(&config).unwrap();
    for r in &results {
        for out in r.successes() {
            let mut last = 0.0;
            for row in &out.rows {
                let instant = row.instant_regret.unwrap();
                assert!(instant >= -1e-9, "V* is not optimal: {instant}");
                let c = row.cumulative_regret.unwrap();
                assert!(c >= last - 1e-9);
                last = c;
            }
        }
    }
}

#[test]
fn metadata_records_flags_and_parameters() {
    let config = ExperimentConfig::parse(CONFIG, &[]).unwrap();
    let results = run_experiment(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_results(&config, &results, dir.path()).unwrap();
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config_hash"], config.hash());
    assert_eq!(meta["flags"]["perturbation"]["value"], "opposite-direction");
    assert_eq!(meta["flags"]["perturbation"]["active"], true);
    let run = &meta["runs"][0];
    assert_eq!(run["label"], "robust");
    assert_eq!(run["bonus_scale"]["transition"], 0.01);
    assert_eq!(run["delta"], 0.125);
    assert_eq!(run["regret_reference"], "exact");
    assert!(run["learning_rate"].as_f64().unwrap() > 0.0);
    assert!(run["clipped_rows"].as_u64().is_some());

    let stored = std::fs::read_to_string(dir.path().join("config.toml")).unwrap();
    assert_eq!(ExperimentConfig::parse(&stored, &[]).unwrap(), config);
}

#[test]
fn a_failed_seed_is_recorded_and_skipped() {
    let config = ExperimentConfig::parse(CONFIG, &[]).unwrap();
    let mut results: Vec<RunResult> = run_experiment(&config).unwrap();
    results[0].seeds[1].1 = Err(HarnessError::config("injected"));
    let dir = tempfile::tempdir().unwrap();
    let err = write_results(&config, &results, dir.path()).unwrap_err();
    assert!(matches!(err, HarnessError::PartialFailure { failed: 1, total: 6 }));
    assert_eq!(err.exit_code(), 6);
    let failed_seed = results[0].seeds[1].0;
    assert!(!seed_csv(dir.path(), "robust", failed_seed).exists());
    let agg = read_aggregate(&aggregate_csv(dir.path(), "robust")).unwrap();
    assert!(agg.iter().all(|a| a.seeds == 2));
    let meta = std::fs::read_to_string(dir.path().join("metadata.json")).unwrap();
    assert!(meta.contains("injected"));

    for r in &mut results {
        for s in &mut r.seeds {
            s.1 = Err(HarnessError::config("all gone"));
        }
    }
    let err = write_results(&config, &results, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn layout_files_are_inlined_relative_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("grid.txt"), "o+\noo\n").unwrap();
    let text = CONFIG.replace("layout = \"\"\"\no+o\noxo\nooo\n\"\"\"", "layout_file = \"grid.txt\"");
    let path = dir.path().join("c.toml");
    std::fs::write(&path, text).unwrap();
    let config = ExperimentConfig::load(&path, &[]).unwrap();
    assert_eq!(config.environment.gridworld().unwrap().unwrap().num_states(), 4);
    assert!(config.canonical_toml().contains("o+"));

    std::fs::remove_file(dir.path().join("grid.txt")).unwrap();
    assert_eq!(ExperimentConfig::load(&path, &[]).unwrap_err().exit_code(), 5);
}

#[test]
fn kl_runs_need_a_bonus_constant() {
    let text = CONFIG
        .replace("perturbation = { radius = 0.2, metric = \"l1\" }", "perturbation = { radius = 0.2, metric = \"kl\" }")
        .replace("kind = \"l1-sa\", radius = 0.2", "kind = \"kl\", radius = 0.2");
    let config = ExperimentConfig::parse(&text, &["experiment.episodes=3".into()]).unwrap();
    let err = run_experiment(&config).unwrap_err();
    assert!(err.to_string().contains("kl_c"), "{err}");

    let config = ExperimentConfig::parse(
        &text,
        &["experiment.episodes=3".into(), "runs.0.bonus.kl_c=\"oracle\"".into()],
    )
    .unwrap();
    let results = run_experiment(&config).unwrap();
    let (c, source) = results[0].prepared.kl_c.unwrap();
    assert_eq!(source, "oracle");
    assert_eq!(c, results[0].prepared.spec.nominal().min_entry());
}
