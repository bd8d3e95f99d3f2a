use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn ropo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ropo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn sigma_line(file: &str) -> String {
    let path = configs().join("inner").join(file);
    let out = ropo(&["solve-inner", "--file", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    stdout(&out).lines().next().unwrap().to_string()
}

#[test]
fn solve_inner_examples() {
    assert_eq!(sigma_line("nominal.txt"), "sigma 2.80000000000");
    assert_eq!(sigma_line("whole-simplex.txt"), "sigma 1.00000000000");
    assert_eq!(sigma_line("l1-quarter.txt"), "sigma 0.250000000000");
    assert_eq!(sigma_line("l1-s.txt"), "sigma 0.250000000000");
}

#[test]
fn solve_inner_reports_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "kind l1-sa\nradius 0.1\nvalue 0 1\nrow 0.5 oops\n").unwrap();
    let out = ropo(&["solve-inner", "--file", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error[parse]:"), "{err}");
    assert!(err.contains("line 4: field row"), "{err}");

    std::fs::write(&bad, "kind l1-sa\nradius 3\nvalue 0 1\nrow 0.5 0.5\n").unwrap();
    let out = ropo(&["solve-inner", "--file", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[domain]:"));
}

fn small(dir: &Path, extra: &[&str]) -> Vec<String> {
    let mut args: Vec<String> = vec![
        "--config".into(),
        configs().join("regret.toml").to_str().unwrap().into(),
        "--out-dir".into(),
        dir.to_str().unwrap().into(),
        "--override".into(),
        "experiment.episodes=60".into(),
        "--override".into(),
        "evaluation.every=20".into(),
        "--override".into(),
        "evaluation.rollouts=5".into(),
    ];
    args.extend(extra.iter().map(|s| s.to_string()));
    args
}

fn run_with(cmd: &str, args: &[String]) -> Output {
    let mut all = vec![cmd];
    all.extend(args.iter().map(String::as_str));
    ropo(&all)
}

#[test]
fn one_episode_gives_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = small(dir.path(), &["--override", "experiment.seeds=[3]"]);
    args[5] = "experiment.episodes=1".into();
    let out = run_with("experiment", &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ropo-l1-sa.seed3.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.starts_with(
        "seed,episode,v_hat,eval_return_mean,eval_return_std,robust_value,instant_regret,cumulative_regret\n3,1,"
    ));
}

#[test]
fn experiment_is_byte_identical_across_runs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [a.path(), b.path()] {
        let out = run_with("experiment", &small(d, &[]));
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert!(names.contains(&"eval_return.svg".to_string()));
    assert!(names.contains(&"cumulative_regret.svg".to_string()));
    for name in names.iter().filter(|n| n.ends_with(".csv") || n.ends_with(".svg") || n.ends_with(".toml")) {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
}

#[test]
fn train_resume_matches_uninterrupted() {
    let full = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    let out = run_with("train", &small(full.path(), &["--seed", "2"]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let ckpt = split.path().join("state.ckpt");
    let ckpt_s = ckpt.to_str().unwrap();
    let out = run_with("train", &small(split.path(), &["--seed", "2", "--stop-after", "25", "--checkpoint", ckpt_s]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&ckpt).unwrap().starts_with("ropo-checkpoint 1\n"));
    let out = run_with("train", &small(split.path(), &["--seed", "2", "--resume", ckpt_s]));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let name = "ropo-l1-sa.seed2.csv";
    let x = std::fs::read_to_string(full.path().join(name)).unwrap();
    let y = std::fs::read_to_string(split.path().join(name)).unwrap();
    assert_eq!(x, y);
}

#[test]
fn plot_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with("experiment", &small(dir.path(), &[]));
    assert!(out.status.success());
    let agg = dir.path().join("ropo-l1-sa.aggregate.csv");
    let svg = dir.path().join("p.svg");
    let args = [
        "plot",
        agg.to_str().unwrap(),
        agg.to_str().unwrap(),
        "--metric",
        "cumulative-regret",
        "--out",
        svg.to_str().unwrap(),
    ];
    assert!(ropo(&args).status.success());
    let text = std::fs::read_to_string(&svg).unwrap();
    assert_eq!(text.matches("<polyline").count(), 2);
    // identical inputs draw identical curves
    let lines: Vec<&str> = text.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(
        lines[0].split("stroke=").next(),
        lines[1].split("stroke=").next()
    );

    let empty = dir.path().join("empty.aggregate.csv");
    std::fs::write(
        &empty,
        "episode,seeds,eval_return_mean,eval_return_std,v_hat_mean,robust_value_mean,cumulative_regret_mean,cumulative_regret_std\n",
    )
    .unwrap();
    let out = ropo(&["plot", empty.to_str().unwrap(), "--out", svg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data rows"));
}

#[test]
fn config_errors_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with("experiment", &small(dir.path(), &["--override", "experiment.seeds=[]"]));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[config]:"));
}

#[test]
fn plan_prints_optimal_values() {
    let out = ropo(&["plan", "--config", configs().join("hard.toml").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("v_star 0.00000000000"));
    assert_eq!(lines.next(), Some("h,state,v,action"));
    assert_eq!(lines.count(), 5 * 3);
}
