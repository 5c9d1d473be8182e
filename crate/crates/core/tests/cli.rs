use std::path::Path;

use tapkit::cli::run;

fn argv(args: &[&str]) -> Vec<String> {
    std::iter::once("tapkit").chain(args.iter().copied()).map(String::from).collect()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(argv(&["gen", "--bogus"])), 1);
    assert_eq!(run(argv(&["gen", "--difficulty", "2"])), 1);
    assert_eq!(run(argv(&["train", "--relabel", "sideways", "--steps", "10"])), 1);
    assert_eq!(run(argv(&["train", "--agent", "nobody", "--steps", "10"])), 1);
    assert_eq!(run(argv(&["frobnicate"])), 1);
}

#[test]
fn help_exits_zero() {
    assert_eq!(run(argv(&["--help"])), 0);
    assert_eq!(run(argv(&["train", "--help"])), 0);
}

#[test]
fn bound_check_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bound.csv");
    assert_eq!(run(argv(&["bound-check", "--trials", "5", "--out", path(&out)])), 0);
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("trial,exact,estimate,error,bound,ratio\n"));
    assert_eq!(csv.lines().count(), 6);
    // ε_γ far above (1 − γ)² breaks the precondition
    assert_ne!(run(argv(&["bound-check", "--eps-gamma", "0.05"])), 0);
}

#[test]
fn gen_writes_loadable_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("env.json");
    assert_eq!(run(argv(&["gen", "--env", "ssm", "--size", "7", "7", "--seed", "4", "--out", path(&out)])), 0);
    let env: tapkit::gridworld::EnvJson = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!((env.width, env.height, env.seed), (7, 7, 4));
    assert!(env.sword.is_some() && env.shield.is_some() && env.monster.is_some());
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# layout\nsize = 7 5\nseed = 3\n").unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    assert_eq!(run(argv(&["gen", "--config", path(&cfg), "--out", path(&a)])), 0);
    assert_eq!(run(argv(&["gen", "--config", path(&cfg), "--seed", "9", "--out", path(&b)])), 0);
    let read = |p: &Path| serde_json::from_str::<tapkit::gridworld::EnvJson>(&std::fs::read_to_string(p).unwrap()).unwrap();
    let (a, b) = (read(&a), read(&b));
    assert_eq!((a.width, a.height, a.seed), (7, 5, 3));
    assert_eq!((b.width, b.height, b.seed), (7, 5, 9));
    assert_eq!(run(argv(&["gen", "--config", path(&dir.path().join("missing.conf"))])), 1);
}

#[test]
fn solve_writes_oracle_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oracle.csv");
    assert_eq!(run(argv(&["solve", "--difficulty", "0", "--out", path(&out)])), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 30);
}

#[test]
fn train_plot_eval_and_sweep_produce_output() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.csv");
    let common = ["--difficulty", "0.25", "--steps", "2000", "--eval-every", "1000", "--eval-episodes", "2"];
    let mut args = vec!["train", "--agent", "skipper-once"];
    args.extend(common);
    args.extend(["--out", path(&log)]);
    assert_eq!(run(argv(&args)), 0);
    let text = std::fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().next().unwrap(), tapkit::agents::LOG_HEADER.trim_end());
    assert_eq!(text.lines().count(), 3);

    let svg = dir.path().join("log.svg");
    assert_eq!(run(argv(&["plot", "--input", path(&log), "--out", path(&svg)])), 0);
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<svg"));

    let evald = dir.path().join("eval.csv");
    let proxy = dir.path().join("proxy.json");
    let mut args = vec!["eval", "--agent", "skipper-once", "--n-ood", "1"];
    args.extend(common);
    args.extend(["--dump-proxy", path(&proxy), "--out", path(&evald)]);
    assert_eq!(run(argv(&args)), 0);
    let rows = std::fs::read_to_string(&evald).unwrap();
    assert!(rows.starts_with("agent,split,difficulty,instances,episodes,success_rate\n"));
    assert_eq!(rows.lines().count(), 6);
    let _: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&proxy).unwrap()).unwrap();

    let mpc = dir.path().join("mpc.csv");
    assert_eq!(run(argv(&["eval", "--heuristic", "best-first", "--eval-episodes", "2", "--out", path(&mpc)])), 0);
    assert!(std::fs::read_to_string(&mpc).unwrap().lines().count() > 1);

    let sweep = dir.path().join("sweep.csv");
    let summary = dir.path().join("summary.csv");
    let args = [
        "sweep", "--agent", "q,dyna", "--relabel", "e", "--seeds", "2", "--steps", "1000", "--eval-episodes", "1",
        "--summary", path(&summary), "--out", path(&sweep),
    ];
    assert_eq!(run(argv(&args)), 0);
    assert!(std::fs::read_to_string(&sweep).unwrap().lines().count() > 4);
    assert!(std::fs::read_to_string(&summary).unwrap().lines().count() >= 3);
}
