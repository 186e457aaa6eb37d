use std::path::PathBuf;
use std::process::{Command, Output};

fn toy(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "fixtures", "toy", name].iter().collect();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gnnevade")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_bundle_prints_summary() {
    let o = run(&["validate-bundle", "--dataset", &toy("five_node.bundle.json")]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("5 nodes, 5 edges, 6 features"), "{}", stdout(&o));
}

#[test]
fn data_errors_exit_2() {
    let o = run(&["validate-bundle", "--dataset", "/nonexistent/graph.json"]);
    assert_eq!(code(&o), 2);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.bundle.json");
    std::fs::write(&bad, "{\"format\": \"nope\"}").unwrap();
    let o = run(&["attack", "--dataset", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
}

#[test]
fn config_errors_exit_1() {
    let five = toy("five_node.bundle.json");
    for args in [
        vec!["attack", "--dataset", &five, "--model", "transformer"],
        vec!["attack", "--dataset", &five, "--eps0", "2"],
        vec!["attack", "--dataset", &five, "--targeted", "9"],
        vec!["attack", "--dataset", &five, "--preset", "huge"],
        vec!["attack", "--dataset", &five, "--attacker", "direct", "--num-attackers", "2"],
        vec!["sweep", "--dataset", &five],
        vec!["train", "--dataset", &five, "--seeds", ""],
        vec!["no-such-command"],
    ] {
        let o = run(&args);
        assert_eq!(code(&o), 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn help_exits_0() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["attack", "--help"])), 0);
}

#[test]
fn attack_writes_report_csv_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.json");
    let o = run(&[
        "attack",
        "--dataset",
        &toy("five_node.bundle.json"),
        "--seeds",
        "0,1",
        "--eps0",
        "0.34",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["config"]["seeds"], serde_json::json!([0, 1]));
    assert_eq!(report["cells"].as_array().unwrap().len(), 1);
    assert_eq!(report["outcome_log"], "run.victims.jsonl");

    // two test nodes per seed
    let log = std::fs::read_to_string(dir.path().join("run.victims.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 4);
    let csv = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn sweep_has_one_cell_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.json");
    let o = run(&[
        "sweep",
        "--dataset",
        &toy("two_communities.bundle.json"),
        "--seeds",
        "0",
        "--eps0-grid",
        "0,0.5",
        "--epsinf-grid",
        "0.1,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["cells"].as_array().unwrap().len(), 4);

    let o = run(&[
        "sweep",
        "--dataset",
        &toy("two_communities.bundle.json"),
        "--seeds",
        "0",
        "--attacker-counts",
        "1,2",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("attackers=2"));
}

#[test]
fn train_saves_and_reuses_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let ckpt = dir.path().join("ckpt");
    let args = [
        "train",
        "--dataset",
        &toy("five_node.bundle.json"),
        "--seeds",
        "3",
        "--checkpoint-dir",
        ckpt.to_str().unwrap(),
    ];
    let first = run(&args);
    assert_eq!(code(&first), 0);
    assert_eq!(std::fs::read_dir(&ckpt).unwrap().count(), 1);
    let second = run(&args);
    let acc = |o: &Output| stdout(o).lines().next().unwrap().to_string();
    assert_eq!(acc(&first), acc(&second));
}

#[test]
fn distance_and_advtrain_run_on_toys() {
    let o = run(&["distance", "--dataset", &toy("five_node.bundle.json"), "--seeds", "0", "--layers", "3", "--eps0", "0.34"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("distance=3"));

    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "advtrain",
        "--dataset",
        &toy("two_communities.bundle.json"),
        "--seeds",
        "0",
        "--strategy",
        "topology",
        "--epsinf",
        "0.2",
        "--checkpoint-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("topology strategy"));
    let saved: Vec<_> = std::fs::read_dir(dir.path()).unwrap().collect();
    assert_eq!(saved.len(), 1);
}
