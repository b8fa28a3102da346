use std::path::Path;
use std::process::Command;

use online_cl::eval::read_metrics_csv;

const CONFIG: &str = r#"
[experiment]
name = "cli"
methods = ["ours", "finetune"]
seeds = [0, 1, 2]
top_k = [1, 2]

[data]
source = "blobs"
initial_classes = 2
step_size = 1
classes = 4
dim = 4
min_count = 20
max_count = 40
spread = 0.4

[model]
architecture = "mlp"
hidden = 8

[train]
batch_size = 8
budget = 5
"#;

fn oclrun(args: &[&str], root: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_oclrun"))
        .args(args)
        .env("OCL_RESULTS", root)
        .output()
        .unwrap()
}

fn output_dir(root: &Path, prefix: &str) -> std::path::PathBuf {
    std::fs::read_dir(root)
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.is_dir() && p.file_name().unwrap().to_string_lossy().starts_with(prefix))
        .expect("output directory")
}

#[test]
fn run_writes_grid_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let root = dir.path().join("results");
    let out = oclrun(&["run", "--config", cfg.to_str().unwrap(), "--jobs", "2"], &root);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run_dir = output_dir(&root, "cli-");
    let csv = run_dir.join("metrics_top1.csv");
    let first = std::fs::read(&csv).unwrap();
    let rows = read_metrics_csv(&csv).unwrap();
    // 2 methods x 3 seeds rows per step, 3 steps
    assert_eq!(rows.len(), 18);
    for step in 0..3 {
        assert_eq!(rows.iter().filter(|r| r.step == step).count(), 6);
    }
    assert!(run_dir.join("metrics_top2.csv").exists());
    assert!(run_dir.join("metrics_top1.json").exists());
    assert!(run_dir.join("curves_top1/curves.dat").exists());
    assert!(run_dir.join("checkpoints/ours_s2/step2.json").exists());

    let again = oclrun(&["run", "--config", cfg.to_str().unwrap()], &root);
    assert!(again.status.success());
    assert_eq!(std::fs::read(&csv).unwrap(), first);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out_root = dir.path().join("elsewhere");
    let out = oclrun(
        &[
            "run", "--config", cfg.to_str().unwrap(), "--seeds", "5", "--methods", "er,baseline",
            "--top-k", "1", "--budget", "3", "--out", out_root.to_str().unwrap(),
        ],
        &dir.path().join("unused"),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_metrics_csv(output_dir(&out_root, "cli-").join("metrics_top1.csv")).unwrap();
    let methods: std::collections::BTreeSet<_> = rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods.into_iter().collect::<Vec<_>>(), vec!["baseline", "er"]);
    assert!(rows.iter().all(|r| r.seed == 5));
    assert!(!dir.path().join("unused").exists());
}

#[test]
fn invalid_config_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, CONFIG.replace("batch_size = 8", "batch_size = 7")).unwrap();
    let out = oclrun(&["run", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("even batch size"));
    let missing = oclrun(&["run", "--config", "/nonexistent.toml"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn failing_cell_exits_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    // a huge learning rate drives the loss to infinity
    let text = CONFIG.replace("budget = 5", "budget = 5\nlearning_rate = 1e200");
    std::fs::write(&cfg, text).unwrap();
    let out = oclrun(&["run", "--config", cfg.to_str().unwrap(), "--methods", "finetune", "--seeds", "0"], dir.path());
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(output_dir(dir.path(), "cli-").join("report.csv")).unwrap();
    assert!(report.contains("failed"));
}

#[test]
fn sweep_prints_methods_by_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out = oclrun(&["sweep", "--config", cfg.to_str().unwrap(), "--budget", "2,4,8", "--seeds", "0,1"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,q=2,q=4,q=8");
    assert!(lines[1].starts_with("ours,") && lines[2].starts_with("finetune,"));
    assert_eq!(lines.len(), 3);
}
