use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const CONFIG: &str = r#"
dataset = "synthetic"
target = 1
seeds = 1

[synthetic]
windows_per_class = 6
timesteps = 24

[model]
conv1_filters = 3
conv1_kernel = 3
conv2_filters = 3
conv2_kernel = 3
pool = 2
branch_width = 6
domain_hidden = 4

[train]
learning_rate = 0.01
batch_size = 12
max_epochs = 2
patience = 2
"#;

fn fusedg(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fusedg"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), CONFIG).unwrap();
    dir
}

fn result_dir(out: &str) -> PathBuf {
    let line = out.lines().find(|l| l.starts_with("results: ")).expect("results line");
    PathBuf::from(line.trim_start_matches("results: "))
}

#[test]
fn train_report_and_eval_agree() {
    let dir = setup();
    let o = fusedg(&["train", "--config", "small.toml", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("target,domain"));
    let exp = dir.path().join(result_dir(&text));
    assert!(exp.join("aggregate.csv").exists());

    let o = fusedg(&["report", "--dir", exp.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o), fs::read_to_string(exp.join("aggregate.csv")).unwrap());

    let run = exp.join("runs/target1_seed0");
    let o = fusedg(&["eval", "--run", run.to_str().unwrap(), "--out", "eval"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(dir.path().join("eval/report.txt")).unwrap(),
        fs::read_to_string(run.join("report.txt")).unwrap()
    );
}

#[test]
fn second_run_needs_force() {
    let dir = setup();
    let args = ["train", "--config", "small.toml", "--out", "res"];
    assert!(fusedg(&args, dir.path()).status.success());
    let again = fusedg(&args, dir.path());
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("--force"));
    let mut forced = args.to_vec();
    forced.push("--force");
    assert!(fusedg(&forced, dir.path()).status.success());
}

#[test]
fn flags_override_the_config_file() {
    let dir = setup();
    let a = fusedg(&["train", "--config", "small.toml", "--out", "res"], dir.path());
    let b = fusedg(
        &["train", "--config", "small.toml", "--out", "res", "--lambda", "0.5", "--set", "train.beta=0.25"],
        dir.path(),
    );
    assert!(a.status.success() && b.status.success());
    let spec = fs::read_to_string(dir.path().join(result_dir(&stdout(&b))).join("spec.json")).unwrap();
    assert!(spec.contains("\"lambda\": 0.5"), "{spec}");
    assert!(spec.contains("\"beta\": 0.25"), "{spec}");
    assert_ne!(result_dir(&stdout(&a)), result_dir(&stdout(&b)));
}

#[test]
fn import_writes_a_window_file_that_trains() {
    let dir = setup();
    let o = fusedg(&["import", "--config", "small.toml", "--file", "synth.dgw"], dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("from 4 domains"));
    let o = fusedg(
        &["train", "--config", "small.toml", "--out", "res", "--data-root", "synth.dgw"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn single_point_sweep() {
    let dir = setup();
    let o = fusedg(
        &["sweep", "--config", "small.toml", "--out", "res", "--lambdas", "0.1", "--betas", "0.5"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("selected lambda = 0.1, beta = 0.5"));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = setup();
    let o = fusedg(&["train", "--config", "missing.toml"], dir.path());
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.toml"));
    let o = fusedg(&["train", "--config", "small.toml", "--set", "train.no_such_key=1"], dir.path());
    assert!(!o.status.success());
    let o = fusedg(&["train", "--config", "small.toml", "--target", "9"], dir.path());
    assert!(!o.status.success());
}
