use std::path::Path;
use std::process::Command;

use birch::experiments::{run_grid, ExperimentConfig, CSV_COLUMNS};

fn birch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_birch"))
}

fn data(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn golden_grid_csv_is_stable() {
    let cfg = ExperimentConfig::load(&data("golden.toml")).unwrap();
    let expected = std::fs::read_to_string(data("golden.csv")).unwrap();
    assert_eq!(run_grid(&cfg, 1).unwrap().to_csv(), expected);
    assert_eq!(expected.lines().next().unwrap(), CSV_COLUMNS.join(","));
}

#[test]
fn grid_is_identical_serial_and_parallel() {
    let cfg = ExperimentConfig::load(&data("golden.toml")).unwrap();
    let a = run_grid(&cfg, 1).unwrap().to_csv();
    let b = run_grid(&cfg, 4).unwrap().to_csv();
    assert_eq!(a, b);
}

#[test]
fn grid_writes_results_top1_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[run]\nmethods = [\"vanilla\", \"ringmaster\"]\n[problem]\nkind = \"quadratic\"\nnoise = \"exact\"\n\
         [timing]\nregime = \"classical\"\nn = 2\n[hyper]\nG = 2\ngamma = [0.1, 0.2]\n[stop]\nmax_sim_time = 100.0\n\
         [output]\ncurves = true\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let st = birch()
        .args(["grid", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--jobs", "2"])
        .status()
        .unwrap();
    assert!(st.success());
    let results = std::fs::read_to_string(out.join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 5);
    let top = std::fs::read_to_string(out.join("top1.csv")).unwrap();
    assert_eq!(top.lines().count(), 3);
    assert_eq!(std::fs::read_dir(out.join("curves")).unwrap().count(), 4);
}

#[test]
fn simulate_then_verify_tree() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        "[run]\nmethod = \"async-local\"\n[problem]\nkind = \"quadratic\"\nsigma2 = 1.0\n\
         [timing]\nregime = \"hetero-compute\"\nn = 4\n[hyper]\nB = 6\nM = 2\ngamma = 0.05\n\
         [stop]\nmax_branch_len = 100\nmax_sim_time = 1e6\n[output]\ntree = true\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = birch()
        .args(["simulate", "--seed", "4", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("within_claim=true"));
    assert!(out.join("trace.csv").exists() && out.join("curve.dat").exists());
    let v = birch().arg("verify-tree").arg(out.join("tree.txt")).output().unwrap();
    assert!(v.status.success());
    // a tighter claim than the method's bound fails
    let v = birch()
        .arg("verify-tree")
        .arg(out.join("tree.txt"))
        .args(["--claimed-r", "0"])
        .output()
        .unwrap();
    assert_eq!(v.status.code(), Some(1));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[run]\nmethods = []\n[problem]\nkind = \"quadratic\"\n[timing]\nregime = \"classical\"\nn = 2\n").unwrap();
    let st = birch().args(["grid", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let st = birch().args(["simulate", "--config", "/nonexistent/x.toml"]).status().unwrap();
    assert_eq!(st.code(), Some(2));
    let garbage = dir.path().join("tree.txt");
    std::fs::write(&garbage, "not a tree\n").unwrap();
    let st = birch().arg("verify-tree").arg(&garbage).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn presets_formulas_and_race_print() {
    let o = birch().args(["presets", "--n", "4"]).output().unwrap();
    let s = String::from_utf8(o.stdout).unwrap();
    assert!(s.contains("slow-comm") && s.contains("[100.0, 100.0, 100.0, 100.0]"));
    let o = birch().args(["formulas", "--regime", "slow-comm"]).output().unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("fedavg-canonical"));
    let o = birch().args(["quadratic-race", "--mu", "0.1", "--B", "16"]).output().unwrap();
    assert!(o.status.success());
    assert!(String::from_utf8(o.stdout).unwrap().contains("ratio:"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ExperimentConfig::load(&p).unwrap_or_else(|err| panic!("{}: {err}", p.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}
