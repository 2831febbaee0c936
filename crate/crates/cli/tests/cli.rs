use std::path::Path;
use std::process::{Command, Output};

use double_ensemble::dataset::{make_synthetic_classification, write_csv};
use double_ensemble::ensemble::EnsembleState;

fn dbens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dbens")).args(args).output().expect("binary runs")
}

fn setup(dir: &Path) -> String {
    let task = make_synthetic_classification(120, 3, 1, 0.3, 8).unwrap();
    let data = dir.join("train.csv");
    write_csv(&task.dataset, &data, "label").unwrap();
    let config = dir.join("config.toml");
    std::fs::write(
        &config,
        format!(
            "seeds = [3]\noutput_dir = {:?}\n\n[data]\nsource = \"csv\"\npath = {:?}\ntask = \"binary_classification\"\n\n\
             [ensemble]\nsub_models = 2\n\n[ensemble.learner]\niterations = 8\n\n[ensemble.learner.gbdt]\nmax_leaves = 4\nmin_samples_leaf = 5\n",
            dir.join("out").to_str().unwrap(),
            data.to_str().unwrap()
        ),
    )
    .unwrap();
    config.to_str().unwrap().to_owned()
}

fn read_scores(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn fit_then_predict_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let fit = dbens(&["fit", "--config", &config]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    let model = dir.path().join("out/model.json");
    assert!(dir.path().join("out/weights_k1.csv").exists());
    assert!(dir.path().join("out/features_k1.csv").exists());
    assert!(dir.path().join("out/provenance.toml").exists());

    let scores = dir.path().join("scores.csv");
    let train = dir.path().join("train.csv");
    let out = dbens(&[
        "predict",
        "--model",
        model.to_str().unwrap(),
        "--input",
        train.to_str().unwrap(),
        "--output",
        scores.to_str().unwrap(),
        "--label-column",
        "label",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let from_cli = read_scores(&scores);
    assert_eq!(from_cli.len(), 120);
    assert!(from_cli.iter().all(|s| s.is_finite()));

    let state = EnsembleState::load(&model).unwrap();
    let data = double_ensemble::dataset::load_csv(&train, "label", double_ensemble::TaskKind::BinaryClassification)
        .unwrap();
    let in_memory = state.predict(data.features()).unwrap();
    for (a, b) in from_cli.iter().zip(&in_memory) {
        assert!((a - b).abs() <= 1e-12);
    }
}

#[test]
fn predict_rejects_wrong_width() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    assert!(dbens(&["fit", "--config", &config]).status.success());
    let narrow = dir.path().join("narrow.csv");
    std::fs::write(&narrow, "a,b\n0.1,0.2\n0.3,0.4\n").unwrap();
    let out = dbens(&[
        "predict",
        "--model",
        dir.path().join("out/model.json").to_str().unwrap(),
        "--input",
        narrow.to_str().unwrap(),
        "--output",
        dir.path().join("s.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("expected 4, found 2"), "{msg}");
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(dbens(&["fit", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(dbens(&[]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "seeds = []\n").unwrap();
    assert_eq!(dbens(&["eval", "--config", bad.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn missing_data_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!(
            "output_dir = {:?}\n[data]\nsource = \"csv\"\npath = \"/nonexistent/x.csv\"\ntask = \"regression\"\n",
            dir.path().join("o").to_str().unwrap()
        ),
    )
    .unwrap();
    assert_eq!(dbens(&["fit", "--config", cfg.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn help_succeeds() {
    let out = dbens(&["--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("noise-grid"));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        double_ensemble::harness::ExperimentConfig::load(&path)
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        seen += 1;
    }
    assert!(seen >= 3);
}

#[test]
fn eval_writes_reports_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/eval-small.toml");
    let out = dir.path().join("eval");
    let run = dbens(&[
        "eval",
        "--config",
        config.to_str().unwrap(),
        "--seeds",
        "4",
        "--sub-models",
        "2",
        "--iterations",
        "10",
        "--output-dir",
        out.to_str().unwrap(),
    ]);
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    for file in ["report_seed4.toml", "report_seed4.csv", "summary.csv", "provenance.toml", "seed_4/weights_k1.csv"] {
        assert!(out.join(file).exists(), "{file}");
    }
    assert!(String::from_utf8_lossy(&run.stdout).contains("auc"));
}
