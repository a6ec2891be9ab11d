use std::path::Path;
use std::process::Command;

const SMALL: [&str; 10] = [
    "--set", "bounds.m_max=4",
    "--set", "bounds.n_max=7",
    "--set", "model.hidden=12",
    "--set", "eval.axiom_profiles=20",
    "--set", "eval.test_size=30",
];

fn deepvote(out: &Path, args: &[&str]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_deepvote"))
        .arg("--out")
        .arg(out)
        .args(SMALL)
        .args(args)
        .output()
        .unwrap();
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

#[test]
fn sample_writes_a_readable_dataset_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = deepvote(dir.path(), &["--seed", "4", "--set", "sample.k=25", "--set", "rule=borda", "sample"]);
    assert!(stdout.starts_with("wrote 25 pairs"));
    let ds = deepvote_harness::Dataset::load(dir.path().join("dataset_borda_ic.tsv")).unwrap();
    assert_eq!(ds.len(), 25);
    assert_eq!(ds.provenance.seed, 4);
    let manifest = std::fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
    assert!(manifest.starts_with("# deepvote sample\n"));
    assert!(manifest.contains("seed = 4\n"));
    assert!(manifest.contains("rule = borda\n"));

    let again = tempfile::tempdir().unwrap();
    let manifest_path = dir.path().join("manifest.txt");
    deepvote(again.path(), &["--config", manifest_path.to_str().unwrap(), "sample"]);
    assert_eq!(
        std::fs::read(dir.path().join("dataset_borda_ic.tsv")).unwrap(),
        std::fs::read(again.path().join("dataset_borda_ic.tsv")).unwrap()
    );
}

#[test]
fn train_then_evaluate_and_compare() {
    let dir = tempfile::tempdir().unwrap();
    deepvote(dir.path(), &["--set", "train.steps=15", "--set", "train.batch=20", "--set", "rule=copeland", "train"]);
    let ckpt = dir.path().join("mlp_copeland.ckpt");
    assert!(ckpt.exists());
    let ckpt = ckpt.to_str().unwrap();

    let eval_dir = tempfile::tempdir().unwrap();
    let stdout = deepvote(eval_dir.path(), &["model-eval", "--checkpoint", ckpt]);
    assert!(stdout.starts_with("copeland: identity 100.00"), "{stdout}");
    let summary = std::fs::read_to_string(eval_dir.path().join("model_eval_summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("copeland,identity_accuracy,100.0000,0.0000"));

    let sim_dir = tempfile::tempdir().unwrap();
    deepvote(
        sim_dir.path(),
        &["--set", "sim.profiles=50", "--set", "sim.rules=borda,copeland", "similarity", "--checkpoint", ckpt],
    );
    let sim = std::fs::read_to_string(sim_dir.path().join("similarity.csv")).unwrap();
    assert_eq!(sim.lines().count(), 1 + 9);
    assert!(sim.contains("copeland,copeland,100.0000,100.0000"));

    let dis_dir = tempfile::tempdir().unwrap();
    let stdout = deepvote(
        dis_dir.path(),
        &["--set", "disagree.profiles=200", "--set", "disagree.rules=borda", "disagree", "--checkpoint", ckpt],
    );
    let saved = std::fs::read_to_string(dis_dir.path().join("disagreement.txt")).unwrap();
    assert_eq!(stdout, saved);
}

#[test]
fn crossval_on_a_saved_dataset() {
    let dir = tempfile::tempdir().unwrap();
    deepvote(dir.path(), &["--set", "sample.k=60", "sample"]);
    let data = dir.path().join("dataset_plurality_ic.tsv");
    let cv = tempfile::tempdir().unwrap();
    let stdout = deepvote(
        cv.path(),
        &["--set", "cv.folds=3", "--set", "cv.epochs=1", "--set", "train.batch=10", "crossval", "--dataset", data.to_str().unwrap()],
    );
    assert!(stdout.starts_with("test accuracy"));
    let text = std::fs::read_to_string(cv.path().join("crossval_mlp.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 3 + 2);
}

#[test]
fn rule_eval_and_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = deepvote(
        dir.path(),
        &["--set", "sim.rules=borda,blacks", "--set", "eval.axioms=condorcet,pareto", "rule-eval"],
    );
    assert!(stdout.contains("blacks: identity 100.00"));
    let text = std::fs::read_to_string(dir.path().join("rule_eval_axioms.csv")).unwrap();
    assert!(text.contains("blacks,condorcet,ic,"));
    assert!(text.contains(",100.0000\n"));

    let o = Command::new(env!("CARGO_BIN_EXE_deepvote"))
        .arg("--out")
        .arg(dir.path())
        .args(["--set", "train.stepz=3", "train"])
        .output()
        .unwrap();
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("train.stepz"));
}
