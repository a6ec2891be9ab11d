use deepvote_core::sampling::rng_from_seed;
use deepvote_core::{apply_rule, AxiomId, DistributionSpec, RuleId};
use deepvote_harness::dataset::{sample_pairs, rename_alternatives};
use deepvote_harness::experiments::{
    ablation_sets, fresh_count, initial_model, mixed_batch, run_exp1, run_exp2_v1, run_exp2_v2, run_exp3,
};
use deepvote_harness::{Augmentation, Config, ExperimentConfig, ExperimentKind};
use deepvote_models::{Model, Objective};

const TINY: &str = "bounds.m_max = 4\nbounds.n_max = 7\nmodel.hidden = 16\nmodel.channels = 4\nmodel.embed_dim = 8\n\
    train.steps = 20\ntrain.batch = 16\neval.test_size = 40\neval.axiom_profiles = 20\n\
    eval.independence_profiles = 16\nw2v.corpus = 300\nw2v.epochs = 1\nexp2.pretrain = 5\nexp2.eval_every = 5\n";

fn tiny(kind: ExperimentKind, extra: &str) -> ExperimentConfig {
    ExperimentConfig::resolve(&Config::parse(&format!("{TINY}{extra}")).unwrap(), kind).unwrap()
}

fn same_function(a: &Model, b: &Model) -> bool {
    let mut rng = rng_from_seed(99);
    let profiles: Vec<_> = sample_pairs(RuleId::Borda, &DistributionSpec::ic(), 30, 4, 7, &mut rng)
        .unwrap()
        .into_iter()
        .map(|(p, _)| p)
        .collect();
    a.logits(&profiles).unwrap() == b.logits(&profiles).unwrap()
}

fn read_dir(dir: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn exp1_reports_are_relative_to_the_teacher() {
    let cfg = tiny(ExperimentKind::Exp1, "");
    let r = run_exp1(&cfg, None).unwrap();
    assert_eq!(r.teacher.label, "plurality");
    assert_eq!(r.report.label, "mlp");
    assert_eq!(r.teacher.accuracy.identity_pct, 100.0);
    for (name, v) in r.report.columns() {
        assert!((0.0..=100.0).contains(&v), "{name} {v}");
    }
    let t = r.teacher.columns();
    for ((name, rel), ((_, tv), (_, mv))) in r.report.relative_to(&r.teacher).into_iter().zip(t.iter().zip(r.report.columns())) {
        assert_eq!(rel, tv - mv, "{name}");
    }
    assert_eq!(r.report.axioms.len(), AxiomId::ALL.len());
    assert_eq!(r.curve.len(), 0);
}

#[test]
fn runs_are_reproducible() {
    let cfg = tiny(ExperimentKind::Exp1, "train.log_every = 5\narch = cnn");
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_exp1(&cfg, Some(a.path())).unwrap();
    let rb = run_exp1(&cfg, Some(b.path())).unwrap();
    assert!(same_function(&ra.model, &rb.model));
    let (fa, fb) = (read_dir(a.path()), read_dir(b.path()));
    let names: Vec<&str> = fa.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(
        names,
        ["exp1_cnn.ckpt", "exp1_cnn_axioms.csv", "exp1_cnn_curve.csv", "exp1_cnn_summary.csv"]
    );
    assert_eq!(fa, fb);
    let summary = String::from_utf8(fa[3].1.clone()).unwrap();
    assert!(summary.starts_with("rule_or_model,metric,value,relative\nplurality,identity_accuracy,100.0000,0.0000\n"));
    let curve = String::from_utf8(fa[2].1.clone()).unwrap();
    assert_eq!(curve.lines().count(), 1 + 4);

    let other = tiny(ExperimentKind::Exp1, "train.log_every = 5\narch = cnn\nseed = 8");
    let rc = run_exp1(&other, None).unwrap();
    assert!(!same_function(&ra.model, &rc.model));
}

#[test]
fn wec_is_anonymous_by_construction() {
    let cfg = tiny(ExperimentKind::Exp1, "arch = wec\neval.axioms = anonymity");
    let r = run_exp1(&cfg, None).unwrap();
    let a = r.report.axiom(AxiomId::Anonymity).unwrap();
    assert_eq!(a.n_applicable, 20);
    assert_eq!(a.satisfied_pct, 100.0);
}

#[test]
fn fresh_share_of_a_batch() {
    assert_eq!(fresh_count(100.0, 200), 200);
    assert_eq!(fresh_count(50.0, 200), 100);
    assert_eq!(fresh_count(10.0, 200), 20);
    assert_eq!(fresh_count(33.3, 200), 67);
    assert_eq!(fresh_count(0.1, 200), 1);
    assert_eq!(fresh_count(1.0, 30), 1);
    for p in 1..=100 {
        assert_eq!(fresh_count(p as f64, 200), 2 * p);
    }
}

#[test]
fn mixed_batches_hold_variations_of_the_fresh_pairs() {
    let mut rng = rng_from_seed(3);
    let fresh = sample_pairs(RuleId::Borda, &DistributionSpec::ic(), 7, 5, 9, &mut rng).unwrap();
    for aug in [Augmentation::Neutrality, Augmentation::Anonymity] {
        let batch = mixed_batch(fresh.clone(), 200, aug, &mut rng);
        assert_eq!(batch.len(), 200);
        assert_eq!(&batch[..7], fresh.as_slice());
        for (j, (p, s)) in batch.iter().enumerate().skip(7) {
            let src = &fresh[(j - 7) % 7];
            assert_eq!((p.m(), p.n()), (src.0.m(), src.0.n()));
            assert_eq!(apply_rule(RuleId::Borda, p), *s);
            let mut a: Vec<_> = p.rankings().collect();
            let mut b: Vec<_> = src.0.rankings().collect();
            if aug == Augmentation::Anonymity {
                a.sort();
                b.sort();
                assert_eq!(a, b);
            } else {
                let sigma: Vec<usize> = {
                    // Recover the renaming from the first voter.
                    let mut sigma = vec![0; p.m()];
                    for (x, y) in src.0.ranking(0).iter().zip(p.ranking(0)) {
                        sigma[*x as usize] = *y as usize;
                    }
                    sigma
                };
                assert_eq!(rename_alternatives(src, &sigma), (p.clone(), *s));
            }
        }
    }
    assert_eq!(mixed_batch(fresh.clone(), 7, Augmentation::Anonymity, &mut rng), fresh);
}

#[test]
fn exp2_v1_branches_start_from_the_same_weights() {
    let cfg = tiny(ExperimentKind::Exp2v1, "train.steps = 0");
    let r = run_exp2_v1(&cfg, None).unwrap();
    assert!(same_function(&r.augmented, &r.sampled));
    assert_eq!(r.initial_pairs, 5 * 16);

    let cfg = tiny(ExperimentKind::Exp2v1, "train.steps = 12");
    let r = run_exp2_v1(&cfg, None).unwrap();
    assert_eq!(r.sampled_after_fork, (0, 12 * 16));
    assert!(!same_function(&r.augmented, &r.sampled));
    let steps: Vec<usize> = r
        .curve
        .iter()
        .filter(|c| c.series == "augmented" && c.metric == "identity_accuracy")
        .map(|c| c.step)
        .collect();
    assert_eq!(steps, [5, 10, 15, 17]);
    assert!(r.curve.iter().any(|c| c.metric == "neutrality"));
}

#[test]
fn exp2_v2_at_full_share_is_plain_training() {
    let cfg = tiny(ExperimentKind::Exp2v2, "exp2.p_grid = 100, 25");
    let v2 = run_exp2_v2(&cfg, None).unwrap();
    let v1 = run_exp1(&cfg, None).unwrap();
    assert_eq!(v2.teacher, v1.teacher);
    let (p, full) = &v2.reports[0];
    assert_eq!(*p, 100.0);
    assert_eq!(full.label, "mlp p=100");
    assert_eq!(full.accuracy, v1.report.accuracy);
    assert_eq!(full.axioms, v1.report.axioms);
    assert_eq!(v2.reports[1].1.label, "mlp p=25");
}

#[test]
fn exp3_records_every_objective_at_every_step() {
    let cfg = tiny(ExperimentKind::Exp3, "objectives = nw,condorcet,pareto,independence\neval.axioms = anonymity,neutrality");
    let dir = tempfile::tempdir().unwrap();
    let r = run_exp3(&cfg, Some(dir.path())).unwrap();
    assert_eq!(r.losses.len(), 20 * 4);
    for (i, c) in r.losses.iter().enumerate() {
        assert_eq!(c.step, i / 4 + 1);
        assert_eq!(c.metric, Objective::ALL[[0, 2, 3, 4][i % 4]].to_string());
        assert!(c.value.is_finite() && c.value >= 0.0);
    }
    assert_eq!(r.report.label, "wec+navg [nw,condorcet,pareto,independence]");
    // The WEC model with neutrality averaging is anonymous and neutral.
    for a in [AxiomId::Anonymity, AxiomId::Neutrality] {
        assert_eq!(r.report.axiom(a).unwrap().satisfied_pct, 100.0, "{a}");
    }
    assert!(dir.path().join("exp3_wec_losses.csv").exists());
    assert!(dir.path().join("exp3_wec.ckpt").exists());
}

#[test]
fn no_winner_alone_removes_empty_outputs() {
    let cfg = tiny(
        ExperimentKind::Exp3,
        "objectives = nw\narch = mlp\neval.decode = plain\ntrain.steps = 150\ntrain.lr = 0.01\neval.axioms = pareto",
    );
    let r = run_exp3(&cfg, None).unwrap();
    assert_eq!(r.report.accuracy.empty_pct, 0.0);
    let last: Vec<f64> = r.losses.iter().rev().take(5).map(|c| c.value).collect();
    assert!(last.iter().all(|&v| v < 0.05), "{last:?}");
}

#[test]
fn ablation_covers_every_subset() {
    let sets = ablation_sets();
    let names: Vec<String> = sets.iter().map(|s| s.to_string()).collect();
    assert_eq!(
        names,
        [
            "nw",
            "nw,condorcet",
            "nw,pareto",
            "nw,condorcet,pareto",
            "nw,independence",
            "nw,condorcet,independence",
            "nw,pareto,independence",
            "nw,condorcet,pareto,independence",
        ]
    );
}

#[test]
fn initial_models_depend_only_on_the_seed() {
    for arch in ["mlp", "cnn", "wec"] {
        let cfg = tiny(ExperimentKind::Exp1, &format!("arch = {arch}"));
        assert!(same_function(&initial_model(&cfg).unwrap(), &initial_model(&cfg).unwrap()));
    }
}
