//! The three experiments. Every run is a pure function of its configuration:
//! model initialization, training data, test data and evaluation each draw
//! from their own stream derived from the base seed.

use std::path::Path;

use deepvote_core::sampling::{derive_seed, rng_from_seed, sample_profile};
use deepvote_core::{AxiomId, Profile, Rng};
use deepvote_models::{Model, ModelVoting, Objective, ObjectiveSet};
use log::info;
use rand::Rng as _;

use crate::config::ExperimentConfig;
use crate::dataset::{sample_pairs, Augmentation, Pair};
use crate::eval::{accuracy, axiom_scores, evaluate, EvalReport};
use crate::error::{HarnessError, Result};
use crate::report::{write_axioms, write_curve, write_summary, CurvePoint};
use crate::train::{build_model, StepLog, Trainer};

const STREAM_INIT: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_TEST: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_LOSS: u64 = 5;
const STREAM_AUGMENT: u64 = 6;

pub fn stream_seed(cfg: &ExperimentConfig, stream: u64) -> u64 {
    derive_seed(cfg.seed, stream)
}

/// Seed of every evaluation of the run, so rules and models see the same profiles.
pub fn eval_seed(cfg: &ExperimentConfig) -> u64 {
    stream_seed(cfg, STREAM_EVAL)
}

/// The labeled held-out set used for accuracy.
pub fn test_set(cfg: &ExperimentConfig) -> Result<Vec<Pair>> {
    let mut rng = rng_from_seed(stream_seed(cfg, STREAM_TEST));
    sample_pairs(cfg.rule, &cfg.dist, cfg.eval.test_size, cfg.model.m_max, cfg.model.n_max, &mut rng)
}

pub fn initial_model(cfg: &ExperimentConfig) -> Result<Model> {
    build_model(&cfg.model, &cfg.dist, &cfg.w2v, stream_seed(cfg, STREAM_INIT))
}

fn fresh_pairs(cfg: &ExperimentConfig, k: usize, rng: &mut Rng) -> Result<Vec<Pair>> {
    sample_pairs(cfg.rule, &cfg.dist, k, cfg.model.m_max, cfg.model.n_max, rng)
}

fn log_step(series: &str, log: &StepLog, every: usize, curve: &mut Vec<CurvePoint>) {
    if log.step % every == 0 {
        info!("{series} step {} lr {:.2e} loss {:.5}", log.step, log.lr, log.total);
        curve.push(CurvePoint {
            step: log.step,
            series: series.to_string(),
            metric: "loss".into(),
            value: log.total,
        });
    }
}

/// Evaluates the model with the configured decoder next to its teacher rule.
pub fn evaluate_against_teacher(
    model: &Model,
    cfg: &ExperimentConfig,
    test: &[Pair],
) -> Result<(EvalReport, EvalReport)> {
    let eval_seed = stream_seed(cfg, STREAM_EVAL);
    let (m_max, n_max) = (cfg.model.m_max, cfg.model.n_max);
    let teacher = evaluate(&cfg.rule, test, &cfg.dist, &cfg.eval, m_max, n_max, eval_seed)?;
    let f = ModelVoting::new(model, cfg.eval.decoder).with_seed(eval_seed);
    let report = evaluate(&f, test, &cfg.dist, &cfg.eval, m_max, n_max, eval_seed)?;
    Ok((teacher, report))
}

pub struct Exp1Result {
    pub model: Model,
    pub teacher: EvalReport,
    pub report: EvalReport,
    pub curve: Vec<CurvePoint>,
}

/// Supervised training on a stream of fresh batches, then relative evaluation.
pub fn run_exp1(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Exp1Result> {
    let mut model = initial_model(cfg)?;
    let curve = train_supervised(&mut model, cfg, cfg.train.steps)?;
    let test = test_set(cfg)?;
    let (teacher, report) = evaluate_against_teacher(&model, cfg, &test)?;
    if let Some(dir) = out {
        let tag = format!("exp1_{}", cfg.model.arch);
        write_summary(&dir.join(format!("{tag}_summary.csv")), &teacher, &[&report])?;
        write_axioms(&dir.join(format!("{tag}_axioms.csv")), &[&teacher, &report])?;
        write_curve(&dir.join(format!("{tag}_curve.csv")), &curve)?;
        model
            .to_checkpoint(&[("rule", cfg.rule.to_string()), ("distribution", cfg.dist.to_string())])
            .save(dir.join(format!("{tag}.ckpt")))?;
    }
    Ok(Exp1Result {
        model,
        teacher,
        report,
        curve,
    })
}

/// Trains `model` on `steps` fresh labeled batches.
pub fn train_supervised(model: &mut Model, cfg: &ExperimentConfig, steps: usize) -> Result<Vec<CurvePoint>> {
    let mut trainer = Trainer::new(model, &cfg.train);
    let mut data_rng = rng_from_seed(stream_seed(cfg, STREAM_TRAIN));
    let mut loss_rng = rng_from_seed(stream_seed(cfg, STREAM_LOSS));
    let mut curve = Vec::new();
    for _ in 0..steps {
        let batch = fresh_pairs(cfg, cfg.train.batch_size, &mut data_rng)?;
        let log = trainer.supervised_step(model, &batch, &mut loss_rng)?;
        log_step("train", &log, cfg.train.log_every, &mut curve);
    }
    Ok(curve)
}

pub struct Exp2v1Result {
    pub curve: Vec<CurvePoint>,
    /// Pairs sampled during pretraining; the augmented branch draws only from these.
    pub initial_pairs: usize,
    /// Pairs sampled after the fork by the (augmented, sampled) branches.
    pub sampled_after_fork: (usize, usize),
    pub augmented: Model,
    pub sampled: Model,
}

fn augmentation_axiom(a: Augmentation) -> AxiomId {
    match a {
        Augmentation::Neutrality => AxiomId::Neutrality,
        Augmentation::Anonymity => AxiomId::Anonymity,
    }
}

fn curve_point(
    model: &Model,
    cfg: &ExperimentConfig,
    test: &[Pair],
    step: usize,
    series: &str,
    points: &mut Vec<CurvePoint>,
) -> Result<()> {
    let eval_seed = stream_seed(cfg, STREAM_EVAL);
    let f = ModelVoting::new(model, cfg.eval.decoder).with_seed(eval_seed);
    let acc = accuracy(&f, test);
    let mut eval = cfg.eval.clone();
    eval.axioms = vec![augmentation_axiom(cfg.exp2.augment)];
    let scores = axiom_scores(&f, &cfg.dist, &eval, cfg.model.m_max, cfg.model.n_max, eval_seed)?;
    info!(
        "{series} step {step}: identity {:.2} {} {:.2}",
        acc.identity_pct, scores[0].axiom, scores[0].satisfied_pct
    );
    for (metric, value) in [
        ("identity_accuracy".to_string(), acc.identity_pct),
        ("subset_accuracy".to_string(), acc.subset_pct),
        (scores[0].axiom.to_string(), scores[0].satisfied_pct),
    ] {
        points.push(CurvePoint {
            step,
            series: series.to_string(),
            metric,
            value,
        });
    }
    Ok(())
}

/// Pretrain, fork, then continue one copy on augmented variations of the
/// pretraining data and the other on freshly sampled data.
pub fn run_exp2_v1(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Exp2v1Result> {
    let mut model = initial_model(cfg)?;
    let mut trainer = Trainer::new(&model, &cfg.train);
    let mut data_rng = rng_from_seed(stream_seed(cfg, STREAM_TRAIN));
    let mut loss_rng = rng_from_seed(stream_seed(cfg, STREAM_LOSS));
    let mut curve = Vec::new();
    let mut initial: Vec<Pair> = Vec::new();
    for _ in 0..cfg.exp2.pretrain_steps {
        let batch = fresh_pairs(cfg, cfg.train.batch_size, &mut data_rng)?;
        let log = trainer.supervised_step(&mut model, &batch, &mut loss_rng)?;
        log_step("pretrain", &log, cfg.train.log_every, &mut curve);
        initial.extend(batch);
    }
    if initial.is_empty() {
        return Err(HarnessError::Invalid("exp2 version 1 needs pretraining steps".into()));
    }
    let test = test_set(cfg)?;
    let pre = cfg.exp2.pretrain_steps;

    let (mut aug_model, mut aug_trainer) = (model.clone(), trainer.clone());
    let (mut smp_model, mut smp_trainer) = (model, trainer);
    let mut aug_rng = rng_from_seed(stream_seed(cfg, STREAM_AUGMENT));
    let mut aug_loss_rng = loss_rng.clone();
    let mut sampled_after_fork = (0usize, 0usize);
    curve_point(&aug_model, cfg, &test, pre, "augmented", &mut curve)?;
    curve_point(&smp_model, cfg, &test, pre, "sampled", &mut curve)?;
    for s in 1..=cfg.train.steps {
        let batch: Vec<Pair> = (0..cfg.train.batch_size)
            .map(|_| {
                let pick = &initial[aug_rng.random_range(0..initial.len())];
                cfg.exp2.augment.apply(pick, &mut aug_rng)
            })
            .collect();
        let log = aug_trainer.supervised_step(&mut aug_model, &batch, &mut aug_loss_rng)?;
        log_step("augmented", &log, cfg.train.log_every, &mut curve);

        let batch = fresh_pairs(cfg, cfg.train.batch_size, &mut data_rng)?;
        sampled_after_fork.1 += batch.len();
        let log = smp_trainer.supervised_step(&mut smp_model, &batch, &mut loss_rng)?;
        log_step("sampled", &log, cfg.train.log_every, &mut curve);

        if s % cfg.exp2.eval_every == 0 || s == cfg.train.steps {
            curve_point(&aug_model, cfg, &test, pre + s, "augmented", &mut curve)?;
            curve_point(&smp_model, cfg, &test, pre + s, "sampled", &mut curve)?;
        }
    }
    if let Some(dir) = out {
        write_curve(&dir.join(format!("exp2v1_{}_curve.csv", cfg.model.arch)), &curve)?;
    }
    Ok(Exp2v1Result {
        curve,
        initial_pairs: initial.len(),
        sampled_after_fork,
        augmented: aug_model,
        sampled: smp_model,
    })
}

/// Number of freshly sampled pairs in a batch of `batch_size` at `p` percent.
pub fn fresh_count(p: f64, batch_size: usize) -> usize {
    let k = (p * batch_size as f64 / 100.0 - 1e-9).ceil() as usize;
    k.clamp(1, batch_size)
}

/// `fresh` followed by variations of those same pairs, cycling through them
/// until the batch is full.
pub fn mixed_batch(fresh: Vec<Pair>, batch_size: usize, aug: Augmentation, rng: &mut Rng) -> Vec<Pair> {
    let k = fresh.len();
    let mut batch = fresh;
    for j in 0..batch_size.saturating_sub(k) {
        let v = aug.apply(&batch[j % k], rng);
        batch.push(v);
    }
    batch
}

pub struct Exp2v2Result {
    pub teacher: EvalReport,
    pub reports: Vec<(f64, EvalReport)>,
}

/// For each p of the grid, trains a fresh model on batches with p% sampled
/// pairs and evaluates it as in experiment 1.
pub fn run_exp2_v2(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Exp2v2Result> {
    let test = test_set(cfg)?;
    let mut reports = Vec::new();
    let mut teacher = None;
    let mut curve = Vec::new();
    for &p in &cfg.exp2.p_grid {
        let mut model = initial_model(cfg)?;
        let mut trainer = Trainer::new(&model, &cfg.train);
        let mut data_rng = rng_from_seed(stream_seed(cfg, STREAM_TRAIN));
        let mut aug_rng = rng_from_seed(stream_seed(cfg, STREAM_AUGMENT));
        let mut loss_rng = rng_from_seed(stream_seed(cfg, STREAM_LOSS));
        let k = fresh_count(p, cfg.train.batch_size);
        let series = format!("p={p}");
        for _ in 0..cfg.train.steps {
            let fresh = fresh_pairs(cfg, k, &mut data_rng)?;
            let batch = mixed_batch(fresh, cfg.train.batch_size, cfg.exp2.augment, &mut aug_rng);
            let log = trainer.supervised_step(&mut model, &batch, &mut loss_rng)?;
            log_step(&series, &log, cfg.train.log_every, &mut curve);
        }
        let (t, mut r) = evaluate_against_teacher(&model, cfg, &test)?;
        r.label = format!("{} p={p}", r.label);
        teacher.get_or_insert(t);
        reports.push((p, r));
    }
    let teacher = teacher.ok_or_else(|| HarnessError::Invalid("empty p grid".into()))?;
    if let Some(dir) = out {
        let tag = format!("exp2v2_{}", cfg.model.arch);
        let rs: Vec<&EvalReport> = reports.iter().map(|(_, r)| r).collect();
        write_summary(&dir.join(format!("{tag}_summary.csv")), &teacher, &rs)?;
        let mut all = vec![&teacher];
        all.extend(rs);
        write_axioms(&dir.join(format!("{tag}_axioms.csv")), &all)?;
        write_curve(&dir.join(format!("{tag}_curve.csv")), &curve)?;
    }
    Ok(Exp2v2Result { teacher, reports })
}

pub struct Exp3Result {
    pub model: Model,
    pub report: EvalReport,
    /// Every objective's value at every step.
    pub losses: Vec<CurvePoint>,
}

/// Unsupervised training on the combined axiom loss.
pub fn run_exp3(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Exp3Result> {
    let mut model = initial_model(cfg)?;
    let mut trainer = Trainer::new(&model, &cfg.train);
    let mut data_rng = rng_from_seed(stream_seed(cfg, STREAM_TRAIN));
    let mut loss_rng = rng_from_seed(stream_seed(cfg, STREAM_LOSS));
    let needs_labels = cfg.objectives.needs_labels();
    let mut losses = Vec::new();
    for _ in 0..cfg.train.steps {
        let log = if needs_labels {
            let batch = fresh_pairs(cfg, cfg.train.batch_size, &mut data_rng)?;
            let (profiles, targets): (Vec<Profile>, Vec<_>) = batch.into_iter().unzip();
            trainer.step(&mut model, &profiles, Some(&targets), &cfg.objectives, &cfg.loss, &mut loss_rng)?
        } else {
            let profiles = (0..cfg.train.batch_size)
                .map(|_| sample_profile(&cfg.dist, cfg.model.m_max, cfg.model.n_max, &mut data_rng))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            trainer.step(&mut model, &profiles, None, &cfg.objectives, &cfg.loss, &mut loss_rng)?
        };
        if log.step % cfg.train.log_every == 0 {
            info!("exp3 step {} loss {:.5} {:?}", log.step, log.total, log.parts);
        }
        for (o, v) in &log.parts {
            losses.push(CurvePoint {
                step: log.step,
                series: "exp3".into(),
                metric: o.to_string(),
                value: *v,
            });
        }
    }
    let test = test_set(cfg)?;
    let eval_seed = stream_seed(cfg, STREAM_EVAL);
    let f = ModelVoting::new(&model, cfg.eval.decoder).with_seed(eval_seed);
    let mut report = evaluate(&f, &test, &cfg.dist, &cfg.eval, cfg.model.m_max, cfg.model.n_max, eval_seed)?;
    report.label = format!("{} [{}]", report.label, cfg.objectives);
    if let Some(dir) = out {
        let tag = format!("exp3_{}", cfg.model.arch);
        write_axioms(&dir.join(format!("{tag}_axioms.csv")), &[&report])?;
        write_curve(&dir.join(format!("{tag}_losses.csv")), &losses)?;
        model
            .to_checkpoint(&[
                ("objectives", cfg.objectives.to_string()),
                ("distribution", cfg.dist.to_string()),
                ("decoder", cfg.eval.decoder.to_string()),
            ])
            .save(dir.join(format!("{tag}.ckpt")))?;
    }
    Ok(Exp3Result { model, report, losses })
}

/// The objective sets of the ablation: no-winner plus every subset of
/// {Condorcet, Pareto, Independence}.
pub fn ablation_sets() -> Vec<ObjectiveSet> {
    let extra = [Objective::Condorcet, Objective::Pareto, Objective::Independence];
    (0..8u32)
        .map(|mask| {
            let mut os = vec![Objective::NoWinner];
            os.extend((0..3).filter(|i| mask >> i & 1 == 1).map(|i| extra[i]));
            ObjectiveSet::new(&os).expect("nonempty")
        })
        .collect()
}

pub fn run_ablation(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Vec<EvalReport>> {
    let mut reports = Vec::new();
    for set in ablation_sets() {
        let mut c = cfg.clone();
        c.objectives = set;
        reports.push(run_exp3(&c, None)?.report);
    }
    if let Some(dir) = out {
        let rs: Vec<&EvalReport> = reports.iter().collect();
        write_axioms(&dir.join(format!("ablation_{}_axioms.csv", cfg.model.arch)), &rs)?;
    }
    Ok(reports)
}
