//! Gradient-step driver shared by every experiment.

use deepvote_core::sampling::rng_from_seed;
use deepvote_core::{DistributionSpec, Profile, Rng, WinningSet};
use deepvote_models::encode::profile_sentence;
use deepvote_models::{combined_loss, LossConfig, Model, ModelSpec, Architecture, Objective, ObjectiveSet};
use deepvote_nn::{word2vec_train, AdamW, AdamWConfig, Graph, ScheduleConfig};

use crate::config::{TrainConfig, W2vSettings};
use crate::error::{HarnessError, Result};

/// Loss values of one logged step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepLog {
    pub step: usize,
    pub lr: f64,
    pub total: f64,
    pub parts: Vec<(Objective, f64)>,
}

/// Optimizer state plus the learning-rate schedule. Cloning forks the run.
#[derive(Clone, Debug)]
pub struct Trainer {
    opt: AdamW,
    schedule: ScheduleConfig,
    eta_max: f64,
    step: usize,
}

impl Trainer {
    pub fn new(model: &Model, cfg: &TrainConfig) -> Self {
        let opt = AdamW::new(
            model.network().store(),
            AdamWConfig {
                lr: cfg.lr,
                weight_decay: cfg.weight_decay,
                ..AdamWConfig::default()
            },
        );
        Trainer {
            opt,
            schedule: ScheduleConfig {
                t_0: cfg.t_0,
                t_mult: cfg.t_mult,
                eta_min: cfg.eta_min,
            },
            eta_max: cfg.lr,
            step: 0,
        }
    }

    /// Steps taken so far.
    pub fn steps(&self) -> usize {
        self.step
    }

    /// One AdamW step on the objectives' combined loss over `profiles`.
    pub fn step(
        &mut self,
        model: &mut Model,
        profiles: &[Profile],
        targets: Option<&[WinningSet]>,
        objectives: &ObjectiveSet,
        loss_cfg: &LossConfig,
        rng: &mut Rng,
    ) -> Result<StepLog> {
        let lr = self.schedule.lr(self.step as u64, self.eta_max);
        let (total, parts, grads) = {
            let mut g = Graph::new(model.network().store());
            let c = combined_loss(&mut g, model, profiles, targets, objectives, loss_cfg, rng)?;
            let total = g.value(c.total).item();
            if !total.is_finite() {
                return Err(self.diverged(format!("loss is {total}")));
            }
            let grads = g.backward(c.total)?;
            (total, c.parts, grads)
        };
        if !grads.is_finite() {
            return Err(self.diverged(format!("non-finite gradient (loss {total})")));
        }
        self.opt.set_lr(lr);
        self.opt.step(model.network_mut().store_mut(), &grads)?;
        self.step += 1;
        Ok(StepLog {
            step: self.step,
            lr,
            total,
            parts,
        })
    }

    /// Supervised step with the binary cross-entropy objective.
    pub fn supervised_step(&mut self, model: &mut Model, batch: &[(Profile, WinningSet)], rng: &mut Rng) -> Result<StepLog> {
        let (profiles, targets): (Vec<Profile>, Vec<WinningSet>) = batch.iter().cloned().unzip();
        let bce = ObjectiveSet::new(&[Objective::Bce])?;
        self.step(model, &profiles, Some(&targets), &bce, &LossConfig::default(), rng)
    }

    fn diverged(&self, detail: String) -> HarnessError {
        HarnessError::Diverged {
            step: self.step + 1,
            detail,
        }
    }
}

/// Builds the model of `spec`. WEC embeddings are pretrained with word2vec
/// on a corpus drawn from `dist` when enabled.
pub fn build_model(spec: &ModelSpec, dist: &DistributionSpec, w2v: &W2vSettings, seed: u64) -> Result<Model> {
    let mut rng = rng_from_seed(seed);
    if spec.arch != Architecture::Wec || !w2v.pretrain {
        return Ok(Model::build(spec.clone(), &mut rng)?);
    }
    let mut corpus = Vec::with_capacity(w2v.corpus);
    for _ in 0..w2v.corpus {
        let p = deepvote_core::sampling::sample_profile(dist, spec.m_max, spec.n_max, &mut rng)?;
        corpus.push(profile_sentence(&p));
    }
    let mut cfg = w2v.config.clone();
    cfg.dim = spec.embed_dim;
    let emb = word2vec_train(&corpus, &cfg, &mut rng)?;
    Ok(Model::build_with_embeddings(spec.clone(), &emb, &mut rng)?)
}
