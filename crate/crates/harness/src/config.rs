//! Plain-text run configuration: `key = value` lines with namespaced keys,
//! resolved into an [`ExperimentConfig`] with every default filled in.

use std::collections::BTreeMap;
use std::fmt::{self, Display};
use std::path::Path;
use std::str::FromStr;

use deepvote_core::axioms::CheckParams;
use deepvote_core::{AxiomId, DistributionSpec, RuleId};
use deepvote_models::{Architecture, Decoder, KtMode, LossConfig, ModelSpec, Objective, ObjectiveSet};
use deepvote_nn::Word2VecConfig;

use crate::dataset::Augmentation;
use crate::error::{HarnessError, Result};
use crate::similarity::DisagreementMode;

/// Every accepted key with a one-line description. `weight.<objective>` keys
/// are accepted in addition.
pub const KEYS: &[(&str, &str)] = &[
    ("seed", "base seed of the run"),
    ("arch", "mlp, cnn or wec"),
    ("rule", "teacher rule for supervised runs"),
    ("dist.kind", "ic, mallows, urn_r or euclidean"),
    ("dist.rel_phi", "fixed Mallows rel-phi (default: uniform per profile)"),
    ("dist.urn_alpha", "fixed urn alpha (default: Gamma(0.8, 1) per profile)"),
    ("bounds.m_max", "maximum number of alternatives"),
    ("bounds.n_max", "maximum number of voters"),
    ("model.hidden", "width of the hidden linear layers"),
    ("model.channels", "CNN channels"),
    ("model.embed_dim", "WEC embedding dimension"),
    ("model.layer_norm", "layer norm after hidden layers"),
    ("model.kt_reorder", "none, global or local (CNN input reordering)"),
    ("train.steps", "gradient steps, overriding the experiment default"),
    ("train.batch", "batch size"),
    ("train.lr", "AdamW peak learning rate"),
    ("train.weight_decay", "AdamW decoupled weight decay"),
    ("train.t0", "first cosine restart period in steps"),
    ("train.t_mult", "restart period multiplier"),
    ("train.eta_min", "learning-rate floor"),
    ("train.log_every", "steps between logged loss values"),
    ("exp1.steps", "default steps of exp1 and train"),
    ("exp2.steps", "default steps of each exp2 branch"),
    ("exp3.steps", "default steps of exp3"),
    ("eval.test_size", "labeled pairs for accuracy"),
    ("eval.axiom_profiles", "applicable profiles per axiom"),
    ("eval.axioms", "comma list of axioms to evaluate"),
    ("eval.decode", "plain, navg or naavg"),
    ("eval.anonymity_samples", "voter permutations per anonymity check"),
    ("eval.neutrality_samples", "alternative permutations per neutrality check"),
    ("eval.independence_variants", "order-preserving rankings per voter"),
    ("eval.independence_profiles", "perturbed profiles per (winner, loser) pair"),
    ("eval.independence_axiom_profiles", "applicable profiles for independence (default: eval.axiom_profiles)"),
    ("w2v.pretrain", "pretrain WEC embeddings with word2vec"),
    ("w2v.corpus", "profiles in the word2vec corpus"),
    ("w2v.window", "word2vec context window"),
    ("w2v.epochs", "word2vec epochs"),
    ("w2v.negatives", "negative samples per pair"),
    ("exp2.augment", "neutrality or anonymity"),
    ("exp2.pretrain", "pretraining steps before the fork (version 1)"),
    ("exp2.eval_every", "steps between curve points (version 1)"),
    ("exp2.p_grid", "comma list of sampled percentages (version 2)"),
    ("objectives", "comma list of nw, anonymity, condorcet, pareto, independence, bce"),
    ("loss.anonymity_samples", "voter permutations in the anonymity loss"),
    ("loss.independence_pairs", "alternative pairs in the independence loss"),
    ("cv.size", "dataset size for cross-validation"),
    ("cv.folds", "number of folds"),
    ("cv.epochs", "epochs per fold"),
    ("sim.profiles", "profiles for similarity tables"),
    ("sim.rules", "comma list of rules (default: all)"),
    ("disagree.profiles", "profiles scanned for a disagreement"),
    ("disagree.mode", "weak or strong"),
    ("disagree.rules", "comma list of rules (default: all)"),
    ("sample.k", "pairs written by the sample command"),
];

fn is_known(key: &str) -> bool {
    if let Some(name) = key.strip_prefix("weight.") {
        return name.parse::<Objective>().is_ok();
    }
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Raw key-value pairs. Later assignments win.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(HarnessError::config(line, format!("line {}: expected `key = value`", i + 1)));
            };
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Named bundles of settings: `paper` (defaults, n ≤ 55 and m ≤ 5),
    /// `paper77` (n ≤ 77, m ≤ 7) and `desk` (reduced step counts and sizes).
    pub fn preset(name: &str) -> Result<Self> {
        let text = match name {
            "paper" => "",
            "paper77" => "bounds.m_max = 7\nbounds.n_max = 77\n",
            "desk" => {
                "train.t0 = 600\n\
                 exp1.steps = 4200\n\
                 exp2.steps = 500\n\
                 exp2.pretrain = 500\n\
                 exp2.eval_every = 100\n\
                 exp3.steps = 1800\n\
                 cv.size = 10000\n\
                 cv.epochs = 2\n\
                 w2v.corpus = 10000\n"
            }
            other => return Err(HarnessError::config("preset", format!("unknown preset `{other}`"))),
        };
        Self::parse(text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !is_known(key) {
            return Err(HarnessError::config(key, "unknown key"));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Parses a `key=value` command-line override.
    pub fn set_pair(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| HarnessError::config(pair, "expected key=value"))?;
        self.set(k.trim(), v.trim())
    }

    /// Overlays `other` on top of `self`.
    pub fn merge(&mut self, other: &Config) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn parse_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e: T::Err| HarnessError::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn parse_opt<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e: T::Err| HarnessError::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn list_or<T>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| s.parse().map_err(|e: T::Err| HarnessError::config(key, format!("`{s}`: {e}"))))
                .collect(),
        }
    }
}

/// Sorted `key = value` lines; parses back to the same config.
impl Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Exp1,
    Exp2v1,
    Exp2v2,
    Exp3,
    Ablation,
    Similarity,
    CrossVal,
}

impl ExperimentKind {
    fn default_steps(self) -> (&'static str, usize) {
        match self {
            ExperimentKind::Exp2v1 | ExperimentKind::Exp2v2 => ("exp2.steps", 5000),
            ExperimentKind::Exp3 | ExperimentKind::Ablation => ("exp3.steps", 15000),
            _ => ("exp1.steps", 15000),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub t_0: u64,
    pub t_mult: u64,
    pub eta_min: f64,
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 15000,
            batch_size: 200,
            lr: 1e-3,
            weight_decay: 0.01,
            t_0: 1000,
            t_mult: 2,
            eta_min: 0.0,
            log_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub test_size: usize,
    pub axiom_profiles: usize,
    /// Applicable profiles for independence, which is by far the costliest check.
    pub independence_axiom_profiles: usize,
    pub axioms: Vec<AxiomId>,
    pub decoder: Decoder,
    pub checks: CheckParams,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            test_size: 1000,
            axiom_profiles: 400,
            independence_axiom_profiles: 400,
            axioms: AxiomId::ALL.to_vec(),
            decoder: Decoder::Plain,
            checks: CheckParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct W2vSettings {
    pub pretrain: bool,
    pub corpus: usize,
    pub config: Word2VecConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Exp2Config {
    pub augment: Augmentation,
    pub pretrain_steps: usize,
    pub eval_every: usize,
    pub p_grid: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossValConfig {
    pub size: usize,
    pub folds: usize,
    pub epochs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityConfig {
    pub profiles: usize,
    pub rules: Vec<RuleId>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisagreeConfig {
    pub profiles: usize,
    pub mode: DisagreementMode,
    pub rules: Vec<RuleId>,
}

/// A fully resolved run configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub rule: RuleId,
    pub dist: DistributionSpec,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub w2v: W2vSettings,
    pub exp2: Exp2Config,
    pub objectives: ObjectiveSet,
    pub loss: LossConfig,
    pub cv: CrossValConfig,
    pub sim: SimilarityConfig,
    pub disagree: DisagreeConfig,
    pub sample_k: usize,
}

fn positive(key: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(HarnessError::config(key, "must be positive"));
    }
    Ok(v)
}

impl ExperimentConfig {
    pub fn resolve(cfg: &Config, kind: ExperimentKind) -> Result<Self> {
        let m_max = positive("bounds.m_max", cfg.parse_or("bounds.m_max", 5)?)?;
        let n_max = positive("bounds.n_max", cfg.parse_or("bounds.n_max", 55)?)?;
        let unsupervised = matches!(kind, ExperimentKind::Exp3 | ExperimentKind::Ablation);
        let arch: Architecture = cfg.parse_or("arch", if unsupervised { Architecture::Wec } else { Architecture::Mlp })?;

        let mut model = ModelSpec::new(arch, m_max, n_max);
        model.hidden = positive("model.hidden", cfg.parse_or("model.hidden", model.hidden)?)?;
        model.channels = positive("model.channels", cfg.parse_or("model.channels", model.channels)?)?;
        model.embed_dim = positive("model.embed_dim", cfg.parse_or("model.embed_dim", model.embed_dim)?)?;
        model.layer_norm = cfg.parse_or("model.layer_norm", false)?;
        model.kt_reorder = match cfg.get("model.kt_reorder").map(str::trim) {
            None | Some("none") => None,
            Some(_) => Some(cfg.parse_or("model.kt_reorder", KtMode::Global)?),
        };
        model.validate()?;

        let mut dist = DistributionSpec::new(cfg.parse_or("dist.kind", deepvote_core::DistributionKind::IC)?);
        dist.rel_phi = cfg.parse_opt("dist.rel_phi")?;
        dist.urn_alpha = cfg.parse_opt("dist.urn_alpha")?;
        dist.validate()?;

        let (steps_key, steps_default) = kind.default_steps();
        let steps = match cfg.get("train.steps") {
            Some(_) => cfg.parse_or("train.steps", 0)?,
            None => cfg.parse_or(steps_key, steps_default)?,
        };
        let d = TrainConfig::default();
        let train = TrainConfig {
            steps,
            batch_size: positive("train.batch", cfg.parse_or("train.batch", d.batch_size)?)?,
            lr: cfg.parse_or("train.lr", d.lr)?,
            weight_decay: cfg.parse_or("train.weight_decay", d.weight_decay)?,
            t_0: cfg.parse_or("train.t0", d.t_0)?.max(1),
            t_mult: cfg.parse_or("train.t_mult", d.t_mult)?.max(1),
            eta_min: cfg.parse_or("train.eta_min", d.eta_min)?,
            log_every: cfg.parse_or("train.log_every", d.log_every)?.max(1),
        };

        let e = EvalConfig::default();
        let axiom_profiles = positive("eval.axiom_profiles", cfg.parse_or("eval.axiom_profiles", e.axiom_profiles)?)?;
        let eval = EvalConfig {
            test_size: positive("eval.test_size", cfg.parse_or("eval.test_size", e.test_size)?)?,
            axiom_profiles,
            independence_axiom_profiles: positive(
                "eval.independence_axiom_profiles",
                cfg.parse_or("eval.independence_axiom_profiles", axiom_profiles)?,
            )?,
            axioms: cfg.list_or("eval.axioms", e.axioms)?,
            decoder: cfg.parse_or("eval.decode", if unsupervised { Decoder::NeutralityAvg } else { e.decoder })?,
            checks: CheckParams {
                anonymity_samples: cfg.parse_or("eval.anonymity_samples", e.checks.anonymity_samples)?,
                neutrality_samples: cfg.parse_or("eval.neutrality_samples", e.checks.neutrality_samples)?,
                independence_variants: positive(
                    "eval.independence_variants",
                    cfg.parse_or("eval.independence_variants", e.checks.independence_variants)?,
                )?,
                independence_profiles: cfg.parse_or("eval.independence_profiles", e.checks.independence_profiles)?,
            },
        };

        let small = m_max <= 5;
        let w = Word2VecConfig::default();
        let w2v = W2vSettings {
            pretrain: cfg.parse_or("w2v.pretrain", true)?,
            corpus: positive("w2v.corpus", cfg.parse_or("w2v.corpus", if small { 20_000 } else { 100_000 })?)?,
            config: Word2VecConfig {
                dim: model.embed_dim,
                window: cfg.parse_or("w2v.window", if small { 5 } else { 7 })?,
                negatives: cfg.parse_or("w2v.negatives", w.negatives)?,
                epochs: cfg.parse_or("w2v.epochs", w.epochs)?,
                ..w
            },
        };

        let exp2 = Exp2Config {
            augment: cfg.parse_or("exp2.augment", Augmentation::Neutrality)?,
            pretrain_steps: cfg.parse_or("exp2.pretrain", 500)?,
            eval_every: positive("exp2.eval_every", cfg.parse_or("exp2.eval_every", 250)?)?,
            p_grid: cfg.list_or("exp2.p_grid", vec![10.0, 25.0, 50.0, 100.0])?,
        };
        if let Some(p) = exp2.p_grid.iter().find(|p| !(**p > 0.0 && **p <= 100.0)) {
            return Err(HarnessError::config("exp2.p_grid", format!("{p} is outside (0, 100]")));
        }

        let mut objectives = match cfg.get("objectives") {
            Some(list) => ObjectiveSet::parse(list).map_err(|e| HarnessError::config("objectives", e.to_string()))?,
            None => ObjectiveSet::new(&[Objective::NoWinner, Objective::Condorcet, Objective::Pareto])?,
        };
        for (k, _) in cfg.iter() {
            if let Some(name) = k.strip_prefix("weight.") {
                let o: Objective = name.parse().map_err(|e: deepvote_models::ModelError| HarnessError::config(k, e.to_string()))?;
                let w: f64 = cfg.parse_or(k, 1.0)?;
                objectives.set_weight(o, w).map_err(|e| HarnessError::config(k, e.to_string()))?;
            }
        }
        let l = LossConfig::default();
        let loss = LossConfig {
            anonymity_samples: positive("loss.anonymity_samples", cfg.parse_or("loss.anonymity_samples", l.anonymity_samples)?)?,
            independence_pairs: positive(
                "loss.independence_pairs",
                cfg.parse_or("loss.independence_pairs", l.independence_pairs)?,
            )?,
        };

        let cv = CrossValConfig {
            size: cfg.parse_or("cv.size", 100_000)?,
            folds: cfg.parse_or("cv.folds", 10)?,
            epochs: positive("cv.epochs", cfg.parse_or("cv.epochs", 8)?)?,
        };
        if cv.folds < 2 {
            return Err(HarnessError::config("cv.folds", "need at least 2 folds"));
        }
        let sim = SimilarityConfig {
            profiles: positive("sim.profiles", cfg.parse_or("sim.profiles", 10_000)?)?,
            rules: cfg.list_or("sim.rules", RuleId::ALL.to_vec())?,
        };
        let disagree = DisagreeConfig {
            profiles: positive("disagree.profiles", cfg.parse_or("disagree.profiles", 10_000)?)?,
            mode: cfg.parse_or("disagree.mode", DisagreementMode::Weak)?,
            rules: cfg.list_or("disagree.rules", RuleId::ALL.to_vec())?,
        };

        Ok(ExperimentConfig {
            kind,
            seed: cfg.parse_or("seed", 0)?,
            rule: cfg.parse_or("rule", RuleId::Plurality)?,
            dist,
            model,
            train,
            eval,
            w2v,
            exp2,
            objectives,
            loss,
            cv,
            sim,
            disagree,
            sample_k: positive("sample.k", cfg.parse_or("sample.k", 1000)?)?,
        })
    }

    /// Every setting as explicit key-value pairs; resolving the result gives
    /// back an identical configuration.
    pub fn to_config(&self) -> Config {
        fn join<T: Display>(items: &[T]) -> String {
            items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
        }
        let mut c = Config::new();
        let mut put = |k: &str, v: String| c.entries.insert(k.to_string(), v);
        put("seed", self.seed.to_string());
        put("arch", self.model.arch.to_string());
        put("rule", self.rule.to_string());
        put("dist.kind", self.dist.kind.to_string());
        if let Some(r) = self.dist.rel_phi {
            put("dist.rel_phi", r.to_string());
        }
        if let Some(a) = self.dist.urn_alpha {
            put("dist.urn_alpha", a.to_string());
        }
        put("bounds.m_max", self.model.m_max.to_string());
        put("bounds.n_max", self.model.n_max.to_string());
        put("model.hidden", self.model.hidden.to_string());
        put("model.channels", self.model.channels.to_string());
        put("model.embed_dim", self.model.embed_dim.to_string());
        put("model.layer_norm", self.model.layer_norm.to_string());
        put(
            "model.kt_reorder",
            self.model.kt_reorder.map_or("none".to_string(), |k| k.to_string()),
        );
        put("train.steps", self.train.steps.to_string());
        put("train.batch", self.train.batch_size.to_string());
        put("train.lr", self.train.lr.to_string());
        put("train.weight_decay", self.train.weight_decay.to_string());
        put("train.t0", self.train.t_0.to_string());
        put("train.t_mult", self.train.t_mult.to_string());
        put("train.eta_min", self.train.eta_min.to_string());
        put("train.log_every", self.train.log_every.to_string());
        put("eval.test_size", self.eval.test_size.to_string());
        put("eval.axiom_profiles", self.eval.axiom_profiles.to_string());
        put(
            "eval.independence_axiom_profiles",
            self.eval.independence_axiom_profiles.to_string(),
        );
        put("eval.axioms", join(&self.eval.axioms));
        put("eval.decode", self.eval.decoder.to_string());
        put("eval.anonymity_samples", self.eval.checks.anonymity_samples.to_string());
        put("eval.neutrality_samples", self.eval.checks.neutrality_samples.to_string());
        put("eval.independence_variants", self.eval.checks.independence_variants.to_string());
        put("eval.independence_profiles", self.eval.checks.independence_profiles.to_string());
        put("w2v.pretrain", self.w2v.pretrain.to_string());
        put("w2v.corpus", self.w2v.corpus.to_string());
        put("w2v.window", self.w2v.config.window.to_string());
        put("w2v.epochs", self.w2v.config.epochs.to_string());
        put("w2v.negatives", self.w2v.config.negatives.to_string());
        put("exp2.augment", self.exp2.augment.to_string());
        put("exp2.pretrain", self.exp2.pretrain_steps.to_string());
        put("exp2.eval_every", self.exp2.eval_every.to_string());
        put("exp2.p_grid", join(&self.exp2.p_grid));
        put("objectives", self.objectives.to_string());
        for &(o, w) in self.objectives.entries() {
            put(&format!("weight.{o}"), w.to_string());
        }
        put("loss.anonymity_samples", self.loss.anonymity_samples.to_string());
        put("loss.independence_pairs", self.loss.independence_pairs.to_string());
        put("cv.size", self.cv.size.to_string());
        put("cv.folds", self.cv.folds.to_string());
        put("cv.epochs", self.cv.epochs.to_string());
        put("sim.profiles", self.sim.profiles.to_string());
        put("sim.rules", join(&self.sim.rules));
        put("disagree.profiles", self.disagree.profiles.to_string());
        put("disagree.mode", self.disagree.mode.to_string());
        put("disagree.rules", join(&self.disagree.rules));
        put("sample.k", self.sample_k.to_string());
        c
    }
}
