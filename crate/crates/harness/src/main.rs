use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use deepvote_core::{RuleId, VotingFunction};
use deepvote_harness::config::{Config, ExperimentConfig, ExperimentKind};
use deepvote_harness::crossval::cross_validate;
use deepvote_harness::dataset::{generate_dataset, Dataset};
use deepvote_harness::eval::{axiom_scores, Accuracy, EvalReport};
use deepvote_harness::experiments::{
    evaluate_against_teacher, initial_model, run_ablation, run_exp1, run_exp2_v1, run_exp2_v2,
    run_exp3, eval_seed, test_set, train_supervised,
};
use deepvote_harness::report::{write_axioms, write_curve, write_summary};
use deepvote_harness::similarity::{find_disagreeing_profile, sample_profiles, similarity_table};
use deepvote_harness::write_manifest;
use deepvote_models::{Model, ModelVoting};
use deepvote_nn::Checkpoint;

#[derive(Parser)]
#[command(name = "deepvote", version, about = "Voting rules, axioms and neural voting models")]
struct Cli {
    /// Base seed (overrides `seed` from the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Settings bundle applied before the config file: paper, paper77 or desk.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Extra `key=value` setting; may be repeated.
    #[arg(long = "set", global = true)]
    set: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Decoder for model outputs: plain, navg or naavg.
    #[arg(long, global = true)]
    decode: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a labeled dataset of `sample.k` pairs.
    Sample,
    /// Axiom satisfaction degrees of the rules in `sim.rules`.
    RuleEval,
    /// Supervised training on fresh batches; writes a checkpoint.
    Train,
    /// Evaluate a checkpoint against its teacher rule.
    ModelEval {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Accuracy versus axiom satisfaction of a supervised model.
    Exp1,
    /// Data augmentation (version 1: fork after pretraining; 2: p-grid).
    Exp2 {
        #[arg(long, default_value_t = 1)]
        version: u8,
    },
    /// Unsupervised training on axiom losses.
    Exp3 {
        /// Sweep the objective subsets instead of a single run.
        #[arg(long)]
        ablation: bool,
    },
    /// Identity and subset agreement between rules (and optionally a model).
    Similarity {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Smallest sampled profile on which a model disagrees with the rules.
    Disagree {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// k-fold cross-validation on a fixed dataset.
    Crossval {
        /// Dataset file; generated from the config when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::RuleEval => "rule-eval",
            Command::Train => "train",
            Command::ModelEval { .. } => "model-eval",
            Command::Exp1 => "exp1",
            Command::Exp2 { .. } => "exp2",
            Command::Exp3 { .. } => "exp3",
            Command::Similarity { .. } => "similarity",
            Command::Disagree { .. } => "disagree",
            Command::Crossval { .. } => "crossval",
        }
    }

    fn kind(&self) -> anyhow::Result<ExperimentKind> {
        Ok(match self {
            Command::Exp2 { version: 1 } => ExperimentKind::Exp2v1,
            Command::Exp2 { version: 2 } => ExperimentKind::Exp2v2,
            Command::Exp2 { version } => bail!("unknown exp2 version {version}"),
            Command::Exp3 { ablation: false } => ExperimentKind::Exp3,
            Command::Exp3 { ablation: true } => ExperimentKind::Ablation,
            Command::Similarity { .. } | Command::Disagree { .. } => ExperimentKind::Similarity,
            Command::Crossval { .. } => ExperimentKind::CrossVal,
            _ => ExperimentKind::Exp1,
        })
    }
}

fn raw_config(cli: &Cli) -> anyhow::Result<Config> {
    let mut cfg = match &cli.preset {
        Some(p) => Config::preset(p)?,
        None => Config::new(),
    };
    if let Some(path) = &cli.config {
        cfg.merge(&Config::load(path).with_context(|| format!("reading {}", path.display()))?);
    }
    for pair in &cli.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = cli.seed {
        cfg.set("seed", &seed.to_string())?;
    }
    if let Some(d) = &cli.decode {
        cfg.set("eval.decode", d)?;
    }
    Ok(cfg)
}

fn load_model(path: &Path, cfg: &mut Config) -> anyhow::Result<Model> {
    let ckpt = Checkpoint::load(path).with_context(|| format!("loading {}", path.display()))?;
    let model = Model::from_checkpoint(&ckpt)?;
    let spec = model.spec();
    cfg.set("arch", &spec.arch.to_string())?;
    cfg.set("bounds.m_max", &spec.m_max.to_string())?;
    cfg.set("bounds.n_max", &spec.n_max.to_string())?;
    // Settings given explicitly win over what the checkpoint recorded.
    for (header, key) in [("rule", "rule"), ("distribution", "dist.kind")] {
        if let (Some(v), None) = (ckpt.get(header), cfg.get(key)) {
            cfg.set(key, v)?;
        }
    }
    Ok(model)
}

fn print_report(r: &EvalReport) {
    let Accuracy {
        identity_pct,
        subset_pct,
        empty_pct,
    } = r.accuracy;
    println!("{}: identity {identity_pct:.2}  subset {subset_pct:.2}  empty {empty_pct:.2}", r.label);
    for a in &r.axioms {
        println!("  {:<13} {:>7.2}  (n = {})", a.axiom, a.satisfied_pct, a.n_applicable);
    }
}

fn rule_functions(rules: &[RuleId]) -> Vec<&dyn VotingFunction> {
    rules.iter().map(|r| r as &dyn VotingFunction).collect()
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let mut raw = raw_config(&cli)?;
    let out = cli.out.as_path();
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let kind = cli.command.kind()?;

    let loaded = match &cli.command {
        Command::ModelEval { checkpoint } | Command::Disagree { checkpoint } => Some(load_model(checkpoint, &mut raw)?),
        Command::Similarity { checkpoint: Some(c) } => Some(load_model(c, &mut raw)?),
        _ => None,
    };
    let cfg = ExperimentConfig::resolve(&raw, kind)?;
    write_manifest(out, cli.command.name(), &cfg)?;
    let (m_max, n_max) = (cfg.model.m_max, cfg.model.n_max);

    match &cli.command {
        Command::Sample => {
            let ds = generate_dataset(cfg.rule, &cfg.dist, cfg.sample_k, m_max, n_max, cfg.seed)?;
            let path = out.join(format!("dataset_{}_{}.tsv", cfg.rule, cfg.dist));
            ds.save(&path)?;
            println!("wrote {} pairs to {}", ds.len(), path.display());
        }
        Command::RuleEval => {
            let seed = cfg.seed;
            let reports = cfg
                .sim
                .rules
                .iter()
                .map(|r| {
                    let axioms = axiom_scores(r, &cfg.dist, &cfg.eval, m_max, n_max, seed)?;
                    Ok(EvalReport {
                        label: r.to_string(),
                        distribution: cfg.dist.to_string(),
                        accuracy: Accuracy {
                            identity_pct: 100.0,
                            subset_pct: 100.0,
                            empty_pct: 0.0,
                        },
                        axioms,
                    })
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            for r in &reports {
                print_report(r);
            }
            write_axioms(&out.join("rule_eval_axioms.csv"), &reports.iter().collect::<Vec<_>>())?;
        }
        Command::Train => {
            let mut model = initial_model(&cfg)?;
            let curve = train_supervised(&mut model, &cfg, cfg.train.steps)?;
            write_curve(&out.join(format!("train_{}_curve.csv", cfg.model.arch)), &curve)?;
            let path = out.join(format!("{}_{}.ckpt", cfg.model.arch, cfg.rule));
            model
                .to_checkpoint(&[("rule", cfg.rule.to_string()), ("distribution", cfg.dist.to_string())])
                .save(&path)?;
            println!("wrote {}", path.display());
        }
        Command::ModelEval { .. } => {
            let model = loaded.expect("checkpoint loaded");
            let test = test_set(&cfg)?;
            let (teacher, report) = evaluate_against_teacher(&model, &cfg, &test)?;
            print_report(&teacher);
            print_report(&report);
            write_summary(&out.join("model_eval_summary.csv"), &teacher, &[&report])?;
            write_axioms(&out.join("model_eval_axioms.csv"), &[&teacher, &report])?;
        }
        Command::Exp1 => {
            let r = run_exp1(&cfg, Some(out))?;
            print_report(&r.teacher);
            print_report(&r.report);
        }
        Command::Exp2 { version: 1 } => {
            let r = run_exp2_v1(&cfg, Some(out))?;
            println!(
                "initial pairs {}; sampled after the fork: augmented {}, sampled {}",
                r.initial_pairs, r.sampled_after_fork.0, r.sampled_after_fork.1
            );
        }
        Command::Exp2 { .. } => {
            let r = run_exp2_v2(&cfg, Some(out))?;
            print_report(&r.teacher);
            for (_, rep) in &r.reports {
                print_report(rep);
            }
        }
        Command::Exp3 { ablation: false } => print_report(&run_exp3(&cfg, Some(out))?.report),
        Command::Exp3 { ablation: true } => {
            for r in run_ablation(&cfg, Some(out))? {
                print_report(&r);
            }
        }
        Command::Similarity { .. } => {
            let profiles = sample_profiles(&cfg.dist, cfg.sim.profiles, m_max, n_max, cfg.seed)?;
            let model_fn = loaded
                .as_ref()
                .map(|m| ModelVoting::new(m, cfg.eval.decoder).with_seed(eval_seed(&cfg)));
            let mut fns: Vec<&dyn VotingFunction> = Vec::new();
            if let Some(f) = &model_fn {
                fns.push(f);
            }
            fns.extend(rule_functions(&cfg.sim.rules));
            let table = similarity_table(&fns, &profiles);
            table.write_csv(&out.join("similarity.csv"))?;
            println!("identity accuracy (row vs column):");
            for (i, l) in table.labels.iter().enumerate() {
                let row: Vec<String> = table.identity[i].iter().map(|v| format!("{v:6.2}")).collect();
                println!("{l:>24} {}", row.join(" "));
            }
        }
        Command::Disagree { .. } => {
            let model = loaded.expect("checkpoint loaded");
            let f = ModelVoting::new(&model, cfg.eval.decoder).with_seed(eval_seed(&cfg));
            let profiles = sample_profiles(&cfg.dist, cfg.disagree.profiles, m_max, n_max, cfg.seed)?;
            let text = match find_disagreeing_profile(&f, &rule_functions(&cfg.disagree.rules), &profiles, cfg.disagree.mode) {
                Some(d) => d.to_string(),
                None => "none\n".to_string(),
            };
            print!("{text}");
            std::fs::write(out.join("disagreement.txt"), text)?;
        }
        Command::Crossval { dataset } => {
            let ds = match dataset {
                Some(path) => Dataset::load(path)?,
                None => generate_dataset(cfg.rule, &cfg.dist, cfg.cv.size, m_max, n_max, cfg.seed)?,
            };
            let init = initial_model(&cfg)?;
            let report = cross_validate(&init, &ds, cfg.cv.folds, cfg.cv.epochs, &cfg.train, cfg.seed)?;
            report.write_csv(&out.join(format!("crossval_{}.csv", cfg.model.arch)))?;
            println!(
                "test accuracy {:.2} ± {:.2}, test loss {:.4}",
                report.mean.test_accuracy, report.std.test_accuracy, report.mean.test_loss
            );
        }
    }
    Ok(())
}
