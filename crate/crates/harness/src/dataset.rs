//! Labeled datasets, their text format and the two augmentations.
//!
//! File layout: a `#` header with the provenance, then one pair per line as
//! `<profile>\t<winners>` using the core line formats, e.g.
//!
//! ```text
//! # deepvote dataset
//! # distribution = ic
//! # rule = plurality
//! # seed = 7
//! # m_max = 5
//! # n_max = 55
//! 3;2;0,1,2|2,1,0	0,2
//! ```

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use deepvote_core::sampling::{random_permutation, rng_from_seed, sample_profile};
use deepvote_core::{
    apply_rule, permute_alternatives, permute_voters, DistributionSpec, Profile, Rng, RuleId,
    WinningSet,
};

use crate::error::{HarnessError, Result};

pub type Pair = (Profile, WinningSet);

const MAGIC: &str = "# deepvote dataset";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub distribution: String,
    pub rule: RuleId,
    pub seed: u64,
    pub m_max: usize,
    pub n_max: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub provenance: Provenance,
    pub pairs: Vec<Pair>,
}

/// Draws `k` profiles with random sizes within the bounds and labels them with `rule`.
pub fn sample_pairs(
    rule: RuleId,
    spec: &DistributionSpec,
    k: usize,
    m_max: usize,
    n_max: usize,
    rng: &mut Rng,
) -> Result<Vec<Pair>> {
    (0..k)
        .map(|_| {
            let p = sample_profile(spec, m_max, n_max, rng)?;
            let w = apply_rule(rule, &p);
            Ok((p, w))
        })
        .collect()
}

pub fn generate_dataset(
    rule: RuleId,
    spec: &DistributionSpec,
    k: usize,
    m_max: usize,
    n_max: usize,
    seed: u64,
) -> Result<Dataset> {
    if k == 0 {
        return Err(HarnessError::Invalid("dataset size must be positive".into()));
    }
    let pairs = sample_pairs(rule, spec, k, m_max, n_max, &mut rng_from_seed(seed))?;
    Ok(Dataset {
        provenance: Provenance {
            distribution: spec.to_string(),
            rule,
            seed,
            m_max,
            n_max,
        },
        pairs,
    })
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let p = &self.provenance;
        writeln!(w, "{MAGIC}")?;
        writeln!(w, "# distribution = {}", p.distribution)?;
        writeln!(w, "# rule = {}", p.rule)?;
        writeln!(w, "# seed = {}", p.seed)?;
        writeln!(w, "# m_max = {}", p.m_max)?;
        writeln!(w, "# n_max = {}", p.n_max)?;
        for (profile, winners) in &self.pairs {
            writeln!(w, "{profile}\t{winners}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let mut header = std::collections::BTreeMap::new();
        let mut pairs = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            let err = |message: String| HarnessError::Dataset { line: i + 1, message };
            if i == 0 {
                if line != MAGIC {
                    return Err(err(format!("expected `{MAGIC}`")));
                }
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let (k, v) = rest
                    .split_once('=')
                    .ok_or_else(|| err("header lines are `# key = value`".into()))?;
                header.insert(k.trim().to_string(), v.trim().to_string());
                continue;
            }
            let (p, w) = line
                .split_once('\t')
                .ok_or_else(|| err("expected `<profile>\\t<winners>`".into()))?;
            let profile: Profile = p.parse().map_err(|e| err(format!("{e}")))?;
            let winners: WinningSet = w.parse().map_err(|e| err(format!("{e}")))?;
            if winners.is_empty() || winners.iter().any(|a| a >= profile.m()) {
                return Err(err(format!("winning set {winners} does not fit m = {}", profile.m())));
            }
            pairs.push((profile, winners));
        }
        let get = |k: &str| {
            header.get(k).cloned().ok_or_else(|| HarnessError::Dataset {
                line: 0,
                message: format!("missing header `{k}`"),
            })
        };
        let num = |k: &str| -> Result<u64> {
            get(k)?.parse().map_err(|e| HarnessError::Dataset {
                line: 0,
                message: format!("header `{k}`: {e}"),
            })
        };
        let provenance = Provenance {
            distribution: get("distribution")?,
            rule: get("rule")?.parse()?,
            seed: num("seed")?,
            m_max: num("m_max")? as usize,
            n_max: num("n_max")? as usize,
        };
        if let Some(i) = pairs
            .iter()
            .position(|(p, _)| p.m() > provenance.m_max || p.n() > provenance.n_max)
        {
            return Err(HarnessError::Dataset {
                line: i + 7,
                message: "profile exceeds the dataset bounds".into(),
            });
        }
        Ok(Dataset { provenance, pairs })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_from(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}

/// Which renaming an augmented copy applies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Augmentation {
    Neutrality,
    Anonymity,
}

impl Augmentation {
    pub fn name(self) -> &'static str {
        match self {
            Augmentation::Neutrality => "neutrality",
            Augmentation::Anonymity => "anonymity",
        }
    }

    pub fn apply(self, pair: &Pair, rng: &mut Rng) -> Pair {
        match self {
            Augmentation::Neutrality => augment_neutrality(pair, rng),
            Augmentation::Anonymity => augment_anonymity(pair, rng),
        }
    }
}

impl fmt::Display for Augmentation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Augmentation {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "neutrality" => Ok(Augmentation::Neutrality),
            "anonymity" => Ok(Augmentation::Anonymity),
            other => Err(HarnessError::Invalid(format!("unknown augmentation `{other}`"))),
        }
    }
}

/// Renames the alternatives by a uniform permutation σ: (σ(P), σ(S)).
pub fn augment_neutrality(pair: &Pair, rng: &mut Rng) -> Pair {
    let sigma = random_permutation(pair.0.m(), rng);
    rename_alternatives(pair, &sigma)
}

/// Shuffles the voters uniformly; the label is unchanged.
pub fn augment_anonymity(pair: &Pair, rng: &mut Rng) -> Pair {
    let pi = random_permutation(pair.0.n(), rng);
    reorder_voters(pair, &pi)
}

pub fn rename_alternatives(pair: &Pair, sigma: &[usize]) -> Pair {
    let p = permute_alternatives(&pair.0, sigma).expect("sigma is a permutation of the alternatives");
    (p, pair.1.permuted(sigma))
}

pub fn reorder_voters(pair: &Pair, pi: &[usize]) -> Pair {
    let p = permute_voters(&pair.0, pi).expect("pi is a permutation of the voters");
    (p, pair.1)
}
