//! Pairwise agreement between voting functions and the search for profiles
//! on which a model disagrees with the rules.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use deepvote_core::sampling::{rng_from_seed, sample_profile};
use deepvote_core::{DistributionSpec, Profile, VotingFunction, WinningSet};
use rayon::prelude::*;

use crate::error::{HarnessError, Result};
use crate::report::fmt4;

/// `identity[i][j]`: % of profiles with F_i(P) = F_j(P);
/// `subset[i][j]`: % with F_i(P) ⊆ F_j(P).
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityTable {
    pub labels: Vec<String>,
    pub identity: Vec<Vec<f64>>,
    pub subset: Vec<Vec<f64>>,
}

/// `k` seeded profiles within the bounds.
pub fn sample_profiles(dist: &DistributionSpec, k: usize, m_max: usize, n_max: usize, seed: u64) -> Result<Vec<Profile>> {
    let mut rng = rng_from_seed(seed);
    (0..k)
        .map(|_| Ok(sample_profile(dist, m_max, n_max, &mut rng)?))
        .collect()
}

/// Winning sets of `f` on every profile, in order.
pub fn outputs(f: &dyn VotingFunction, profiles: &[Profile]) -> Vec<WinningSet> {
    profiles
        .par_chunks(64)
        .map(|c| f.winners_batch(c))
        .collect::<Vec<_>>()
        .concat()
}

pub fn similarity_table(functions: &[&dyn VotingFunction], profiles: &[Profile]) -> SimilarityTable {
    let outs: Vec<Vec<WinningSet>> = functions.iter().map(|f| outputs(*f, profiles)).collect();
    let k = functions.len();
    let total = profiles.len().max(1) as f64;
    let mut identity = vec![vec![0.0; k]; k];
    let mut subset = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let (mut same, mut sub) = (0usize, 0usize);
            for (a, b) in outs[i].iter().zip(&outs[j]) {
                same += (a == b) as usize;
                sub += a.is_subset(*b) as usize;
            }
            identity[i][j] = 100.0 * same as f64 / total;
            subset[i][j] = 100.0 * sub as f64 / total;
        }
    }
    SimilarityTable {
        labels: functions.iter().map(|f| f.name()).collect(),
        identity,
        subset,
    }
}

impl SimilarityTable {
    pub fn index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn identity_of(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.identity[self.index(a)?][self.index(b)?])
    }

    pub fn subset_of(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.subset[self.index(a)?][self.index(b)?])
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["row", "column", "identity_pct", "subset_pct"])?;
        for (i, row) in self.labels.iter().enumerate() {
            for (j, col) in self.labels.iter().enumerate() {
                w.write_record([row.clone(), col.clone(), fmt4(self.identity[i][j]), fmt4(self.subset[i][j])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DisagreementMode {
    /// The model's output differs from every rule's output.
    Weak,
    /// The model's output shares no alternative with any rule's output.
    Strong,
}

impl fmt::Display for DisagreementMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DisagreementMode::Weak => "weak",
            DisagreementMode::Strong => "strong",
        })
    }
}

impl FromStr for DisagreementMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "weak" => Ok(DisagreementMode::Weak),
            "strong" => Ok(DisagreementMode::Strong),
            other => Err(HarnessError::Invalid(format!("unknown disagreement mode `{other}`"))),
        }
    }
}

/// A profile with everyone's winning sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Disagreement {
    pub profile: Profile,
    pub model: (String, WinningSet),
    pub rules: Vec<(String, WinningSet)>,
}

/// Scans `profiles` for the first one with the fewest voters on which the
/// model disagrees with all rules. Profiles where the model elects nobody are
/// skipped.
pub fn find_disagreeing_profile(
    model: &dyn VotingFunction,
    rules: &[&dyn VotingFunction],
    profiles: &[Profile],
    mode: DisagreementMode,
) -> Option<Disagreement> {
    let model_out = outputs(model, profiles);
    let rule_outs: Vec<Vec<WinningSet>> = rules.iter().map(|f| outputs(*f, profiles)).collect();
    let mut best: Option<usize> = None;
    for (i, (p, w)) in profiles.iter().zip(&model_out).enumerate() {
        if w.is_empty() {
            continue;
        }
        let disagrees = rule_outs.iter().all(|o| match mode {
            DisagreementMode::Weak => o[i] != *w,
            DisagreementMode::Strong => o[i].is_disjoint(*w),
        });
        if disagrees && best.is_none_or(|b| p.n() < profiles[b].n()) {
            best = Some(i);
        }
    }
    best.map(|i| Disagreement {
        profile: profiles[i].clone(),
        model: (model.name(), model_out[i]),
        rules: rules.iter().zip(&rule_outs).map(|(f, o)| (f.name(), o[i])).collect(),
    })
}

/// The profile as a letter table followed by one line per distinct winning
/// set, e.g. `{a,e} plurality, borda`.
impl fmt::Display for Disagreement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.profile.to_letter_table())?;
        writeln!(f)?;
        let mut groups: Vec<(WinningSet, Vec<&str>)> = Vec::new();
        for (name, w) in std::iter::once(&self.model).chain(&self.rules) {
            match groups.iter_mut().find(|(g, _)| g == w) {
                Some((_, names)) => names.push(name),
                None => groups.push((*w, vec![name])),
            }
        }
        for (w, names) in groups {
            writeln!(f, "{} {}", w.letters(), names.join(", "))?;
        }
        Ok(())
    }
}
