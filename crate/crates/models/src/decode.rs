//! Turning logits into winning sets, and models as voting functions.

use std::fmt;
use std::str::FromStr;

use deepvote_core::sampling::{derive_seed, random_permutation, rng_from_seed};
use deepvote_core::{permute_alternatives, permute_voters, Profile, VotingFunction, WinningSet};
use deepvote_nn::sigmoid;

use crate::encode::all_permutations;
use crate::error::{ModelError, Result};
use crate::model::Model;

/// Largest `m` for which the full permutation group is averaged.
pub const MAX_NEUTRALITY_AVG_M: usize = 7;
pub const NAAVG_ALTERNATIVE_PERMS: usize = 12;
pub const NAAVG_VOTER_PERMS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Decoder {
    Plain,
    /// Average of de-permuted logits over every renaming of the alternatives.
    NeutralityAvg,
    /// Average over 12 sampled alternative renamings × 10 voter shuffles.
    NeutralityAnonymityAvg,
}

impl Decoder {
    pub const ALL: [Decoder; 3] = [
        Decoder::Plain,
        Decoder::NeutralityAvg,
        Decoder::NeutralityAnonymityAvg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Decoder::Plain => "plain",
            Decoder::NeutralityAvg => "navg",
            Decoder::NeutralityAnonymityAvg => "naavg",
        }
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Decoder {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Decoder::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| ModelError::UnknownName {
                kind: "decoder",
                name: s.to_string(),
            })
    }
}

/// `{ r < m : sig(logits[r]) > 0.5 }`; may be empty.
pub fn decode_plain(logits: &[f64], m: usize) -> WinningSet {
    logits
        .iter()
        .take(m)
        .enumerate()
        .filter(|&(_, &x)| sigmoid(x) > 0.5)
        .map(|(r, _)| r)
        .collect()
}

/// For each profile, the renamings to evaluate: `(alternative renaming, voter order)`.
type Variants = Vec<(Vec<usize>, Option<Vec<usize>>)>;

fn variants(profile: &Profile, decoder: Decoder, seed: u64) -> Variants {
    let (m, n) = (profile.m(), profile.n());
    match decoder {
        Decoder::Plain => vec![((0..m).collect(), None)],
        Decoder::NeutralityAvg => all_permutations(m).into_iter().map(|s| (s, None)).collect(),
        Decoder::NeutralityAnonymityAvg => {
            let mut rng = rng_from_seed(profile_seed(seed, profile));
            let mut out = Vec::with_capacity(NAAVG_ALTERNATIVE_PERMS * NAAVG_VOTER_PERMS);
            for _ in 0..NAAVG_ALTERNATIVE_PERMS {
                let sigma = random_permutation(m, &mut rng);
                for _ in 0..NAAVG_VOTER_PERMS {
                    out.push((sigma.clone(), Some(random_permutation(n, &mut rng))));
                }
            }
            out
        }
    }
}

fn profile_seed(seed: u64, profile: &Profile) -> u64 {
    let mut h = derive_seed(seed, ((profile.m() as u64) << 32) | profile.n() as u64);
    for r in profile.rankings() {
        for &a in r {
            h = derive_seed(h, a as u64);
        }
    }
    h
}

/// Per-profile scores on the live alternatives after decoder averaging
/// (plain logits for [`Decoder::Plain`]).
pub fn decoded_logits(model: &Model, profiles: &[Profile], decoder: Decoder, seed: u64) -> Result<Vec<Vec<f64>>> {
    if decoder == Decoder::NeutralityAvg {
        if let Some(p) = profiles.iter().find(|p| p.m() > MAX_NEUTRALITY_AVG_M) {
            return Err(ModelError::InvalidSpec(format!(
                "neutrality averaging needs m <= {MAX_NEUTRALITY_AVG_M}, got {}",
                p.m()
            )));
        }
    }
    let per_profile: Vec<Variants> = profiles.iter().map(|p| variants(p, decoder, seed)).collect();
    let mut batch = Vec::new();
    for (p, vs) in profiles.iter().zip(&per_profile) {
        for (sigma, pi) in vs {
            let renamed = permute_alternatives(p, sigma)?;
            batch.push(match pi {
                Some(pi) => permute_voters(&renamed, pi)?,
                None => renamed,
            });
        }
    }
    let logits = model.logits(&batch)?;
    let mut out = Vec::with_capacity(profiles.len());
    let mut k = 0;
    for (p, vs) in profiles.iter().zip(&per_profile) {
        let m = p.m();
        if vs.len() == 1 {
            out.push(logits[k][..m].to_vec());
            k += 1;
            continue;
        }
        // Alternative a was renamed sigma[a]; gather its score from there.
        // Contributions are summed in sorted order so the average does not
        // depend on the order in which the group was enumerated.
        let mut contrib = vec![Vec::with_capacity(vs.len()); m];
        for (sigma, _) in vs {
            for (c, v) in contrib.iter_mut().zip(depermute(&logits[k], sigma)) {
                c.push(v);
            }
            k += 1;
        }
        out.push(
            contrib
                .into_iter()
                .map(|mut c| {
                    c.sort_by(f64::total_cmp);
                    c.iter().sum::<f64>() / c.len() as f64
                })
                .collect(),
        );
    }
    Ok(out)
}

pub fn decode(model: &Model, profiles: &[Profile], decoder: Decoder, seed: u64) -> Result<Vec<WinningSet>> {
    Ok(decoded_logits(model, profiles, decoder, seed)?
        .iter()
        .map(|l| decode_plain(l, l.len()))
        .collect())
}

/// A model with a decoder, usable wherever a voting rule is.
pub struct ModelVoting<'a> {
    pub model: &'a Model,
    pub decoder: Decoder,
    pub seed: u64,
    pub label: String,
}

impl<'a> ModelVoting<'a> {
    pub fn new(model: &'a Model, decoder: Decoder) -> Self {
        let label = match decoder {
            Decoder::Plain => model.spec().arch.to_string(),
            d => format!("{}+{}", model.spec().arch, d),
        };
        ModelVoting {
            model,
            decoder,
            seed: 0,
            label,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Decoding batches at most this many profiles per forward call.
const DECODE_CHUNK: usize = 256;

impl VotingFunction for ModelVoting<'_> {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn winners(&self, profile: &Profile) -> WinningSet {
        self.winners_batch(std::slice::from_ref(profile))[0]
    }

    fn winners_batch(&self, profiles: &[Profile]) -> Vec<WinningSet> {
        let chunk = match self.decoder {
            Decoder::Plain => DECODE_CHUNK * 4,
            _ => DECODE_CHUNK / 8,
        };
        profiles
            .chunks(chunk)
            .flat_map(|c| decode(self.model, c, self.decoder, self.seed).expect("profile within model bounds"))
            .collect()
    }
}

/// Sigmoid scores after averaging, e.g. for printing next to a profile.
pub fn averaged_sigmoids(model: &Model, profile: &Profile, decoder: Decoder, seed: u64) -> Result<Vec<f64>> {
    Ok(decoded_logits(model, std::slice::from_ref(profile), decoder, seed)?
        .remove(0)
        .into_iter()
        .map(sigmoid)
        .collect())
}

/// Renames the output of a model evaluated on `σ(P)` back to `P`'s names:
/// entry `a` is the score of `σ(a)`.
pub fn depermute(logits: &[f64], sigma: &[usize]) -> Vec<f64> {
    sigma.iter().map(|&s| logits[s]).collect()
}
