//! Profile encodings for the three architectures, and voter reordering.

use deepvote_core::Profile;
use deepvote_nn::{Vocabulary, PAD_ID};

use crate::error::{ModelError, Result};

fn check_bounds(p: &Profile, m_max: usize, n_max: usize) -> Result<()> {
    if p.m() > m_max || p.n() > n_max {
        return Err(ModelError::Bounds {
            m: p.m(),
            n: p.n(),
            m_max,
            n_max,
        });
    }
    Ok(())
}

/// The profile as an `m_max × n_max` grid of one-hot cells, one column per
/// voter, flattened column by column. Entry `s·m_max² + r·m_max + a` is 1 iff
/// voter `s` ranks alternative `a` at position `r`; padded cells are all zero.
pub fn encode_mlp(p: &Profile, m_max: usize, n_max: usize) -> Result<Vec<f64>> {
    check_bounds(p, m_max, n_max)?;
    let mut v = vec![0.0; m_max * m_max * n_max];
    for (s, ranking) in p.rankings().enumerate() {
        for (r, &a) in ranking.iter().enumerate() {
            v[s * m_max * m_max + r * m_max + a as usize] = 1.0;
        }
    }
    Ok(v)
}

/// Channels-first image `(m_max, m_max, n_max)`: channel `c`, pixel `(r, s)`
/// is 1 iff voter `s`'s `r`-th choice is `c`.
pub fn encode_cnn(p: &Profile, m_max: usize, n_max: usize) -> Result<Vec<f64>> {
    check_bounds(p, m_max, n_max)?;
    let mut v = vec![0.0; m_max * m_max * n_max];
    for (s, ranking) in p.rankings().enumerate() {
        for (r, &a) in ranking.iter().enumerate() {
            v[a as usize * m_max * n_max + r * n_max + s] = 1.0;
        }
    }
    Ok(v)
}

/// Word used for a ranking in the embedding vocabulary, e.g. `"2,0,1"`.
pub fn ranking_token(ranking: &[u8]) -> String {
    let parts: Vec<String> = ranking.iter().map(|a| a.to_string()).collect();
    parts.join(",")
}

/// One sentence per profile, one word per voter.
pub fn profile_sentence(p: &Profile) -> Vec<String> {
    p.rankings().map(ranking_token).collect()
}

/// Token ids of the voters' rankings, unknown rankings mapped to `<unk>`,
/// padded with `<pad>` to `n_max`.
pub fn encode_wec(p: &Profile, vocab: &Vocabulary, n_max: usize) -> Result<Vec<usize>> {
    if p.n() > n_max {
        return Err(ModelError::Bounds {
            m: p.m(),
            n: p.n(),
            m_max: p.m(),
            n_max,
        });
    }
    let mut ids: Vec<usize> = p.rankings().map(|r| vocab.id(&ranking_token(r))).collect();
    ids.resize(n_max, PAD_ID);
    Ok(ids)
}

fn permutations_of(k: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut cur: Vec<u8> = (0..k as u8).collect();
    loop {
        out.push(cur.clone());
        // Next permutation in lexicographic order.
        let Some(i) = (1..k).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..k).rev().find(|&j| cur[j] > cur[i - 1]).expect("successor exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

/// Every ranking over `{0..m}` for each `m` in `1..=m_max`, plus `<pad>` and
/// `<unk>`: the vocabulary a large enough corpus converges to.
pub fn full_vocabulary(m_max: usize) -> Vocabulary {
    Vocabulary::from_words((1..=m_max).flat_map(|m| permutations_of(m).into_iter().map(|r| ranking_token(&r))))
}

/// All permutations of `0..k` in lexicographic order.
pub fn all_permutations(k: usize) -> Vec<Vec<usize>> {
    permutations_of(k)
        .into_iter()
        .map(|p| p.into_iter().map(usize::from).collect())
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KtMode {
    /// Voters sorted by distance to voter 0.
    Global,
    /// Greedy chain: each next voter is the closest unpicked one to the last.
    Local,
}

impl std::str::FromStr for KtMode {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(KtMode::Global),
            "local" => Ok(KtMode::Local),
            _ => Err(ModelError::UnknownName {
                kind: "reorder mode",
                name: s.to_string(),
            }),
        }
    }
}

impl std::fmt::Display for KtMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KtMode::Global => "global",
            KtMode::Local => "local",
        })
    }
}

fn kt_distance(a: &[u8], b: &[u8]) -> usize {
    let mut pos = [0usize; 32];
    for (i, &x) in b.iter().enumerate() {
        pos[x as usize] = i;
    }
    let mut d = 0;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            d += (pos[a[i] as usize] > pos[a[j] as usize]) as usize;
        }
    }
    d
}

/// Reorders voters by Kendall-Tau distance, starting from voter 0; ties go to
/// the lower index.
pub fn kt_reorder(p: &Profile, mode: KtMode) -> Profile {
    let n = p.n();
    let order: Vec<usize> = match mode {
        KtMode::Global => {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by_key(|&s| (kt_distance(p.ranking(0), p.ranking(s)), s));
            idx
        }
        KtMode::Local => {
            let mut picked = vec![false; n];
            let mut order = vec![0];
            picked[0] = true;
            while order.len() < n {
                let last = p.ranking(*order.last().expect("nonempty"));
                let next = (0..n)
                    .filter(|&s| !picked[s])
                    .min_by_key(|&s| (kt_distance(last, p.ranking(s)), s))
                    .expect("unpicked voter");
                picked[next] = true;
                order.push(next);
            }
            order
        }
    };
    deepvote_core::permute_voters(p, &order).expect("reordering is a permutation")
}
