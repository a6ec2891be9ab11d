//! The sixteen voting rules, plus Split Cycle (used inside Stable Voting).
//!
//! Every rule is total and returns a nonempty [`WinningSet`].

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};
use crate::profile::{margin_matrix, MarginMatrix, Profile, WinningSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RuleId {
    Plurality,
    Borda,
    AntiPlurality,
    Copeland,
    Llull,
    UncoveredSet,
    TopCycle,
    Banks,
    StableVoting,
    Blacks,
    InstantRunoffTB,
    PluralityWRunoffPUT,
    Coombs,
    Baldwin,
    WeakNanson,
    KemenyYoung,
}

impl RuleId {
    pub const ALL: [RuleId; 16] = [
        RuleId::Plurality,
        RuleId::Borda,
        RuleId::AntiPlurality,
        RuleId::Copeland,
        RuleId::Llull,
        RuleId::UncoveredSet,
        RuleId::TopCycle,
        RuleId::Banks,
        RuleId::StableVoting,
        RuleId::Blacks,
        RuleId::InstantRunoffTB,
        RuleId::PluralityWRunoffPUT,
        RuleId::Coombs,
        RuleId::Baldwin,
        RuleId::WeakNanson,
        RuleId::KemenyYoung,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RuleId::Plurality => "plurality",
            RuleId::Borda => "borda",
            RuleId::AntiPlurality => "anti_plurality",
            RuleId::Copeland => "copeland",
            RuleId::Llull => "llull",
            RuleId::UncoveredSet => "uncovered_set",
            RuleId::TopCycle => "top_cycle",
            RuleId::Banks => "banks",
            RuleId::StableVoting => "stable_voting",
            RuleId::Blacks => "blacks",
            RuleId::InstantRunoffTB => "instant_runoff_tb",
            RuleId::PluralityWRunoffPUT => "plurality_w_runoff_put",
            RuleId::Coombs => "coombs",
            RuleId::Baldwin => "baldwin",
            RuleId::WeakNanson => "weak_nanson",
            RuleId::KemenyYoung => "kemeny_young",
        }
    }

    /// Rules that always elect the Condorcet winner alone when there is one.
    pub fn is_condorcet_consistent(self) -> bool {
        matches!(
            self,
            RuleId::Copeland
                | RuleId::Llull
                | RuleId::UncoveredSet
                | RuleId::TopCycle
                | RuleId::Banks
                | RuleId::StableVoting
                | RuleId::Blacks
                | RuleId::Baldwin
                | RuleId::WeakNanson
                | RuleId::KemenyYoung
        )
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RuleId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.name() == s.trim())
            .ok_or_else(|| CoreError::UnknownName {
                kind: "rule",
                name: s.to_string(),
            })
    }
}

pub fn apply_rule(rule: RuleId, profile: &Profile) -> WinningSet {
    match rule {
        RuleId::Plurality => plurality(profile),
        RuleId::Borda => borda(profile),
        RuleId::AntiPlurality => anti_plurality(profile),
        RuleId::Copeland => copeland(profile),
        RuleId::Llull => llull(profile),
        RuleId::UncoveredSet => uncovered_set(profile),
        RuleId::TopCycle => top_cycle(profile),
        RuleId::Banks => banks(profile),
        RuleId::StableVoting => stable_voting(profile),
        RuleId::Blacks => blacks(profile),
        RuleId::InstantRunoffTB => instant_runoff_tb(profile),
        RuleId::PluralityWRunoffPUT => plurality_with_runoff_put(profile),
        RuleId::Coombs => iterative_elimination(profile, EliminationCriterion::LowestAntiPlurality),
        RuleId::Baldwin => iterative_elimination(profile, EliminationCriterion::LowestBorda),
        RuleId::WeakNanson => {
            iterative_elimination(profile, EliminationCriterion::AtOrBelowAverageBorda)
        }
        RuleId::KemenyYoung => kemeny_young(profile),
    }
}

/// All alternatives attaining the maximum of `score` over `0..m`.
fn argmax<T: PartialOrd + Copy>(m: usize, score: impl Fn(usize) -> T) -> WinningSet {
    argmax_in(WinningSet::full(m), score)
}

fn argmax_in<T: PartialOrd + Copy>(set: WinningSet, score: impl Fn(usize) -> T) -> WinningSet {
    let mut best: Option<T> = None;
    let mut out = WinningSet::empty();
    for a in set.iter() {
        let s = score(a);
        match best {
            Some(b) if s < b => {}
            Some(b) if s == b => out.insert(a),
            _ => {
                best = Some(s);
                out = WinningSet::singleton(a);
            }
        }
    }
    out
}

fn argmin_in<T: PartialOrd + Copy>(set: WinningSet, score: impl Fn(usize) -> T) -> WinningSet {
    let mut best: Option<T> = None;
    let mut out = WinningSet::empty();
    for a in set.iter() {
        let s = score(a);
        match best {
            Some(b) if s > b => {}
            Some(b) if s == b => out.insert(a),
            _ => {
                best = Some(s);
                out = WinningSet::singleton(a);
            }
        }
    }
    out
}

/// Winners of the scoring rule giving `scores[r]` points for rank `r`.
///
/// # Panics
/// If `scores.len() != profile.m()`.
pub fn positional_scoring(profile: &Profile, scores: &[f64]) -> WinningSet {
    assert_eq!(scores.len(), profile.m(), "one score per rank position");
    let mut totals = vec![0.0f64; profile.m()];
    for r in profile.rankings() {
        for (pos, &a) in r.iter().enumerate() {
            totals[a as usize] += scores[pos];
        }
    }
    argmax(profile.m(), |a| totals[a])
}

/// Per-alternative first-place counts among the `alive` alternatives.
fn plurality_counts(profile: &Profile, alive: WinningSet) -> Vec<u32> {
    let mut counts = vec![0u32; profile.m()];
    for r in profile.rankings() {
        if let Some(&a) = r.iter().find(|&&a| alive.contains(a as usize)) {
            counts[a as usize] += 1;
        }
    }
    counts
}

/// Per-alternative last-place counts among the `alive` alternatives.
fn last_place_counts(profile: &Profile, alive: WinningSet) -> Vec<u32> {
    let mut counts = vec![0u32; profile.m()];
    for r in profile.rankings() {
        if let Some(&a) = r.iter().rev().find(|&&a| alive.contains(a as usize)) {
            counts[a as usize] += 1;
        }
    }
    counts
}

/// Borda scores of the profile restricted to `alive`.
fn borda_scores(profile: &Profile, alive: WinningSet) -> Vec<u64> {
    let mut scores = vec![0u64; profile.m()];
    let k = alive.len() as u64;
    for r in profile.rankings() {
        let mut pos = 0u64;
        for &a in r {
            if alive.contains(a as usize) {
                scores[a as usize] += k - 1 - pos;
                pos += 1;
            }
        }
    }
    scores
}

pub fn plurality(profile: &Profile) -> WinningSet {
    let counts = plurality_counts(profile, WinningSet::full(profile.m()));
    argmax(profile.m(), |a| counts[a])
}

pub fn borda(profile: &Profile) -> WinningSet {
    let scores = borda_scores(profile, WinningSet::full(profile.m()));
    argmax(profile.m(), |a| scores[a])
}

pub fn anti_plurality(profile: &Profile) -> WinningSet {
    let last = last_place_counts(profile, WinningSet::full(profile.m()));
    argmin_in(WinningSet::full(profile.m()), |a| last[a])
}

/// Copeland score: duels won minus duels lost.
pub fn copeland(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    argmax(m, |x| {
        (0..m)
            .filter(|&y| y != x)
            .map(|y| mm.margin(x, y).signum())
            .sum::<i64>()
    })
}

/// Llull score: duels won or tied.
pub fn llull(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    argmax(m, |x| {
        (0..m)
            .filter(|&y| y != x && mm.get(x, y) >= mm.get(y, x))
            .count()
    })
}

/// Smallest set whose members are each weakly preferred by a majority to
/// every outsider: the alternatives that reach all others in the weak
/// majority relation.
pub fn top_cycle(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    let mut reach: Vec<u32> = (0..m)
        .map(|x| {
            (0..m)
                .filter(|&y| mm.get(x, y) >= mm.get(y, x))
                .fold(0u32, |acc, y| acc | (1 << y))
        })
        .collect();
    for k in 0..m {
        for x in 0..m {
            if reach[x] & (1 << k) != 0 {
                reach[x] |= reach[k];
            }
        }
    }
    let all = WinningSet::full(m).bits();
    (0..m).filter(|&x| reach[x] == all).collect()
}

/// `x` is undefeated when no `y` both beats `x` and left-covers it (every
/// alternative beating `y` also beats `x`).
pub fn uncovered_set(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    let beaten_by: Vec<u32> = (0..m)
        .map(|x| (0..m).filter(|&z| mm.beats(z, x)).fold(0, |acc, z| acc | (1 << z)))
        .collect();
    (0..m)
        .filter(|&x| {
            !(0..m).any(|y| mm.beats(y, x) && beaten_by[y] & !beaten_by[x] == 0)
        })
        .collect()
}

/// Maxima of the inclusion-maximal chains (transitive sub-tournaments) of
/// the strict majority relation.
pub fn banks(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    let beats: Vec<u32> = (0..m)
        .map(|x| (0..m).filter(|&y| mm.beats(x, y)).fold(0, |acc, y| acc | (1 << y)))
        .collect();
    let mut visited = vec![false; 1 << m];
    let mut winners = WinningSet::empty();
    for start in 0..m {
        extend_chain(1 << start, start, &beats, m, &mut visited, &mut winners);
    }
    winners
}

/// Depth-first extension of a chain with known maximum `top`.
fn extend_chain(
    chain: u32,
    top: usize,
    beats: &[u32],
    m: usize,
    visited: &mut [bool],
    winners: &mut WinningSet,
) {
    if visited[chain as usize] {
        return;
    }
    visited[chain as usize] = true;
    let mut extended = false;
    for z in 0..m {
        if chain & (1 << z) != 0 {
            continue;
        }
        let above = chain & !beats[z];
        let below = chain & beats[z];
        let comparable = (0..m)
            .filter(|&c| chain & (1 << c) != 0)
            .all(|c| beats[c] & (1 << z) != 0 || beats[z] & (1 << c) != 0);
        if !comparable {
            continue;
        }
        // The extension stays transitive iff everything above z beats
        // everything below it.
        let consistent = (0..m)
            .filter(|&c| above & (1 << c) != 0)
            .all(|c| beats[c] & below == below);
        if !consistent {
            continue;
        }
        extended = true;
        let new_top = if above == 0 { z } else { top };
        extend_chain(chain | (1 << z), new_top, beats, m, visited, winners);
    }
    if !extended {
        winners.insert(top);
    }
}

/// Split Cycle: drop every majority edge that is a weakest edge of some
/// cycle; the winners are the alternatives left without incoming edges.
pub fn split_cycle(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    split_cycle_within(&mm, WinningSet::full(mm.m()))
}

fn split_cycle_within(mm: &MarginMatrix, alive: WinningSet) -> WinningSet {
    let m = mm.m();
    let weight = |x: usize, y: usize| -> u32 {
        if alive.contains(x) && alive.contains(y) && mm.beats(x, y) {
            mm.get(x, y)
        } else {
            0
        }
    };
    // Widest-path strengths over the majority graph restricted to `alive`.
    let mut strength = vec![0u32; m * m];
    for x in 0..m {
        for y in 0..m {
            strength[x * m + y] = weight(x, y);
        }
    }
    for k in alive.iter() {
        for x in alive.iter() {
            let xk = strength[x * m + k];
            if xk == 0 {
                continue;
            }
            for y in alive.iter() {
                let via = xk.min(strength[k * m + y]);
                if via > strength[x * m + y] {
                    strength[x * m + y] = via;
                }
            }
        }
    }
    alive
        .iter()
        .filter(|&y| {
            !alive.iter().any(|x| {
                let w = weight(x, y);
                w > 0 && strength[y * m + x] < w
            })
        })
        .collect()
}

pub fn stable_voting(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let mut memo = HashMap::new();
    stable_voting_within(&mm, WinningSet::full(mm.m()), &mut memo)
}

fn stable_voting_within(
    mm: &MarginMatrix,
    alive: WinningSet,
    memo: &mut HashMap<u32, WinningSet>,
) -> WinningSet {
    if alive.len() == 1 {
        return alive;
    }
    if let Some(&w) = memo.get(&alive.bits()) {
        return w;
    }
    let sc = split_cycle_within(mm, alive);
    let result = if sc.len() == 1 {
        sc
    } else {
        let mut pairs: Vec<(i64, usize, usize)> = sc
            .iter()
            .flat_map(|a| {
                alive
                    .iter()
                    .filter(move |&b| b != a)
                    .map(move |b| (mm.margin(a, b), a, b))
            })
            .collect();
        pairs.sort_by(|p, q| q.0.cmp(&p.0));
        let mut winners = WinningSet::empty();
        let mut i = 0;
        while i < pairs.len() && winners.is_empty() {
            let level = pairs[i].0;
            while i < pairs.len() && pairs[i].0 == level {
                let (_, a, b) = pairs[i];
                let mut rest = alive;
                rest.remove(b);
                if stable_voting_within(mm, rest, memo).contains(a) {
                    winners.insert(a);
                }
                i += 1;
            }
        }
        if winners.is_empty() {
            sc
        } else {
            winners
        }
    };
    memo.insert(alive.bits(), result);
    result
}

pub fn blacks(profile: &Profile) -> WinningSet {
    match margin_matrix(profile).condorcet_winner() {
        Some(x) => WinningSet::singleton(x),
        None => borda(profile),
    }
}

/// What each round of [`iterative_elimination`] removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminationCriterion {
    /// Fewest first places (Instant Runoff, all tied minima at once).
    LowestPlurality,
    /// Most last places (Coombs).
    LowestAntiPlurality,
    /// Lowest Borda score (Baldwin).
    LowestBorda,
    /// Borda score at or below the average of the survivors (Weak Nanson).
    AtOrBelowAverageBorda,
}

/// Repeatedly eliminates alternatives, recomputing scores on the restricted
/// profile. The plurality-based criteria stop as soon as a survivor is
/// ranked first by a strict majority. When a round would eliminate every
/// survivor, those survivors all win.
pub fn iterative_elimination(profile: &Profile, criterion: EliminationCriterion) -> WinningSet {
    let n = profile.n() as u32;
    let mut alive = WinningSet::full(profile.m());
    loop {
        if alive.len() == 1 {
            return alive;
        }
        let removed = match criterion {
            EliminationCriterion::LowestPlurality | EliminationCriterion::LowestAntiPlurality => {
                let firsts = plurality_counts(profile, alive);
                if let Some(x) = alive.iter().find(|&a| 2 * firsts[a] > n) {
                    return WinningSet::singleton(x);
                }
                if criterion == EliminationCriterion::LowestPlurality {
                    argmin_in(alive, |a| firsts[a])
                } else {
                    let lasts = last_place_counts(profile, alive);
                    argmax_in(alive, |a| lasts[a])
                }
            }
            EliminationCriterion::LowestBorda => {
                let scores = borda_scores(profile, alive);
                argmin_in(alive, |a| scores[a])
            }
            EliminationCriterion::AtOrBelowAverageBorda => {
                let scores = borda_scores(profile, alive);
                let total: u64 = alive.iter().map(|a| scores[a]).sum();
                let k = alive.len() as u64;
                alive.iter().filter(|&a| scores[a] * k <= total).collect()
            }
        };
        if removed == alive {
            return alive;
        }
        alive = WinningSet::from_bits(alive.bits() & !removed.bits());
    }
}

/// Instant Runoff eliminating one alternative per round; among those with
/// the fewest first places the lowest index goes first.
pub fn instant_runoff_tb(profile: &Profile) -> WinningSet {
    let n = profile.n() as u32;
    let mut alive = WinningSet::full(profile.m());
    loop {
        if alive.len() == 1 {
            return alive;
        }
        let firsts = plurality_counts(profile, alive);
        if let Some(x) = alive.iter().find(|&a| 2 * firsts[a] > n) {
            return WinningSet::singleton(x);
        }
        let loser = argmin_in(alive, |a| firsts[a])
            .iter()
            .next()
            .expect("alive is nonempty");
        alive.remove(loser);
    }
}

/// Plurality with runoff, taking the union over every way of breaking ties
/// when choosing the two finalists.
pub fn plurality_with_runoff_put(profile: &Profile) -> WinningSet {
    let m = profile.m();
    if m == 1 {
        return WinningSet::full(1);
    }
    let all = WinningSet::full(m);
    let firsts = plurality_counts(profile, all);
    if let Some(x) = (0..m).find(|&a| 2 * firsts[a] as usize > profile.n()) {
        return WinningSet::singleton(x);
    }
    let tops = argmax_in(all, |a| firsts[a]);
    let mut pairs = Vec::new();
    if tops.len() >= 2 {
        for x in tops.iter() {
            for y in tops.iter().filter(|&y| y > x) {
                pairs.push((x, y));
            }
        }
    } else {
        let x = tops.iter().next().expect("nonempty");
        let rest = WinningSet::from_bits(all.bits() & !tops.bits());
        for y in argmax_in(rest, |a| firsts[a]).iter() {
            pairs.push((x, y));
        }
    }
    let mm = margin_matrix(profile);
    let mut winners = WinningSet::empty();
    for (x, y) in pairs {
        match mm.margin(x, y) {
            d if d > 0 => winners.insert(x),
            d if d < 0 => winners.insert(y),
            _ => {
                winners.insert(x);
                winners.insert(y);
            }
        }
    }
    winners
}

/// Tops of all linear orders minimizing the summed Kendall-Tau distance to
/// the voters, found by dynamic programming over subsets.
pub fn kemeny_young(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    let full = (1usize << m) - 1;
    // best[s]: minimal disagreement count of an order of subset s.
    let mut best = vec![0u64; 1 << m];
    for s in 1..=full {
        best[s] = (0..m)
            .filter(|&x| s & (1 << x) != 0)
            .map(|x| place_first_cost(&mm, x, s) + best[s & !(1 << x)])
            .min()
            .expect("nonempty subset");
    }
    (0..m)
        .filter(|&x| place_first_cost(&mm, x, full) + best[full & !(1 << x)] == best[full])
        .collect()
}

/// Disagreements caused by putting `x` above the rest of subset `s`.
fn place_first_cost(mm: &MarginMatrix, x: usize, s: usize) -> u64 {
    (0..mm.m())
        .filter(|&y| y != x && s & (1 << y) != 0)
        .map(|y| mm.get(y, x) as u64)
        .sum()
}
