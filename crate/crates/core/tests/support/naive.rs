//! Straight transcriptions of each rule's definition, written for clarity
//! rather than speed. Elimination rules physically delete alternatives from
//! the rankings; tournament rules enumerate subsets, cycles or orders.

#![allow(dead_code)]

use deepvote_core::{Profile, RuleId, WinningSet};

type Ballots = Vec<Vec<usize>>;

fn ballots(p: &Profile) -> Ballots {
    p.rankings()
        .map(|r| r.iter().map(|&a| a as usize).collect())
        .collect()
}

fn prefers(ballot: &[usize], x: usize, y: usize) -> bool {
    ballot.iter().position(|&a| a == x).unwrap() < ballot.iter().position(|&a| a == y).unwrap()
}

fn support(b: &Ballots, x: usize, y: usize) -> usize {
    b.iter().filter(|r| prefers(r, x, y)).count()
}

fn majority(b: &Ballots, x: usize, y: usize) -> bool {
    support(b, x, y) > support(b, y, x)
}

fn set(items: impl IntoIterator<Item = usize>) -> WinningSet {
    items.into_iter().collect()
}

fn best_by(cands: &[usize], score: impl Fn(usize) -> i64) -> WinningSet {
    let best = cands.iter().map(|&c| score(c)).max().unwrap();
    set(cands.iter().copied().filter(|&c| score(c) == best))
}

fn score_rule(b: &Ballots, cands: &[usize], points: impl Fn(usize, usize) -> i64) -> Vec<i64> {
    let k = cands.len();
    let mut s = vec![0i64; cands.iter().max().unwrap() + 1];
    for r in b {
        let restricted: Vec<usize> = r.iter().copied().filter(|a| cands.contains(a)).collect();
        for (pos, &a) in restricted.iter().enumerate() {
            s[a] += points(pos, k);
        }
    }
    s
}

fn condorcet(b: &Ballots, cands: &[usize]) -> Option<usize> {
    let n = b.len();
    cands
        .iter()
        .copied()
        .find(|&x| cands.iter().all(|&y| y == x || 2 * support(b, x, y) > n))
}

fn subsets(m: usize) -> impl Iterator<Item = Vec<usize>> {
    (1u32..(1 << m)).map(move |mask| (0..m).filter(|&i| mask & (1 << i) != 0).collect())
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

pub fn plurality(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    let s = score_rule(b, &all, |pos, _| (pos == 0) as i64);
    best_by(&all, |a| s[a])
}

pub fn borda(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    let s = score_rule(b, &all, |pos, k| (k - 1 - pos) as i64);
    best_by(&all, |a| s[a])
}

pub fn anti_plurality(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    let s = score_rule(b, &all, |pos, k| (pos + 1 != k) as i64);
    best_by(&all, |a| s[a])
}

pub fn copeland(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    best_by(&all, |x| {
        let wins = all.iter().filter(|&&y| majority(b, x, y)).count() as i64;
        let losses = all.iter().filter(|&&y| majority(b, y, x)).count() as i64;
        wins - losses
    })
}

pub fn llull(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    best_by(&all, |x| {
        all.iter()
            .filter(|&&y| y != x && support(b, x, y) >= support(b, y, x))
            .count() as i64
    })
}

/// Smallest nonempty set whose members all strictly beat every outsider.
pub fn top_cycle(b: &Ballots, m: usize) -> WinningSet {
    subsets(m)
        .filter(|s| {
            s.iter().all(|&x| {
                (0..m)
                    .filter(|y| !s.contains(y))
                    .all(|y| majority(b, x, y))
            })
        })
        .min_by_key(Vec::len)
        .map(set)
        .unwrap()
}

pub fn uncovered_set(b: &Ballots, m: usize) -> WinningSet {
    let left_covers = |x: usize, y: usize| {
        (0..m).all(|z| !majority(b, z, x) || majority(b, z, y))
    };
    set((0..m).filter(|&y| !(0..m).any(|x| majority(b, x, y) && left_covers(x, y))))
}

/// Subsets on which the strict majority relation is a linear order,
/// checked pairwise-complete and transitive.
fn is_chain(b: &Ballots, s: &[usize]) -> bool {
    for &x in s {
        for &y in s {
            if x != y && !majority(b, x, y) && !majority(b, y, x) {
                return false;
            }
            for &z in s {
                if majority(b, x, y) && majority(b, y, z) && !majority(b, x, z) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn banks(b: &Ballots, m: usize) -> WinningSet {
    let chains: Vec<Vec<usize>> = subsets(m).filter(|s| is_chain(b, s)).collect();
    let maximal = chains.iter().filter(|c| {
        !chains
            .iter()
            .any(|d| d.len() > c.len() && c.iter().all(|x| d.contains(x)))
    });
    set(maximal.map(|c| {
        *c.iter()
            .find(|&&x| c.iter().all(|&y| y == x || majority(b, x, y)))
            .unwrap()
    }))
}

/// All simple cycles of the majority graph on `cands`, each as a vertex list.
fn simple_cycles(b: &Ballots, cands: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for perm_len in 2..=cands.len() {
        for sub in subsets(cands.len()).filter(|s| s.len() == perm_len) {
            let verts: Vec<usize> = sub.iter().map(|&i| cands[i]).collect();
            // Fix the smallest vertex first to count each cycle once.
            let first = verts[0];
            for rest in permutations(&verts[1..]) {
                let mut cyc = vec![first];
                cyc.extend(rest);
                let closed = (0..cyc.len()).all(|i| majority(b, cyc[i], cyc[(i + 1) % cyc.len()]));
                if closed {
                    out.push(cyc);
                }
            }
        }
    }
    out
}

fn split_cycle_on(b: &Ballots, cands: &[usize]) -> WinningSet {
    let mut deleted = Vec::new();
    for cyc in simple_cycles(b, cands) {
        let edges: Vec<(usize, usize)> = (0..cyc.len())
            .map(|i| (cyc[i], cyc[(i + 1) % cyc.len()]))
            .collect();
        let weakest = edges.iter().map(|&(x, y)| support(b, x, y)).min().unwrap();
        for &(x, y) in &edges {
            if support(b, x, y) == weakest {
                deleted.push((x, y));
            }
        }
    }
    set(cands.iter().copied().filter(|&y| {
        !cands
            .iter()
            .any(|&x| majority(b, x, y) && !deleted.contains(&(x, y)))
    }))
}

pub fn split_cycle(b: &Ballots, m: usize) -> WinningSet {
    split_cycle_on(b, &(0..m).collect::<Vec<_>>())
}

fn stable_voting_on(b: &Ballots, cands: &[usize]) -> WinningSet {
    if cands.len() == 1 {
        return set(cands.iter().copied());
    }
    let sc = split_cycle_on(b, cands);
    if sc.len() == 1 {
        return sc;
    }
    let margin = |x: usize, y: usize| support(b, x, y) as i64 - support(b, y, x) as i64;
    let mut margins: Vec<i64> = sc
        .iter()
        .flat_map(|a| cands.iter().filter(move |&&c| c != a).map(move |&c| margin(a, c)))
        .collect();
    margins.sort_unstable_by(|x, y| y.cmp(x));
    margins.dedup();
    for level in margins {
        let mut winners = WinningSet::empty();
        for a in sc.iter() {
            for &c in cands {
                if c != a && margin(a, c) == level {
                    let rest: Vec<usize> = cands.iter().copied().filter(|&z| z != c).collect();
                    if stable_voting_on(b, &rest).contains(a) {
                        winners.insert(a);
                    }
                }
            }
        }
        if !winners.is_empty() {
            return winners;
        }
    }
    sc
}

pub fn stable_voting(b: &Ballots, m: usize) -> WinningSet {
    stable_voting_on(b, &(0..m).collect::<Vec<_>>())
}

pub fn blacks(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    match condorcet(b, &all) {
        Some(x) => set([x]),
        None => borda(b, m),
    }
}

fn first_place_majority(b: &Ballots, cands: &[usize]) -> Option<usize> {
    let n = b.len();
    cands.iter().copied().find(|&x| {
        2 * b
            .iter()
            .filter(|r| r.iter().find(|a| cands.contains(a)) == Some(&x))
            .count()
            > n
    })
}

pub fn instant_runoff_tb(b: &Ballots, m: usize) -> WinningSet {
    let mut cands: Vec<usize> = (0..m).collect();
    loop {
        if cands.len() == 1 {
            return set(cands);
        }
        if let Some(x) = first_place_majority(b, &cands) {
            return set([x]);
        }
        let s = score_rule(b, &cands, |pos, _| (pos == 0) as i64);
        let low = cands.iter().map(|&c| s[c]).min().unwrap();
        let out = *cands.iter().filter(|&&c| s[c] == low).min().unwrap();
        cands.retain(|&c| c != out);
    }
}

/// Removes every candidate chosen by `eliminate`; a round that would remove
/// everyone makes them all winners.
fn eliminate_until_done(
    b: &Ballots,
    m: usize,
    stop_on_majority: bool,
    eliminate: impl Fn(&[usize]) -> Vec<usize>,
) -> WinningSet {
    let mut cands: Vec<usize> = (0..m).collect();
    loop {
        if cands.len() == 1 {
            return set(cands);
        }
        if stop_on_majority {
            if let Some(x) = first_place_majority(b, &cands) {
                return set([x]);
            }
        }
        let out = eliminate(&cands);
        if out.len() == cands.len() {
            return set(cands);
        }
        cands.retain(|c| !out.contains(c));
    }
}

pub fn coombs(b: &Ballots, m: usize) -> WinningSet {
    eliminate_until_done(b, m, true, |cands| {
        let last = score_rule(b, cands, |pos, k| (pos + 1 == k) as i64);
        let worst = cands.iter().map(|&c| last[c]).max().unwrap();
        cands.iter().copied().filter(|&c| last[c] == worst).collect()
    })
}

pub fn baldwin(b: &Ballots, m: usize) -> WinningSet {
    eliminate_until_done(b, m, false, |cands| {
        let s = score_rule(b, cands, |pos, k| (k - 1 - pos) as i64);
        let low = cands.iter().map(|&c| s[c]).min().unwrap();
        cands.iter().copied().filter(|&c| s[c] == low).collect()
    })
}

pub fn weak_nanson(b: &Ballots, m: usize) -> WinningSet {
    eliminate_until_done(b, m, false, |cands| {
        let s = score_rule(b, cands, |pos, k| (k - 1 - pos) as i64);
        let avg = cands.iter().map(|&c| s[c] as f64).sum::<f64>() / cands.len() as f64;
        cands.iter().copied().filter(|&c| s[c] as f64 <= avg).collect()
    })
}

/// Every finalist pair obtainable by ordering the alternatives by plurality
/// score with ties broken in any way.
pub fn plurality_with_runoff_put(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    if m == 1 {
        return set([0]);
    }
    if let Some(x) = first_place_majority(b, &all) {
        return set([x]);
    }
    let s = score_rule(b, &all, |pos, _| (pos == 0) as i64);
    let mut out = WinningSet::empty();
    for order in permutations(&all) {
        if order.windows(2).all(|w| s[w[0]] >= s[w[1]]) {
            let (x, y) = (order[0], order[1]);
            let (sx, sy) = (support(b, x, y), support(b, y, x));
            if sx >= sy {
                out.insert(x);
            }
            if sy >= sx {
                out.insert(y);
            }
        }
    }
    out
}

pub fn kemeny_young(b: &Ballots, m: usize) -> WinningSet {
    let all: Vec<usize> = (0..m).collect();
    let orders = permutations(&all);
    let dist = |o: &Vec<usize>| -> usize {
        b.iter()
            .map(|r| {
                let mut d = 0;
                for i in 0..m {
                    for j in i + 1..m {
                        if prefers(r, o[j], o[i]) {
                            d += 1;
                        }
                    }
                }
                d
            })
            .sum()
    };
    let scored: Vec<(usize, usize)> = orders.iter().map(|o| (dist(o), o[0])).collect();
    let best = scored.iter().map(|s| s.0).min().unwrap();
    set(scored.into_iter().filter(|s| s.0 == best).map(|s| s.1))
}

pub fn naive_rule(rule: RuleId, p: &Profile) -> WinningSet {
    let b = ballots(p);
    let m = p.m();
    match rule {
        RuleId::Plurality => plurality(&b, m),
        RuleId::Borda => borda(&b, m),
        RuleId::AntiPlurality => anti_plurality(&b, m),
        RuleId::Copeland => copeland(&b, m),
        RuleId::Llull => llull(&b, m),
        RuleId::UncoveredSet => uncovered_set(&b, m),
        RuleId::TopCycle => top_cycle(&b, m),
        RuleId::Banks => banks(&b, m),
        RuleId::StableVoting => stable_voting(&b, m),
        RuleId::Blacks => blacks(&b, m),
        RuleId::InstantRunoffTB => instant_runoff_tb(&b, m),
        RuleId::PluralityWRunoffPUT => plurality_with_runoff_put(&b, m),
        RuleId::Coombs => coombs(&b, m),
        RuleId::Baldwin => baldwin(&b, m),
        RuleId::WeakNanson => weak_nanson(&b, m),
        RuleId::KemenyYoung => kemeny_young(&b, m),
    }
}

pub fn naive_split_cycle(p: &Profile) -> WinningSet {
    split_cycle(&ballots(p), p.m())
}

/// All profiles with `n` voters over `m` alternatives (ordered voter lists).
pub fn all_profiles(m: usize, n: usize) -> Vec<Profile> {
    let rankings = permutations(&(0..m).collect::<Vec<_>>());
    let mut out = Vec::new();
    let total = rankings.len().pow(n as u32);
    for mut code in 0..total {
        let mut orders = Vec::with_capacity(n);
        for _ in 0..n {
            orders.push(rankings[code % rankings.len()].clone());
            code /= rankings.len();
        }
        out.push(Profile::from_orders(&orders).unwrap());
    }
    out
}
