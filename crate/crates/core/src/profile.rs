//! Rankings, profiles, winning sets and the majority margins derived from them.

use std::fmt;
use std::str::FromStr;

use crate::error::{CoreError, Result};

/// Largest number of alternatives any profile may have.
///
/// Several rules (Banks, Kemeny-Young, Split Cycle) and the neutrality-averaged
/// decoder enumerate subsets or permutations of the alternatives, so the bound
/// is kept small.
pub const MAX_ALTERNATIVES: usize = 8;

/// Letter used for alternative `a` when printing (`0 -> a`, `1 -> b`, …).
pub fn letter(a: usize) -> char {
    (b'a' + a as u8) as char
}

/// Checks that `perm` is a permutation of `0..len`.
pub fn validate_permutation(perm: &[usize], len: usize) -> Result<()> {
    if perm.len() != len {
        return Err(CoreError::InvalidPermutation {
            perm: perm.to_vec(),
            len,
        });
    }
    let mut seen = vec![false; len];
    for &p in perm {
        if p >= len || seen[p] {
            return Err(CoreError::InvalidPermutation {
                perm: perm.to_vec(),
                len,
            });
        }
        seen[p] = true;
    }
    Ok(())
}

/// Inverse of a permutation given as a lookup table.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// A strict linear order over `m` alternatives, most preferred first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Ranking(Vec<u8>);

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let m = order.len();
        if m == 0 || m > MAX_ALTERNATIVES || validate_permutation(&order, m).is_err() {
            return Err(CoreError::InvalidRanking { order, m });
        }
        Ok(Ranking(order.into_iter().map(|a| a as u8).collect()))
    }

    pub fn identity(m: usize) -> Self {
        Ranking((0..m as u8).collect())
    }

    pub(crate) fn from_bytes_unchecked(order: &[u8]) -> Self {
        Ranking(order.to_vec())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn top(&self) -> usize {
        self.0[0] as usize
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.0.iter().map(|&a| a as usize).collect()
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_joined(f, &self.0)
    }
}

impl FromStr for Ranking {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Ranking::new(parse_indices(s)?)
    }
}

fn write_joined(f: &mut fmt::Formatter<'_>, items: &[u8]) -> fmt::Result {
    for (i, a) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

fn parse_indices(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| CoreError::Parse(format!("bad index `{t}`: {e}")))
        })
        .collect()
}

/// Number of pairs ordered one way in `r1` and the other way in `r2`.
pub fn kendall_tau(r1: &Ranking, r2: &Ranking) -> Result<usize> {
    if r1.len() != r2.len() {
        return Err(CoreError::LengthMismatch {
            expected: r1.len(),
            actual: r2.len(),
        });
    }
    Ok(kendall_tau_slices(r1.as_slice(), r2.as_slice()))
}

pub(crate) fn kendall_tau_slices(r1: &[u8], r2: &[u8]) -> usize {
    let mut pos2 = [0usize; MAX_ALTERNATIVES];
    for (i, &a) in r2.iter().enumerate() {
        pos2[a as usize] = i;
    }
    let mut d = 0;
    for i in 0..r1.len() {
        for j in i + 1..r1.len() {
            if pos2[r1[i] as usize] > pos2[r1[j] as usize] {
                d += 1;
            }
        }
    }
    d
}

/// `n` voters' rankings over the same `m` alternatives.
///
/// Stored voter-major: `data[s * m + r]` is voter `s`'s `r`-th choice.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Profile {
    m: usize,
    n: usize,
    data: Vec<u8>,
}

impl Profile {
    pub fn new(rankings: Vec<Ranking>) -> Result<Self> {
        let Some(first) = rankings.first() else {
            return Err(CoreError::OutOfBounds {
                what: "n",
                value: 0,
                min: 1,
                max: usize::MAX,
            });
        };
        let m = first.len();
        let mut data = Vec::with_capacity(m * rankings.len());
        for r in &rankings {
            if r.len() != m {
                return Err(CoreError::LengthMismatch {
                    expected: m,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r.as_slice());
        }
        Ok(Profile {
            m,
            n: rankings.len(),
            data,
        })
    }

    /// Builds a profile from plain index vectors, one per voter.
    pub fn from_orders(orders: &[Vec<usize>]) -> Result<Self> {
        Profile::new(
            orders
                .iter()
                .map(|o| Ranking::new(o.clone()))
                .collect::<Result<_>>()?,
        )
    }

    /// Parses a profile written column-wise with letters, one line per rank
    /// position (the layout used when profiles are printed as tables):
    ///
    /// ```text
    /// c d d c a d
    /// a b b b b a
    /// ```
    pub fn from_letter_rows(text: &str) -> Result<Self> {
        let rows: Vec<Vec<usize>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        let c = t.chars().next().unwrap_or('?');
                        if t.len() == 1 && c.is_ascii_lowercase() {
                            Ok(c as usize - 'a' as usize)
                        } else {
                            Err(CoreError::Parse(format!("bad alternative `{t}`")))
                        }
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let n = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n) {
            return Err(CoreError::Parse("ragged profile table".into()));
        }
        let orders: Vec<Vec<usize>> = (0..n)
            .map(|s| rows.iter().map(|row| row[s]).collect())
            .collect();
        Profile::from_orders(&orders)
    }

    /// Trusted constructor for generators that produce valid rankings.
    pub(crate) fn from_raw(m: usize, n: usize, data: Vec<u8>) -> Self {
        debug_assert_eq!(data.len(), m * n);
        debug_assert!((0..n).all(|s| {
            let r: Vec<usize> = data[s * m..(s + 1) * m].iter().map(|&a| a as usize).collect();
            validate_permutation(&r, m).is_ok()
        }));
        Profile { m, n, data }
    }

    /// Number of alternatives.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Number of voters.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Voter `s`'s ranking, most preferred first.
    pub fn ranking(&self, s: usize) -> &[u8] {
        &self.data[s * self.m..(s + 1) * self.m]
    }

    pub fn rankings(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(self.m)
    }

    pub fn to_rankings(&self) -> Vec<Ranking> {
        self.rankings().map(Ranking::from_bytes_unchecked).collect()
    }

    /// Multi-line table with one column per voter, letters for alternatives.
    pub fn to_letter_table(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n {
            out.push_str(&format!("{:>3}", s + 1));
        }
        out.push('\n');
        for r in 0..self.m {
            for s in 0..self.n {
                out.push_str(&format!("{:>3}", letter(self.ranking(s)[r] as usize)));
            }
            out.push('\n');
        }
        out
    }
}

/// Line format `m;n;r_1|r_2|…|r_n`, each ranking comma-separated.
impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{};{};", self.m, self.n)?;
        for (s, r) in self.rankings().enumerate() {
            if s > 0 {
                f.write_str("|")?;
            }
            write_joined(f, r)?;
        }
        Ok(())
    }
}

impl FromStr for Profile {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().splitn(3, ';');
        let (Some(m), Some(n), Some(body)) = (parts.next(), parts.next(), parts.next()) else {
            return Err(CoreError::Parse(format!("expected `m;n;rankings`, got `{s}`")));
        };
        let m: usize = m
            .trim()
            .parse()
            .map_err(|e| CoreError::Parse(format!("bad m `{m}`: {e}")))?;
        let n: usize = n
            .trim()
            .parse()
            .map_err(|e| CoreError::Parse(format!("bad n `{n}`: {e}")))?;
        let rankings: Vec<Ranking> = body.split('|').map(str::parse).collect::<Result<_>>()?;
        if rankings.len() != n {
            return Err(CoreError::LengthMismatch {
                expected: n,
                actual: rankings.len(),
            });
        }
        let p = Profile::new(rankings)?;
        if p.m != m {
            return Err(CoreError::LengthMismatch {
                expected: m,
                actual: p.m,
            });
        }
        Ok(p)
    }
}

/// Pairwise support counts: `get(x, y)` voters rank `x` above `y`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MarginMatrix {
    m: usize,
    n: usize,
    counts: Vec<u32>,
}

impl MarginMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.counts[x * self.m + y]
    }

    /// `x` is strictly majority-preferred to `y`.
    #[inline]
    pub fn beats(&self, x: usize, y: usize) -> bool {
        self.get(x, y) > self.get(y, x)
    }

    /// Signed margin `n(x≻y) − n(y≻x)`.
    #[inline]
    pub fn margin(&self, x: usize, y: usize) -> i64 {
        self.get(x, y) as i64 - self.get(y, x) as i64
    }

    /// Every voter ranks `x` above `y`.
    #[inline]
    pub fn unanimous(&self, x: usize, y: usize) -> bool {
        x != y && self.get(x, y) as usize == self.n
    }

    pub fn condorcet_winner(&self) -> Option<usize> {
        (0..self.m).find(|&x| (0..self.m).all(|y| y == x || 2 * self.get(x, y) as usize > self.n))
    }
}

pub fn margin_matrix(profile: &Profile) -> MarginMatrix {
    let m = profile.m;
    let mut counts = vec![0u32; m * m];
    for r in profile.rankings() {
        for i in 0..m {
            let x = r[i] as usize;
            for &y in &r[i + 1..] {
                counts[x * m + y as usize] += 1;
            }
        }
    }
    MarginMatrix {
        m,
        n: profile.n,
        counts,
    }
}

/// The alternative that beats every other one by a strict majority, if any.
pub fn condorcet_winner(profile: &Profile) -> Option<usize> {
    margin_matrix(profile).condorcet_winner()
}

/// Voter `s` of the result is voter `pi[s]` of the input.
pub fn permute_voters(profile: &Profile, pi: &[usize]) -> Result<Profile> {
    validate_permutation(pi, profile.n)?;
    let mut data = Vec::with_capacity(profile.data.len());
    for &s in pi {
        data.extend_from_slice(profile.ranking(s));
    }
    Ok(Profile::from_raw(profile.m, profile.n, data))
}

/// Renames every alternative `a` to `sigma[a]`.
pub fn permute_alternatives(profile: &Profile, sigma: &[usize]) -> Result<Profile> {
    validate_permutation(sigma, profile.m)?;
    let data = profile.data.iter().map(|&a| sigma[a as usize] as u8).collect();
    Ok(Profile::from_raw(profile.m, profile.n, data))
}

/// A set of alternatives, stored as a bitmask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WinningSet(u32);

impl WinningSet {
    pub const fn empty() -> Self {
        WinningSet(0)
    }

    /// All of `0..m`.
    pub const fn full(m: usize) -> Self {
        WinningSet((1u32 << m) - 1)
    }

    pub const fn singleton(a: usize) -> Self {
        WinningSet(1 << a)
    }

    pub const fn from_bits(bits: u32) -> Self {
        WinningSet(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub fn insert(&mut self, a: usize) {
        self.0 |= 1 << a;
    }

    pub fn remove(&mut self, a: usize) {
        self.0 &= !(1 << a);
    }

    #[inline]
    pub const fn contains(self, a: usize) -> bool {
        self.0 & (1 << a) != 0
    }

    pub const fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn is_subset(self, other: WinningSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub const fn is_disjoint(self, other: WinningSet) -> bool {
        self.0 & other.0 == 0
    }

    pub const fn union(self, other: WinningSet) -> WinningSet {
        WinningSet(self.0 | other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |a| bits & (1 << a) != 0)
    }

    /// Image of the set under the alternative renaming `sigma`.
    pub fn permuted(self, sigma: &[usize]) -> WinningSet {
        self.iter().map(|a| sigma[a]).collect()
    }

    /// Set written with letters, e.g. `{a,e}`.
    pub fn letters(self) -> String {
        let inner: Vec<String> = self.iter().map(|a| letter(a).to_string()).collect();
        format!("{{{}}}", inner.join(","))
    }
}

impl FromIterator<usize> for WinningSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = WinningSet::empty();
        for a in iter {
            s.insert(a);
        }
        s
    }
}

impl fmt::Debug for WinningSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// Comma-separated indices (`0,2`); the empty set prints as `-`.
impl fmt::Display for WinningSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("-");
        }
        let items: Vec<u8> = self.iter().map(|a| a as u8).collect();
        write_joined(f, &items)
    }
}

impl FromStr for WinningSet {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "-" {
            return Ok(WinningSet::empty());
        }
        let items = parse_indices(s)?;
        if let Some(&bad) = items.iter().find(|&&a| a >= MAX_ALTERNATIVES) {
            return Err(CoreError::OutOfBounds {
                what: "alternative",
                value: bad,
                min: 0,
                max: MAX_ALTERNATIVES - 1,
            });
        }
        Ok(items.into_iter().collect())
    }
}
