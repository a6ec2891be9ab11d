//! Seeded profile generators: Impartial Culture, Mallows (rel-φ), Urn-R and
//! 2D Euclidean.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_distr::{Distribution, Gamma};

use crate::error::{CoreError, Result};
use crate::profile::{Profile, MAX_ALTERNATIVES};

/// The generator used everywhere; portable and reproducible from a `u64` seed.
pub type Rng = rand_chacha::ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Seed for sub-stream `stream` of `base`. Mixing (rather than plain xor)
/// keeps `(base, stream)` and `(base', stream')` apart when `base ^ stream`
/// collides.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(base ^ splitmix64(stream.wrapping_add(0x9e37_79b9_7f4a_7c15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistributionKind {
    IC,
    Mallows,
    UrnR,
    Euclidean,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 4] = [
        DistributionKind::IC,
        DistributionKind::Mallows,
        DistributionKind::UrnR,
        DistributionKind::Euclidean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::IC => "ic",
            DistributionKind::Mallows => "mallows",
            DistributionKind::UrnR => "urn_r",
            DistributionKind::Euclidean => "euclidean",
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        DistributionKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| CoreError::UnknownName {
                kind: "distribution",
                name: s.to_string(),
            })
    }
}

/// A distribution over profiles of given size.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    /// Fixed rel-φ for Mallows; `None` draws it uniformly from (0, 1] per profile.
    pub rel_phi: Option<f64>,
    /// Fixed urn reinforcement α; `None` draws it from Gamma(shape, scale) per profile.
    pub urn_alpha: Option<f64>,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind) -> Self {
        DistributionSpec {
            kind,
            rel_phi: None,
            urn_alpha: None,
            gamma_shape: 0.8,
            gamma_scale: 1.0,
        }
    }

    pub fn ic() -> Self {
        Self::new(DistributionKind::IC)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.rel_phi {
            if !(r > 0.0 && r <= 1.0) {
                return Err(CoreError::InvalidParameter(format!(
                    "rel_phi must lie in (0, 1], got {r}"
                )));
            }
        }
        if let Some(a) = self.urn_alpha {
            if !(a >= 0.0 && a.is_finite()) {
                return Err(CoreError::InvalidParameter(format!(
                    "urn alpha must be finite and nonnegative, got {a}"
                )));
            }
        }
        if !(self.gamma_shape > 0.0 && self.gamma_scale > 0.0) {
            return Err(CoreError::InvalidParameter(
                "gamma shape and scale must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Draws one profile with exactly `m` alternatives and `n` voters.
    pub fn sample_sized(&self, m: usize, n: usize, rng: &mut Rng) -> Result<Profile> {
        match self.kind {
            DistributionKind::IC => sample_ic(m, n, rng),
            DistributionKind::Mallows => {
                let rel_phi = match self.rel_phi {
                    Some(r) => r,
                    None => 1.0 - rng.random::<f64>(),
                };
                sample_mallows(m, n, rel_phi, rng)
            }
            DistributionKind::UrnR => {
                let alpha = match self.urn_alpha {
                    Some(a) => a,
                    None => Gamma::new(self.gamma_shape, self.gamma_scale)
                        .map_err(|e| CoreError::InvalidParameter(e.to_string()))?
                        .sample(rng),
                };
                sample_urn(m, n, alpha, rng)
            }
            DistributionKind::Euclidean => sample_euclidean(m, n, rng),
        }
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())
    }
}

impl FromStr for DistributionSpec {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(DistributionSpec::new(s.parse()?))
    }
}

fn check_bounds(m: usize, n: usize) -> Result<()> {
    if !(1..=MAX_ALTERNATIVES).contains(&m) {
        return Err(CoreError::OutOfBounds {
            what: "m",
            value: m,
            min: 1,
            max: MAX_ALTERNATIVES,
        });
    }
    if n == 0 {
        return Err(CoreError::OutOfBounds {
            what: "n",
            value: n,
            min: 1,
            max: usize::MAX,
        });
    }
    Ok(())
}

/// A uniformly random permutation of `0..len`.
pub fn random_permutation(len: usize, rng: &mut Rng) -> Vec<usize> {
    let mut p: Vec<usize> = (0..len).collect();
    p.shuffle(rng);
    p
}

fn push_uniform_ranking(m: usize, data: &mut Vec<u8>, rng: &mut Rng) {
    let start = data.len();
    data.extend(0..m as u8);
    data[start..].shuffle(rng);
}

pub fn sample_ic(m: usize, n: usize, rng: &mut Rng) -> Result<Profile> {
    check_bounds(m, n)?;
    let mut data = Vec::with_capacity(m * n);
    for _ in 0..n {
        push_uniform_ranking(m, &mut data, rng);
    }
    Ok(Profile::from_raw(m, n, data))
}

/// Expected Kendall-Tau distance to the reference ranking under Mallows(φ).
pub fn mallows_expected_distance(phi: f64, m: usize) -> f64 {
    let mut total = 0.0;
    for j in 1..m {
        let mut num = 0.0;
        let mut den = 1.0;
        let mut pow = 1.0;
        for i in 1..=j {
            pow *= phi;
            num += i as f64 * pow;
            den += pow;
        }
        total += num / den;
    }
    total
}

/// The dispersion φ whose expected distance is `rel_phi` times the uniform
/// expectation `m(m-1)/4`, found by bisection.
pub fn phi_from_rel_phi(rel_phi: f64, m: usize) -> f64 {
    if rel_phi >= 1.0 || m < 2 {
        return rel_phi.min(1.0);
    }
    let target = rel_phi * (m * (m - 1)) as f64 / 4.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mallows_expected_distance(mid, m) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Mallows profile around the identity ranking, sampled by repeated insertion.
pub fn sample_mallows(m: usize, n: usize, rel_phi: f64, rng: &mut Rng) -> Result<Profile> {
    check_bounds(m, n)?;
    if !(rel_phi > 0.0 && rel_phi <= 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "rel_phi must lie in (0, 1], got {rel_phi}"
        )));
    }
    let phi = phi_from_rel_phi(rel_phi, m);
    // weights[i][j]: unnormalized probability of inserting item i at position
    // j, which creates i - j inversions.
    let weights: Vec<Vec<f64>> = (0..m)
        .map(|i| (0..=i).map(|j| phi.powi((i - j) as i32)).collect())
        .collect();
    let mut data = Vec::with_capacity(m * n);
    let mut order: Vec<u8> = Vec::with_capacity(m);
    for _ in 0..n {
        order.clear();
        for (i, w) in weights.iter().enumerate() {
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pos = i;
            for (j, &wj) in w.iter().enumerate() {
                if u < wj {
                    pos = j;
                    break;
                }
                u -= wj;
            }
            order.insert(pos, i as u8);
        }
        data.extend_from_slice(&order);
    }
    Ok(Profile::from_raw(m, n, data))
}

/// Urn-R: α drawn from Gamma(0.8, 1), then a Pólya-Eggenberger urn.
pub fn sample_urn_r(m: usize, n: usize, rng: &mut Rng) -> Result<Profile> {
    DistributionSpec::new(DistributionKind::UrnR).sample_sized(m, n, rng)
}

/// Pólya-Eggenberger urn with reinforcement `alpha`: after `k` draws the
/// next voter copies a uniformly chosen earlier draw with probability
/// `kα / (1 + kα)` and otherwise draws a fresh uniform ranking.
pub fn sample_urn(m: usize, n: usize, alpha: f64, rng: &mut Rng) -> Result<Profile> {
    check_bounds(m, n)?;
    let mut data: Vec<u8> = Vec::with_capacity(m * n);
    for k in 0..n {
        let ka = k as f64 * alpha;
        if k > 0 && rng.random::<f64>() * (1.0 + ka) < ka {
            let src = rng.random_range(0..k);
            data.extend_from_within(src * m..(src + 1) * m);
        } else {
            push_uniform_ranking(m, &mut data, rng);
        }
    }
    Ok(Profile::from_raw(m, n, data))
}

/// Voters and alternatives uniform on the unit square; each voter ranks by
/// distance.
pub fn sample_euclidean(m: usize, n: usize, rng: &mut Rng) -> Result<Profile> {
    check_bounds(m, n)?;
    let alts: Vec<[f64; 2]> = (0..m).map(|_| [rng.random(), rng.random()]).collect();
    let voters: Vec<[f64; 2]> = (0..n).map(|_| [rng.random(), rng.random()]).collect();
    euclidean_profile(&voters, &alts)
}

/// Ranks `alts` by distance from each voter point; equal distances are
/// ordered by index.
pub fn euclidean_profile(voters: &[[f64; 2]], alts: &[[f64; 2]]) -> Result<Profile> {
    let (m, n) = (alts.len(), voters.len());
    check_bounds(m, n)?;
    let mut data = Vec::with_capacity(m * n);
    for v in voters {
        let dist = |a: usize| {
            let dx = v[0] - alts[a][0];
            let dy = v[1] - alts[a][1];
            dx * dx + dy * dy
        };
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| dist(a).total_cmp(&dist(b)).then(a.cmp(&b)));
        data.extend(order.into_iter().map(|a| a as u8));
    }
    Ok(Profile::from_raw(m, n, data))
}

/// Draws `m` uniform on `1..=m_max` and `n` uniform on `1..=n_max`, then a
/// profile of that size.
pub fn sample_profile(
    spec: &DistributionSpec,
    m_max: usize,
    n_max: usize,
    rng: &mut Rng,
) -> Result<Profile> {
    check_bounds(m_max, n_max)?;
    let m = rng.random_range(1..=m_max);
    let n = rng.random_range(1..=n_max);
    spec.sample_sized(m, n, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::kendall_tau_slices;

    #[test]
    fn phi_endpoints() {
        assert_eq!(phi_from_rel_phi(1.0, 5), 1.0);
        assert!(phi_from_rel_phi(1e-9, 5) < 1e-3);
        let phi = phi_from_rel_phi(0.5, 4);
        assert!((mallows_expected_distance(phi, 4) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn expected_distance_at_one_is_uniform() {
        for m in 1..8 {
            let e = mallows_expected_distance(1.0, m);
            assert!((e - (m * (m.saturating_sub(1))) as f64 / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn mallows_monte_carlo_distance() {
        let mut rng = rng_from_seed(3);
        let p = sample_mallows(4, 100_000, 0.5, &mut rng).unwrap();
        let id = [0u8, 1, 2, 3];
        let mean = p.rankings().map(|r| kendall_tau_slices(&id, r)).sum::<usize>() as f64
            / p.n() as f64;
        assert!((mean - 1.5).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn forced_euclidean_points() {
        let p = euclidean_profile(&[[0.0, 0.0]], &[[0.1, 0.0], [0.9, 0.0]]).unwrap();
        assert_eq!(p.ranking(0), &[0, 1]);
        let tie = euclidean_profile(&[[0.5, 0.0]], &[[0.6, 0.0], [0.4, 0.0]]).unwrap();
        assert_eq!(tie.ranking(0)[0], 0);
    }

    #[test]
    fn bounds_are_checked() {
        let mut rng = rng_from_seed(0);
        assert!(sample_ic(0, 3, &mut rng).is_err());
        assert!(sample_ic(3, 0, &mut rng).is_err());
        assert!(sample_ic(MAX_ALTERNATIVES + 1, 1, &mut rng).is_err());
        assert!(sample_mallows(3, 3, 0.0, &mut rng).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(0, 1));
        assert_ne!(derive_seed(7, 1), derive_seed(7, 2));
        assert_eq!(derive_seed(7, 1), derive_seed(7, 1));
    }
}
