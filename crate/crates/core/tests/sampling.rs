use std::collections::HashMap;

use deepvote_core::profile::kendall_tau;
use deepvote_core::sampling::{
    phi_from_rel_phi, rng_from_seed, sample_euclidean, sample_ic, sample_mallows, sample_profile,
    sample_urn, sample_urn_r, DistributionKind, DistributionSpec, Rng,
};
use deepvote_core::{condorcet_winner, Profile, Ranking, MAX_ALTERNATIVES};

/// Frequencies of each distinct ranking over all voters of `profiles`.
fn ranking_counts(profiles: &[Profile]) -> HashMap<Vec<u8>, usize> {
    let mut counts = HashMap::new();
    for p in profiles {
        for r in p.rankings() {
            *counts.entry(r.to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Chi-square statistic against the uniform law on `cells` outcomes.
fn chi_square_uniform(counts: &HashMap<Vec<u8>, usize>, cells: usize) -> f64 {
    let total: usize = counts.values().sum();
    let expected = total as f64 / cells as f64;
    let mut stat = 0.0;
    for c in counts.values() {
        stat += (*c as f64 - expected).powi(2) / expected;
    }
    stat + (cells - counts.len()) as f64 * expected
}

/// 0.999 quantile of chi-square with 5 degrees of freedom.
const CHI2_5_P001: f64 = 20.515;

#[test]
fn ic_single_alternative() {
    let p = sample_ic(1, 10, &mut rng_from_seed(0)).unwrap();
    assert!(p.rankings().all(|r| r == [0]));
}

#[test]
fn ic_two_alternatives_balanced() {
    let p = sample_ic(2, 10_000, &mut rng_from_seed(1)).unwrap();
    let share = p.rankings().filter(|r| r[0] == 0).count() as f64 / 10_000.0;
    assert!((share - 0.5).abs() < 0.02, "{share}");
}

#[test]
fn ic_three_alternatives_uniform() {
    let p = sample_ic(3, 60_000, &mut rng_from_seed(2)).unwrap();
    let counts = ranking_counts(&[p]);
    assert_eq!(counts.len(), 6);
    for c in counts.values() {
        assert!((*c as f64 / 60_000.0 - 1.0 / 6.0).abs() < 0.01);
    }
}

#[test]
fn mallows_at_rel_phi_one_is_uniform() {
    let p = sample_mallows(3, 60_000, 1.0, &mut rng_from_seed(3)).unwrap();
    let stat = chi_square_uniform(&ranking_counts(&[p]), 6);
    assert!(stat < CHI2_5_P001, "chi-square {stat}");
}

#[test]
fn mallows_concentrates_for_small_rel_phi() {
    let p = sample_mallows(4, 100, 0.01, &mut rng_from_seed(4)).unwrap();
    let identity = p.rankings().filter(|r| *r == [0, 1, 2, 3]).count();
    assert!(identity >= 95, "{identity}");
    assert!(phi_from_rel_phi(0.01, 4) < 0.02);
}

#[test]
fn mallows_mean_distance_matches_rel_phi() {
    let p = sample_mallows(4, 100_000, 0.5, &mut rng_from_seed(5)).unwrap();
    let id = Ranking::identity(4);
    let mean = p
        .to_rankings()
        .iter()
        .map(|r| kendall_tau(&id, r).unwrap())
        .sum::<usize>() as f64
        / 100_000.0;
    assert!((mean - 1.5).abs() < 0.05, "{mean}");
}

#[test]
fn urn_without_reinforcement_is_uniform() {
    let mut rng = rng_from_seed(6);
    let profiles: Vec<Profile> = (0..1_000).map(|_| sample_urn(3, 60, 0.0, &mut rng).unwrap()).collect();
    let stat = chi_square_uniform(&ranking_counts(&profiles), 6);
    assert!(stat < CHI2_5_P001, "chi-square {stat}");
}

#[test]
fn urn_with_huge_reinforcement_copies_first_voter() {
    let mut rng = rng_from_seed(7);
    let mut all_same = 0;
    for _ in 0..200 {
        let p = sample_urn(5, 50, 1e6, &mut rng).unwrap();
        all_same += p.rankings().all(|r| r == p.ranking(0)) as usize;
    }
    assert!(all_same >= 198, "{all_same}");
}

#[test]
fn urn_single_voter() {
    let p = sample_urn_r(4, 1, &mut rng_from_seed(8)).unwrap();
    assert_eq!(p.n(), 1);
}

#[test]
fn euclidean_raises_condorcet_rate() {
    let mut rng = rng_from_seed(9);
    let trials = 10_000;
    let mut euc = 0;
    let mut ic = 0;
    for _ in 0..trials {
        euc += condorcet_winner(&sample_euclidean(5, 55, &mut rng).unwrap()).is_some() as usize;
        ic += condorcet_winner(&sample_ic(5, 55, &mut rng).unwrap()).is_some() as usize;
    }
    assert!(euc > ic, "euclidean {euc} vs ic {ic}");
}

#[test]
fn euclidean_single_alternative() {
    let p = sample_euclidean(1, 4, &mut rng_from_seed(10)).unwrap();
    assert!(p.rankings().all(|r| r == [0]));
}

#[test]
fn sample_profile_sizes() {
    let mut rng = rng_from_seed(11);
    let spec = DistributionSpec::ic();
    let p = sample_profile(&spec, 1, 1, &mut rng).unwrap();
    assert_eq!((p.m(), p.n()), (1, 1));
    let mean_n = (0..10_000)
        .map(|_| sample_profile(&spec, 5, 55, &mut rng).unwrap().n())
        .sum::<usize>() as f64
        / 10_000.0;
    assert!((mean_n - 28.0).abs() < 1.0, "{mean_n}");
}

fn stream(spec: &DistributionSpec, seed: u64) -> Vec<String> {
    let mut rng: Rng = rng_from_seed(seed);
    (0..50)
        .map(|_| sample_profile(spec, 7, 55, &mut rng).unwrap().to_string())
        .collect()
}

#[test]
fn same_seed_same_profiles() {
    for kind in DistributionKind::ALL {
        let spec = DistributionSpec::new(kind);
        assert_eq!(stream(&spec, 42), stream(&spec, 42), "{kind}");
        assert_ne!(stream(&spec, 42), stream(&spec, 43), "{kind}");
    }
}

#[test]
fn fixed_seed_reference_output() {
    // Pinned so that changes to the generator or sampling code are noticed.
    let p = sample_ic(4, 3, &mut rng_from_seed(2024)).unwrap();
    assert_eq!(p.to_string(), "4;3;0,1,2,3|3,2,0,1|0,2,1,3");
}

#[test]
fn every_sample_is_a_valid_profile() {
    for kind in DistributionKind::ALL {
        let spec = DistributionSpec::new(kind);
        let mut rng = rng_from_seed(12);
        let mut voters = 0;
        while voters < 100_000 {
            let p = sample_profile(&spec, MAX_ALTERNATIVES, 55, &mut rng).unwrap();
            for r in p.rankings() {
                let order: Vec<usize> = r.iter().map(|&a| a as usize).collect();
                Ranking::new(order).unwrap();
            }
            voters += p.n();
        }
    }
}

#[test]
fn distribution_names() {
    for kind in DistributionKind::ALL {
        assert_eq!(kind.name().parse::<DistributionKind>().unwrap(), kind);
    }
    assert!("uniform".parse::<DistributionKind>().is_err());
    let mut bad = DistributionSpec::ic();
    bad.rel_phi = Some(0.0);
    assert!(bad.validate().is_err());
}
