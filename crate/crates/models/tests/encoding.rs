use deepvote_core::sampling::{rng_from_seed, sample_profile};
use deepvote_core::{DistributionSpec, Profile};
use deepvote_models::encode::{profile_sentence, ranking_token};
use deepvote_models::{encode_cnn, encode_mlp, encode_wec, full_vocabulary, kt_reorder, KtMode, ModelError};
use deepvote_nn::{Vocabulary, PAD_ID, UNK_ID};
use proptest::prelude::*;

fn profile(orders: &[&[usize]]) -> Profile {
    Profile::from_orders(&orders.iter().map(|o| o.to_vec()).collect::<Vec<_>>()).unwrap()
}

#[test]
fn mlp_small_cases() {
    let p = profile(&[&[0]]);
    assert_eq!(encode_mlp(&p, 1, 1).unwrap(), vec![1.0]);
    assert_eq!(encode_mlp(&p, 2, 1).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
    assert!(matches!(encode_mlp(&p, 1, 0), Err(ModelError::Bounds { .. })));
}

#[test]
fn mlp_layout_is_voter_major() {
    // Voter 1 ranks b first, so its first cell is the one-hot of 1.
    let p = profile(&[&[0, 1], &[1, 0]]);
    let v = encode_mlp(&p, 2, 3).unwrap();
    assert_eq!(v.len(), 12);
    assert_eq!(&v[..4], &[1.0, 0.0, 0.0, 1.0]);
    assert_eq!(&v[4..8], &[0.0, 1.0, 1.0, 0.0]);
    assert!(v[8..].iter().all(|&x| x == 0.0));
}

#[test]
fn cnn_pixels() {
    let (m_max, n_max) = (4, 6);
    let mut rng = rng_from_seed(1);
    for _ in 0..200 {
        let p = sample_profile(&DistributionSpec::ic(), m_max, n_max, &mut rng).unwrap();
        let v = encode_cnn(&p, m_max, n_max).unwrap();
        for r in 0..m_max {
            for s in 0..n_max {
                let total: f64 = (0..m_max).map(|c| v[c * m_max * n_max + r * n_max + s]).sum();
                let live = r < p.m() && s < p.n();
                assert_eq!(total, live as u8 as f64);
                if live {
                    let c = p.ranking(s)[r] as usize;
                    assert_eq!(v[c * m_max * n_max + r * n_max + s], 1.0);
                }
            }
        }
    }
}

#[test]
fn wec_ids() {
    let vocab = Vocabulary::from_words(["0,1", "1,0"]);
    let p = profile(&[&[1, 0], &[0, 1]]);
    let ids = encode_wec(&p, &vocab, 4).unwrap();
    assert_eq!(ids, vec![vocab.id("1,0"), vocab.id("0,1"), PAD_ID, PAD_ID]);
    assert!(!ids.contains(&UNK_ID));
    let q = profile(&[&[2, 0, 1]]);
    assert_eq!(encode_wec(&q, &vocab, 1).unwrap(), vec![UNK_ID]);
    assert_eq!(profile_sentence(&p), vec!["1,0".to_string(), "0,1".to_string()]);
    assert_eq!(ranking_token(&[3, 0, 2, 1]), "3,0,2,1");
}

#[test]
fn full_vocabulary_sizes() {
    assert_eq!(full_vocabulary(1).len(), 3);
    assert_eq!(full_vocabulary(3).len(), 1 + 2 + 6 + 2);
    let v = full_vocabulary(5);
    assert_eq!(v.len(), 155);
    assert!(v.get("4,3,2,1,0").is_some());
}

#[test]
fn kt_reorder_examples() {
    let row: &[usize] = &[0, 1, 2];
    let same = profile(&[row; 4]);
    assert_eq!(kt_reorder(&same, KtMode::Global), same);
    assert_eq!(kt_reorder(&same, KtMode::Local), same);
    let single = profile(&[&[2, 0, 1]]);
    assert_eq!(kt_reorder(&single, KtMode::Global), single);

    // Distances to voter 0: 0, 3, 1.
    let p = profile(&[&[0, 1, 2], &[2, 1, 0], &[1, 0, 2]]);
    let g = kt_reorder(&p, KtMode::Global);
    assert_eq!(g, profile(&[&[0, 1, 2], &[1, 0, 2], &[2, 1, 0]]));

    // Local: voters 1 and 3 are both at distance 1 from voter 0 and the
    // lower index wins; from voter 1, voter 3 (2) is closer than voter 2 (3).
    let p = profile(&[&[0, 1, 2], &[1, 0, 2], &[2, 0, 1], &[0, 2, 1]]);
    let l = kt_reorder(&p, KtMode::Local);
    assert_eq!(l, profile(&[&[0, 1, 2], &[1, 0, 2], &[0, 2, 1], &[2, 0, 1]]));
}

proptest! {
    #[test]
    fn mlp_vector_shape(seed in any::<u64>(), m_max in 1usize..6, n_max in 1usize..12) {
        let mut rng = rng_from_seed(seed);
        let p = sample_profile(&DistributionSpec::ic(), m_max, n_max, &mut rng).unwrap();
        let v = encode_mlp(&p, m_max, n_max).unwrap();
        prop_assert_eq!(v.len(), m_max * m_max * n_max);
        prop_assert_eq!(v.iter().sum::<f64>() as usize, p.m() * p.n());
        prop_assert!(v.iter().all(|&x| x == 0.0 || x == 1.0));
    }

    #[test]
    fn reorder_keeps_the_multiset(seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        let p = sample_profile(&DistributionSpec::ic(), 5, 12, &mut rng).unwrap();
        for mode in [KtMode::Global, KtMode::Local] {
            let q = kt_reorder(&p, mode);
            prop_assert_eq!(q.ranking(0), p.ranking(0));
            let mut a: Vec<Vec<u8>> = p.rankings().map(<[u8]>::to_vec).collect();
            let mut b: Vec<Vec<u8>> = q.rankings().map(<[u8]>::to_vec).collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }
    }
}
