use deepvote_core::{DistributionSpec, Profile, RuleId, VotingFunction, WinningSet};
use deepvote_harness::similarity::{
    find_disagreeing_profile, outputs, sample_profiles, similarity_table, DisagreementMode,
};

fn profiles() -> Vec<Profile> {
    sample_profiles(&DistributionSpec::ic(), 600, 5, 12, 21).unwrap()
}

/// Returns one fixed set on every profile.
struct Constant(WinningSet);

impl VotingFunction for Constant {
    fn name(&self) -> String {
        format!("constant {}", self.0.letters())
    }

    fn winners(&self, _: &Profile) -> WinningSet {
        self.0
    }
}

#[test]
fn table_properties() {
    let ps = profiles();
    let fs: Vec<&dyn VotingFunction> = RuleId::ALL.iter().map(|r| r as &dyn VotingFunction).collect();
    let t = similarity_table(&fs, &ps);
    assert_eq!(t.labels.len(), 16);
    for i in 0..16 {
        assert_eq!(t.identity[i][i], 100.0);
        assert_eq!(t.subset[i][i], 100.0);
        for j in 0..16 {
            assert_eq!(t.identity[i][j], t.identity[j][i]);
            assert!(t.subset[i][j] >= t.identity[i][j]);
        }
    }
    // Every Condorcet extension agrees with the others whenever a Condorcet
    // winner exists, so their agreement is at least that share.
    let cw = ps
        .iter()
        .filter(|p| deepvote_core::profile::condorcet_winner(p).is_some())
        .count() as f64
        / ps.len() as f64
        * 100.0;
    assert!(t.identity_of("copeland", "blacks").unwrap() >= cw - 1e-9);
    assert_eq!(t.identity_of("borda", "nope"), None);
}

#[test]
fn table_matches_direct_counting() {
    let ps = profiles();
    let a = RuleId::Plurality;
    let b = RuleId::Borda;
    let t = similarity_table(&[&a, &b], &ps);
    let (oa, ob) = (outputs(&a, &ps), outputs(&b, &ps));
    let same = oa.iter().zip(&ob).filter(|(x, y)| x == y).count() as f64;
    let sub = oa.iter().zip(&ob).filter(|(x, y)| x.is_subset(**y)).count() as f64;
    assert_eq!(t.identity[0][1], 100.0 * same / 600.0);
    assert_eq!(t.subset[0][1], 100.0 * sub / 600.0);
    for (p, w) in ps.iter().zip(&oa) {
        assert_eq!(a.winners(p), *w);
    }
}

#[test]
fn csv_layout() {
    let ps = profiles();
    let t = similarity_table(&[&RuleId::Borda, &RuleId::Copeland], &ps);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.csv");
    t.write_csv(&path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "row,column,identity_pct,subset_pct");
    assert_eq!(lines[1], "borda,borda,100.0000,100.0000");
    assert!(lines[2].starts_with("borda,copeland,"));
}

#[test]
fn a_rule_never_disagrees_with_itself() {
    let ps = profiles();
    for mode in [DisagreementMode::Weak, DisagreementMode::Strong] {
        assert!(find_disagreeing_profile(&RuleId::Borda, &[&RuleId::Borda], &ps, mode).is_none());
        assert!(find_disagreeing_profile(&RuleId::Borda, &[&RuleId::Plurality, &RuleId::Borda], &ps, mode).is_none());
    }
}

#[test]
fn empty_model_outputs_are_skipped() {
    let ps = profiles();
    let nobody = Constant(WinningSet::empty());
    assert!(find_disagreeing_profile(&nobody, &[&RuleId::Borda], &ps, DisagreementMode::Strong).is_none());
}

#[test]
fn picks_the_first_profile_with_fewest_voters() {
    let ps = profiles();
    let rules: [&dyn VotingFunction; 2] = [&RuleId::Plurality, &RuleId::Borda];
    for mode in [DisagreementMode::Weak, DisagreementMode::Strong] {
        let model = Constant(WinningSet::singleton(0));
        let d = find_disagreeing_profile(&model, &rules, &ps, mode).unwrap();
        let qualifies = |p: &Profile| {
            rules.iter().all(|r| {
                let w = r.winners(p);
                match mode {
                    DisagreementMode::Weak => w != WinningSet::singleton(0),
                    DisagreementMode::Strong => !w.contains(0),
                }
            })
        };
        let first = ps
            .iter()
            .filter(|p| qualifies(p))
            .min_by_key(|p| p.n())
            .unwrap();
        assert_eq!(&d.profile, first);
        assert_eq!(d.model.1, WinningSet::singleton(0));
        assert_eq!(d.rules[0], ("plurality".to_string(), RuleId::Plurality.winners(first)));
    }
}

#[test]
fn disagreement_display_groups_equal_sets() {
    let p = Profile::from_letter_rows("a b\nb a\nc c").unwrap();
    let d = deepvote_harness::similarity::Disagreement {
        profile: p.clone(),
        model: ("mlp".into(), WinningSet::singleton(2)),
        rules: vec![
            ("plurality".into(), [0, 1].into_iter().collect()),
            ("borda".into(), [0, 1].into_iter().collect()),
            ("blacks".into(), [0, 1].into_iter().collect()),
        ],
    };
    let text = d.to_string();
    assert!(text.starts_with(&p.to_letter_table()));
    assert!(text.ends_with("{c} mlp\n{a,b} plurality, borda, blacks\n"), "{text}");
}

#[test]
fn disagreement_modes_parse() {
    assert_eq!("weak".parse::<DisagreementMode>().unwrap(), DisagreementMode::Weak);
    assert_eq!("strong".parse::<DisagreementMode>().unwrap().to_string(), "strong");
    assert!("mild".parse::<DisagreementMode>().is_err());
}
