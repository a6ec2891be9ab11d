//! The five axioms as per-profile checks, and Monte-Carlo satisfaction degrees.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::profile::{
    margin_matrix, permute_alternatives, permute_voters, Profile, WinningSet,
};
use crate::rules::{apply_rule, RuleId};
use crate::sampling::{derive_seed, random_permutation, rng_from_seed, sample_profile, DistributionSpec, Rng};

/// Anything that maps profiles to winning sets: a built-in rule or a trained
/// model with a decoder.
///
/// Implementations must be usable from several threads at once.
pub trait VotingFunction: Sync {
    fn name(&self) -> String;

    /// May be empty for model-backed functions.
    fn winners(&self, profile: &Profile) -> WinningSet;

    /// Evaluates many profiles; models override this to batch the forward pass.
    fn winners_batch(&self, profiles: &[Profile]) -> Vec<WinningSet> {
        profiles.iter().map(|p| self.winners(p)).collect()
    }
}

impl VotingFunction for RuleId {
    fn name(&self) -> String {
        RuleId::name(*self).to_string()
    }

    fn winners(&self, profile: &Profile) -> WinningSet {
        apply_rule(*self, profile)
    }
}

impl<T: VotingFunction + ?Sized> VotingFunction for &T {
    fn name(&self) -> String {
        (**self).name()
    }

    fn winners(&self, profile: &Profile) -> WinningSet {
        (**self).winners(profile)
    }

    fn winners_batch(&self, profiles: &[Profile]) -> Vec<WinningSet> {
        (**self).winners_batch(profiles)
    }
}

/// A named closure, handy for ad-hoc rules.
pub struct FnVoting<F> {
    pub name: String,
    pub f: F,
}

impl<F: Fn(&Profile) -> WinningSet + Sync> VotingFunction for FnVoting<F> {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn winners(&self, profile: &Profile) -> WinningSet {
        (self.f)(profile)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AxiomId {
    Anonymity,
    Neutrality,
    Condorcet,
    Pareto,
    Independence,
}

impl AxiomId {
    pub const ALL: [AxiomId; 5] = [
        AxiomId::Anonymity,
        AxiomId::Neutrality,
        AxiomId::Condorcet,
        AxiomId::Pareto,
        AxiomId::Independence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AxiomId::Anonymity => "anonymity",
            AxiomId::Neutrality => "neutrality",
            AxiomId::Condorcet => "condorcet",
            AxiomId::Pareto => "pareto",
            AxiomId::Independence => "independence",
        }
    }
}

impl fmt::Display for AxiomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AxiomId {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        AxiomId::ALL
            .into_iter()
            .find(|a| a.name() == s.trim())
            .ok_or_else(|| CoreError::UnknownName {
                kind: "axiom",
                name: s.to_string(),
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Violated = -1,
    NotApplicable = 0,
    Satisfied = 1,
}

impl Verdict {
    pub fn value(self) -> i8 {
        self as i8
    }

    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Satisfied
        } else {
            Verdict::Violated
        }
    }
}

/// Sampling sizes of the per-profile checks.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckParams {
    /// Voter permutations per anonymity check.
    pub anonymity_samples: usize,
    /// Alternative permutations per neutrality check.
    pub neutrality_samples: usize,
    /// Order-preserving rankings sampled per voter in the independence check.
    pub independence_variants: usize,
    /// Perturbed profiles built per (winner, loser) pair.
    pub independence_profiles: usize,
}

impl Default for CheckParams {
    fn default() -> Self {
        CheckParams {
            anonymity_samples: 50,
            neutrality_samples: 50,
            independence_variants: 4,
            independence_profiles: 256,
        }
    }
}

/// +1 iff the winners survive `k` random voter permutations unchanged.
/// Outcomes are compared as sets, so a consistently empty output passes.
pub fn check_anonymity(
    f: &dyn VotingFunction,
    profile: &Profile,
    k: usize,
    rng: &mut Rng,
) -> Verdict {
    let base = f.winners(profile);
    check_anonymity_with_base(f, profile, base, k, rng)
}

fn check_anonymity_with_base(
    f: &dyn VotingFunction,
    profile: &Profile,
    base: WinningSet,
    k: usize,
    rng: &mut Rng,
) -> Verdict {
    let variants: Vec<Profile> = (0..k)
        .map(|_| {
            let pi = random_permutation(profile.n(), rng);
            permute_voters(profile, &pi).expect("valid permutation")
        })
        .collect();
    Verdict::from_bool(f.winners_batch(&variants).into_iter().all(|w| w == base))
}

/// +1 iff renaming the alternatives by each of `k` random permutations renames
/// the winners accordingly.
pub fn check_neutrality(
    f: &dyn VotingFunction,
    profile: &Profile,
    k: usize,
    rng: &mut Rng,
) -> Verdict {
    let base = f.winners(profile);
    check_neutrality_with_base(f, profile, base, k, rng)
}

fn check_neutrality_with_base(
    f: &dyn VotingFunction,
    profile: &Profile,
    base: WinningSet,
    k: usize,
    rng: &mut Rng,
) -> Verdict {
    let sigmas: Vec<Vec<usize>> = (0..k).map(|_| random_permutation(profile.m(), rng)).collect();
    let variants: Vec<Profile> = sigmas
        .iter()
        .map(|s| permute_alternatives(profile, s).expect("valid permutation"))
        .collect();
    let outs = f.winners_batch(&variants);
    Verdict::from_bool(
        sigmas
            .iter()
            .zip(outs)
            .all(|(s, w)| w == base.permuted(s)),
    )
}

/// Not applicable without a Condorcet winner; otherwise +1 iff it wins alone.
pub fn check_condorcet(f: &dyn VotingFunction, profile: &Profile) -> Verdict {
    match margin_matrix(profile).condorcet_winner() {
        None => Verdict::NotApplicable,
        Some(x) => Verdict::from_bool(f.winners(profile) == WinningSet::singleton(x)),
    }
}

/// Alternatives ranked below some other alternative by every voter.
pub fn pareto_dominated(profile: &Profile) -> WinningSet {
    let mm = margin_matrix(profile);
    let m = mm.m();
    (0..m)
        .filter(|&y| (0..m).any(|x| mm.unanimous(x, y)))
        .collect()
}

/// Not applicable without a unanimously dominated alternative; otherwise +1
/// iff no dominated alternative wins.
pub fn check_pareto(f: &dyn VotingFunction, profile: &Profile) -> Verdict {
    let dominated = pareto_dominated(profile);
    if dominated.is_empty() {
        return Verdict::NotApplicable;
    }
    Verdict::from_bool(f.winners(profile).is_disjoint(dominated))
}

/// A uniformly random ranking of `0..ranking.len()` that orders `x` and `y`
/// as `ranking` does.
pub fn order_preserving_ranking(ranking: &[u8], x: usize, y: usize, rng: &mut Rng) -> Vec<u8> {
    let x_first = ranking.iter().position(|&a| a as usize == x)
        < ranking.iter().position(|&a| a as usize == y);
    let mut r: Vec<u8> = (0..ranking.len() as u8).collect();
    loop {
        r.shuffle(rng);
        let px = r.iter().position(|&a| a as usize == x);
        let py = r.iter().position(|&a| a as usize == y);
        if (px < py) == x_first {
            return r;
        }
    }
}

/// Not applicable when every alternative wins. Otherwise, for each winner `x`
/// and loser `y`, samples per-voter rankings that keep each voter's order of
/// `x` and `y`, combines them into perturbed profiles, and fails if `y` wins
/// any of them.
pub fn check_independence(f: &dyn VotingFunction, profile: &Profile, rng: &mut Rng) -> Verdict {
    check_independence_with(f, profile, &CheckParams::default(), rng)
}

pub fn check_independence_with(
    f: &dyn VotingFunction,
    profile: &Profile,
    params: &CheckParams,
    rng: &mut Rng,
) -> Verdict {
    let base = f.winners(profile);
    check_independence_with_base(f, profile, base, params, rng)
}

fn check_independence_with_base(
    f: &dyn VotingFunction,
    profile: &Profile,
    base: WinningSet,
    params: &CheckParams,
    rng: &mut Rng,
) -> Verdict {
    let (m, n) = (profile.m(), profile.n());
    let all = WinningSet::full(m);
    if base == all {
        return Verdict::NotApplicable;
    }
    if base.is_empty() {
        return Verdict::Violated;
    }
    let losers = WinningSet::from_bits(all.bits() & !base.bits());
    for x in base.iter() {
        for y in losers.iter() {
            let variants: Vec<Vec<Vec<u8>>> = profile
                .rankings()
                .map(|r| {
                    (0..params.independence_variants)
                        .map(|_| order_preserving_ranking(r, x, y, rng))
                        .collect()
                })
                .collect();
            let perturbed: Vec<Profile> = (0..params.independence_profiles)
                .map(|_| {
                    let orders: Vec<Vec<usize>> = (0..n)
                        .map(|s| {
                            let pick = rng.random_range(0..params.independence_variants);
                            variants[s][pick].iter().map(|&a| a as usize).collect()
                        })
                        .collect();
                    Profile::from_orders(&orders).expect("valid rankings")
                })
                .collect();
            if f.winners_batch(&perturbed).into_iter().any(|w| w.contains(y)) {
                return Verdict::Violated;
            }
        }
    }
    Verdict::Satisfied
}

/// Outcome of one axiom check, with whether `f` produced no winner at all.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CheckOutcome {
    pub verdict: Verdict,
    pub empty_output: bool,
}

/// Runs the check for `axiom`, calling `f` on the unperturbed profile once.
pub fn evaluate_axiom(
    f: &dyn VotingFunction,
    axiom: AxiomId,
    profile: &Profile,
    params: &CheckParams,
    rng: &mut Rng,
) -> CheckOutcome {
    // Applicability of Condorcet and Pareto depends only on the profile, so
    // the function is not consulted when they do not apply.
    match axiom {
        AxiomId::Condorcet => {
            let Some(x) = margin_matrix(profile).condorcet_winner() else {
                return CheckOutcome {
                    verdict: Verdict::NotApplicable,
                    empty_output: false,
                };
            };
            let w = f.winners(profile);
            CheckOutcome {
                verdict: Verdict::from_bool(w == WinningSet::singleton(x)),
                empty_output: w.is_empty(),
            }
        }
        AxiomId::Pareto => {
            let dominated = pareto_dominated(profile);
            if dominated.is_empty() {
                return CheckOutcome {
                    verdict: Verdict::NotApplicable,
                    empty_output: false,
                };
            }
            let w = f.winners(profile);
            CheckOutcome {
                verdict: Verdict::from_bool(w.is_disjoint(dominated)),
                empty_output: w.is_empty(),
            }
        }
        AxiomId::Anonymity => {
            let w = f.winners(profile);
            CheckOutcome {
                verdict: check_anonymity_with_base(f, profile, w, params.anonymity_samples, rng),
                empty_output: w.is_empty(),
            }
        }
        AxiomId::Neutrality => {
            let w = f.winners(profile);
            CheckOutcome {
                verdict: check_neutrality_with_base(f, profile, w, params.neutrality_samples, rng),
                empty_output: w.is_empty(),
            }
        }
        AxiomId::Independence => {
            let w = f.winners(profile);
            CheckOutcome {
                verdict: check_independence_with_base(f, profile, w, params, rng),
                empty_output: w.is_empty(),
            }
        }
    }
}

/// Settings for [`satisfaction_degree`].
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeParams {
    pub n_profiles: usize,
    pub m_max: usize,
    pub n_max: usize,
    /// Give up after this many sampled profiles.
    pub max_attempts: usize,
    pub checks: CheckParams,
}

impl DegreeParams {
    pub fn new(n_profiles: usize, m_max: usize, n_max: usize) -> Self {
        DegreeParams {
            n_profiles,
            m_max,
            n_max,
            max_attempts: n_profiles.saturating_mul(100).max(1000),
            checks: CheckParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DegreeReport {
    pub axiom: AxiomId,
    pub n_applicable: usize,
    pub n_satisfied: usize,
    /// Applicable profiles on which `f` returned no winner.
    pub n_empty: usize,
    /// Profiles sampled, applicable or not.
    pub attempts: usize,
}

impl DegreeReport {
    pub fn satisfied_pct(&self) -> f64 {
        100.0 * self.n_satisfied as f64 / self.n_applicable.max(1) as f64
    }

    pub fn empty_pct(&self) -> f64 {
        100.0 * self.n_empty as f64 / self.n_applicable.max(1) as f64
    }
}

/// Percentage of sampled applicable profiles on which `f` satisfies `axiom`.
///
/// Profiles are rejection-sampled until `n_profiles` applicable ones are
/// found. Attempt `i` uses its own generator seeded from `(seed, i)`, so the
/// result does not depend on how the work is spread over threads.
pub fn satisfaction_degree(
    f: &dyn VotingFunction,
    axiom: AxiomId,
    spec: &DistributionSpec,
    params: &DegreeParams,
    seed: u64,
) -> Result<DegreeReport> {
    if params.n_profiles == 0 {
        return Err(CoreError::InvalidParameter("n_profiles must be positive".into()));
    }
    spec.validate()?;
    let axiom_seed = derive_seed(seed, axiom as u64);
    let mut report = DegreeReport {
        axiom,
        n_applicable: 0,
        n_satisfied: 0,
        n_empty: 0,
        attempts: 0,
    };
    let chunk = rayon::current_num_threads().max(1) * 16;
    while report.n_applicable < params.n_profiles {
        if report.attempts >= params.max_attempts {
            return Err(CoreError::TooFewApplicable {
                wanted: params.n_profiles,
                found: report.n_applicable,
                attempts: report.attempts,
            });
        }
        let start = report.attempts;
        let end = (start + chunk).min(params.max_attempts);
        let outcomes: Vec<Result<CheckOutcome>> = (start..end)
            .into_par_iter()
            .map(|i| {
                let mut rng = rng_from_seed(derive_seed(axiom_seed, i as u64));
                let p = sample_profile(spec, params.m_max, params.n_max, &mut rng)?;
                Ok(evaluate_axiom(f, axiom, &p, &params.checks, &mut rng))
            })
            .collect();
        for o in outcomes {
            let o = o?;
            report.attempts += 1;
            if o.verdict != Verdict::NotApplicable {
                report.n_applicable += 1;
                report.n_satisfied += (o.verdict == Verdict::Satisfied) as usize;
                report.n_empty += o.empty_output as usize;
                if report.n_applicable == params.n_profiles {
                    break;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dictator() -> FnVoting<impl Fn(&Profile) -> WinningSet + Sync> {
        FnVoting {
            name: "dictator".into(),
            f: |p: &Profile| WinningSet::singleton(p.ranking(0)[0] as usize),
        }
    }

    #[test]
    fn dictatorship_is_not_anonymous() {
        let p = Profile::from_orders(&[vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]]).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(check_anonymity(&dictator(), &p, 50, &mut rng), Verdict::Violated);
        assert_eq!(check_anonymity(&RuleId::Borda, &p, 50, &mut rng), Verdict::Satisfied);
    }

    #[test]
    fn single_voter_is_anonymous() {
        let p = Profile::from_orders(&[vec![0, 1, 2]]).unwrap();
        let mut rng = rng_from_seed(1);
        assert_eq!(check_anonymity(&dictator(), &p, 50, &mut rng), Verdict::Satisfied);
    }

    #[test]
    fn constant_rule_is_not_neutral() {
        let always0 = FnVoting {
            name: "zero".into(),
            f: |_: &Profile| WinningSet::singleton(0),
        };
        let p = Profile::from_orders(&[vec![0, 1, 2], vec![1, 2, 0]]).unwrap();
        let mut rng = rng_from_seed(2);
        assert_eq!(check_neutrality(&always0, &p, 50, &mut rng), Verdict::Violated);
        assert_eq!(check_neutrality(&RuleId::Copeland, &p, 50, &mut rng), Verdict::Satisfied);
        let one = Profile::from_orders(&[vec![0]]).unwrap();
        assert_eq!(check_neutrality(&always0, &one, 50, &mut rng), Verdict::Satisfied);
    }

    #[test]
    fn condorcet_examples() {
        let p = Profile::from_orders(&[vec![0, 1, 2], vec![1, 0, 2], vec![1, 2, 0]]).unwrap();
        assert_eq!(check_condorcet(&RuleId::Plurality, &p), Verdict::Satisfied);
        let fig2 = Profile::from_letter_rows(
            "c d d c a d
             a b b b b a
             b c a d c b
             d a c a d c",
        )
        .unwrap();
        assert_eq!(check_condorcet(&RuleId::Plurality, &fig2), Verdict::NotApplicable);
    }

    #[test]
    fn pareto_examples() {
        let unanimous = Profile::from_orders(&[vec![0, 1], vec![0, 1]]).unwrap();
        let everyone = FnVoting {
            name: "all".into(),
            f: |p: &Profile| WinningSet::full(p.m()),
        };
        assert_eq!(check_pareto(&everyone, &unanimous), Verdict::Violated);
        assert_eq!(check_pareto(&RuleId::Borda, &unanimous), Verdict::Satisfied);
        let one = Profile::from_orders(&[vec![0]]).unwrap();
        assert_eq!(check_pareto(&RuleId::Borda, &one), Verdict::NotApplicable);
    }

    #[test]
    fn independence_with_two_alternatives() {
        let mut rng = rng_from_seed(5);
        let p = Profile::from_orders(&[vec![0, 1], vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(check_independence(&RuleId::Copeland, &p, &mut rng), Verdict::Satisfied);
        let tie = Profile::from_orders(&[vec![0, 1], vec![1, 0]]).unwrap();
        assert_eq!(check_independence(&RuleId::Copeland, &tie, &mut rng), Verdict::NotApplicable);
    }

    #[test]
    fn order_preserving_keeps_pair() {
        let mut rng = rng_from_seed(9);
        for _ in 0..200 {
            let r = order_preserving_ranking(&[3, 1, 0, 2, 4], 2, 3, &mut rng);
            let p3 = r.iter().position(|&a| a == 3).unwrap();
            let p2 = r.iter().position(|&a| a == 2).unwrap();
            assert!(p3 < p2);
        }
    }

    #[test]
    fn names_round_trip() {
        for a in AxiomId::ALL {
            assert_eq!(a.name().parse::<AxiomId>().unwrap(), a);
        }
    }
}
