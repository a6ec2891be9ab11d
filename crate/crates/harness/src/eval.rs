//! Accuracy against labels and axiom satisfaction degrees.

use deepvote_core::axioms::{satisfaction_degree, DegreeParams};
use deepvote_core::{AxiomId, DistributionSpec, VotingFunction};

use crate::config::EvalConfig;
use crate::dataset::Pair;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct AxiomScore {
    pub axiom: AxiomId,
    pub n_applicable: usize,
    pub satisfied_pct: f64,
    pub empty_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Accuracy {
    /// Output equals the label.
    pub identity_pct: f64,
    /// Output is a subset of the label (an empty output counts).
    pub subset_pct: f64,
    /// Output is empty.
    pub empty_pct: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub distribution: String,
    pub accuracy: Accuracy,
    pub axioms: Vec<AxiomScore>,
}

pub fn accuracy(f: &dyn VotingFunction, test: &[Pair]) -> Accuracy {
    let profiles: Vec<_> = test.iter().map(|(p, _)| p.clone()).collect();
    let out = f.winners_batch(&profiles);
    let (mut same, mut sub, mut empty) = (0usize, 0usize, 0usize);
    for (w, (_, s)) in out.iter().zip(test) {
        same += (w == s) as usize;
        sub += w.is_subset(*s) as usize;
        empty += w.is_empty() as usize;
    }
    let pct = |c: usize| 100.0 * c as f64 / test.len().max(1) as f64;
    Accuracy {
        identity_pct: pct(same),
        subset_pct: pct(sub),
        empty_pct: pct(empty),
    }
}

/// Degrees of the configured axioms. The same seed yields the same sampled
/// profiles for every function, so rules and models are compared on equal data.
pub fn axiom_scores(
    f: &dyn VotingFunction,
    dist: &DistributionSpec,
    cfg: &EvalConfig,
    m_max: usize,
    n_max: usize,
    seed: u64,
) -> Result<Vec<AxiomScore>> {
    cfg.axioms
        .iter()
        .map(|&axiom| {
            let n = match axiom {
                AxiomId::Independence => cfg.independence_axiom_profiles,
                _ => cfg.axiom_profiles,
            };
            let mut params = DegreeParams::new(n, m_max, n_max);
            params.checks = cfg.checks.clone();
            let r = satisfaction_degree(f, axiom, dist, &params, seed)?;
            Ok(AxiomScore {
                axiom,
                n_applicable: r.n_applicable,
                satisfied_pct: r.satisfied_pct(),
                empty_pct: r.empty_pct(),
            })
        })
        .collect()
}

pub fn evaluate(
    f: &dyn VotingFunction,
    test: &[Pair],
    dist: &DistributionSpec,
    cfg: &EvalConfig,
    m_max: usize,
    n_max: usize,
    seed: u64,
) -> Result<EvalReport> {
    Ok(EvalReport {
        label: f.name(),
        distribution: dist.to_string(),
        accuracy: accuracy(f, test),
        axioms: axiom_scores(f, dist, cfg, m_max, n_max, seed)?,
    })
}

impl EvalReport {
    /// Named values in a fixed order: accuracies, empty rate, then axioms.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut cols = vec![
            ("identity_accuracy".to_string(), self.accuracy.identity_pct),
            ("subset_accuracy".to_string(), self.accuracy.subset_pct),
            ("empty_output".to_string(), self.accuracy.empty_pct),
        ];
        cols.extend(self.axioms.iter().map(|a| (a.axiom.to_string(), a.satisfied_pct)));
        cols
    }

    /// `teacher − self` for every column.
    pub fn relative_to(&self, teacher: &EvalReport) -> Vec<(String, f64)> {
        self.columns()
            .into_iter()
            .zip(teacher.columns())
            .map(|((name, mine), (_, theirs))| (name, theirs - mine))
            .collect()
    }

    pub fn axiom(&self, axiom: AxiomId) -> Option<&AxiomScore> {
        self.axioms.iter().find(|a| a.axiom == axiom)
    }
}
