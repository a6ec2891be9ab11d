//! Differentiable training objectives over a batch of profiles.
//!
//! Every loss is a mean over the batch; coordinates beyond a profile's `m`
//! carry zero weight.

use std::fmt;
use std::str::FromStr;

use deepvote_core::axioms::order_preserving_ranking;
use deepvote_core::sampling::random_permutation;
use deepvote_core::{margin_matrix, permute_voters, Profile, Rng, WinningSet};
use deepvote_nn::{Graph, KlTarget, Tensor, Var, KL_EPS};
use rand::Rng as _;

use crate::error::{ModelError, Result};
use crate::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Objective {
    NoWinner,
    Anonymity,
    Condorcet,
    Pareto,
    Independence,
    Bce,
}

impl Objective {
    pub const ALL: [Objective; 6] = [
        Objective::NoWinner,
        Objective::Anonymity,
        Objective::Condorcet,
        Objective::Pareto,
        Objective::Independence,
        Objective::Bce,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::NoWinner => "nw",
            Objective::Anonymity => "anonymity",
            Objective::Condorcet => "condorcet",
            Objective::Pareto => "pareto",
            Objective::Independence => "independence",
            Objective::Bce => "bce",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Objective::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| ModelError::UnknownName {
                kind: "objective",
                name: s.to_string(),
            })
    }
}

/// Weighted objectives, in the order given.
#[derive(Clone, Debug, PartialEq)]
pub struct ObjectiveSet {
    entries: Vec<(Objective, f64)>,
}

impl ObjectiveSet {
    pub fn new(objectives: &[Objective]) -> Result<Self> {
        let mut entries: Vec<(Objective, f64)> = Vec::new();
        for &o in objectives {
            if !entries.iter().any(|(e, _)| *e == o) {
                entries.push((o, 1.0));
            }
        }
        if entries.is_empty() {
            return Err(ModelError::InvalidSpec("objective set is empty".into()));
        }
        Ok(ObjectiveSet { entries })
    }

    /// Parses a comma list such as `nw,condorcet,pareto`.
    pub fn parse(list: &str) -> Result<Self> {
        let objs = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Objective>>>()?;
        Self::new(&objs)
    }

    pub fn set_weight(&mut self, o: Objective, w: f64) -> Result<()> {
        if !w.is_finite() || w < 0.0 {
            return Err(ModelError::InvalidSpec(format!("weight for {o} must be >= 0")));
        }
        match self.entries.iter_mut().find(|(e, _)| *e == o) {
            Some(e) => {
                e.1 = w;
                Ok(())
            }
            None => Err(ModelError::InvalidSpec(format!("{o} is not in the objective set"))),
        }
    }

    pub fn entries(&self) -> &[(Objective, f64)] {
        &self.entries
    }

    pub fn contains(&self, o: Objective) -> bool {
        self.entries.iter().any(|(e, _)| *e == o)
    }

    pub fn needs_labels(&self) -> bool {
        self.contains(Objective::Bce)
    }
}

impl fmt::Display for ObjectiveSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.entries.iter().map(|(o, _)| o.name()).collect();
        f.write_str(&names.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LossConfig {
    /// Voter permutations per profile for the anonymity loss.
    pub anonymity_samples: usize,
    /// Alternative pairs per profile for the independence loss.
    pub independence_pairs: usize,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            anonymity_samples: 10,
            independence_pairs: 5,
        }
    }
}

/// A batch together with its recorded logits `[batch, m_max]`.
pub struct Batch<'a> {
    pub profiles: &'a [Profile],
    pub logits: Var,
    m_max: usize,
}

impl<'a> Batch<'a> {
    pub fn forward(g: &mut Graph<'_>, model: &Model, profiles: &'a [Profile]) -> Result<Self> {
        if profiles.is_empty() {
            return Err(ModelError::InvalidSpec("empty batch".into()));
        }
        let logits = model.forward(g, profiles)?;
        Ok(Batch {
            profiles,
            logits,
            m_max: model.spec().m_max,
        })
    }

    fn len(&self) -> usize {
        self.profiles.len()
    }

    /// `[batch, m_max]` tensor filled by `f(row, alternative)` on live
    /// coordinates and 0 elsewhere.
    fn per_coord(&self, mut f: impl FnMut(usize, usize) -> f64) -> Tensor {
        let mut t = Tensor::zeros(&[self.len(), self.m_max]);
        for (b, p) in self.profiles.iter().enumerate() {
            for a in 0..p.m() {
                t.data_mut()[b * self.m_max + a] = f(b, a);
            }
        }
        t
    }

    fn live_mask(&self) -> Tensor {
        self.per_coord(|_, _| 1.0)
    }
}

fn zero(g: &mut Graph<'_>) -> Var {
    g.input(Tensor::scalar(0.0))
}

/// Binary cross-entropy against the winning sets, averaged over each
/// profile's `m` alternatives and then over the batch.
pub fn loss_bce(g: &mut Graph<'_>, batch: &Batch<'_>, targets: &[WinningSet]) -> Result<Var> {
    if targets.len() != batch.len() {
        return Err(ModelError::InvalidSpec("one target per profile required".into()));
    }
    let b = batch.len() as f64;
    let t = batch.per_coord(|r, a| targets[r].contains(a) as u8 as f64);
    let w = batch.per_coord(|r, _| 1.0 / (batch.profiles[r].m() as f64 * b));
    Ok(g.bce_with_logits(batch.logits, t, w)?)
}

/// Hinge `max(0.5 − max_a sig(ŷ_a), 0)` over live alternatives.
pub fn loss_no_winner(g: &mut Graph<'_>, batch: &Batch<'_>) -> Result<Var> {
    let sig = g.sigmoid(batch.logits);
    let mx = g.masked_max_rows(sig, &batch.live_mask())?;
    let neg = g.scale(mx, -1.0);
    let gap = g.add_scalar(neg, 0.5);
    let hinge = g.relu(gap);
    let w = Tensor::full(&[batch.len()], 1.0 / batch.len() as f64);
    Ok(g.weighted_sum(hinge, w)?)
}

/// Bernoulli KL from the (clamped) one-hot of the Condorcet winner to the
/// output, i.e. cross-entropy minus the target's entropy; 0 on profiles
/// without a Condorcet winner.
pub fn loss_condorcet(g: &mut Graph<'_>, batch: &Batch<'_>) -> Result<Var> {
    let winners: Vec<Option<usize>> = batch
        .profiles
        .iter()
        .map(|p| margin_matrix(p).condorcet_winner())
        .collect();
    if winners.iter().all(Option::is_none) {
        return Ok(zero(g));
    }
    let target = batch.per_coord(|r, a| if winners[r] == Some(a) { 1.0 - KL_EPS } else { KL_EPS });
    let b = batch.len() as f64;
    let w = batch.per_coord(|r, _| winners[r].map_or(0.0, |_| 1.0 / b));
    let entropy: f64 = target
        .data()
        .iter()
        .zip(w.data())
        .filter(|(_, &wi)| wi != 0.0)
        .map(|(&q, &wi)| -wi * (q * q.ln() + (1.0 - q) * (1.0 - q).ln()))
        .sum();
    let ce = g.bce_with_logits(batch.logits, target, w)?;
    Ok(g.add_scalar(ce, -entropy))
}

/// Sum over unanimously dominated pairs `(a, b)` of `sig(ŷ_b)`.
pub fn loss_pareto(g: &mut Graph<'_>, batch: &Batch<'_>) -> Result<Var> {
    let counts: Vec<Vec<f64>> = batch
        .profiles
        .iter()
        .map(|p| {
            let mm = margin_matrix(p);
            (0..p.m())
                .map(|y| (0..p.m()).filter(|&x| x != y && mm.unanimous(x, y)).count() as f64)
                .collect()
        })
        .collect();
    if counts.iter().flatten().all(|&c| c == 0.0) {
        return Ok(zero(g));
    }
    let b = batch.len() as f64;
    let w = batch.per_coord(|r, a| counts[r][a] / b);
    let sig = g.sigmoid(batch.logits);
    Ok(g.weighted_sum(sig, w)?)
}

/// Mean KL between the output on each profile and on `N` voter shuffles of it.
pub fn loss_anonymity(
    g: &mut Graph<'_>,
    model: &Model,
    batch: &Batch<'_>,
    cfg: &LossConfig,
    rng: &mut Rng,
) -> Result<Var> {
    let k = cfg.anonymity_samples;
    if k == 0 {
        return Ok(zero(g));
    }
    let mut shuffled = Vec::with_capacity(batch.len() * k);
    let mut rows = Vec::with_capacity(batch.len() * k);
    for (r, p) in batch.profiles.iter().enumerate() {
        for _ in 0..k {
            shuffled.push(permute_voters(p, &random_permutation(p.n(), rng))?);
            rows.push(r);
        }
    }
    let other = model.forward(g, &shuffled)?;
    let base = g.gather_rows(batch.logits, &rows)?;
    let scale = 1.0 / (batch.len() * k) as f64;
    let mut w = Tensor::zeros(&[rows.len(), batch.m_max]);
    for (i, &r) in rows.iter().enumerate() {
        for a in 0..batch.profiles[r].m() {
            w.data_mut()[i * batch.m_max + a] = scale;
        }
    }
    Ok(g.kl_bernoulli(base, KlTarget::Logits(other), w)?)
}

/// For `N` random pairs `(x, y)`, KL between `(ŷ_x, ŷ_y)` on the profile and
/// on a copy where every voter's ranking is reshuffled keeping `x` vs `y`.
/// Summed over pairs, averaged over the batch; 0 when `m < 2`.
pub fn loss_independence(
    g: &mut Graph<'_>,
    model: &Model,
    batch: &Batch<'_>,
    cfg: &LossConfig,
    rng: &mut Rng,
) -> Result<Var> {
    let mut perturbed = Vec::new();
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (r, p) in batch.profiles.iter().enumerate() {
        let m = p.m();
        if m < 2 {
            continue;
        }
        for _ in 0..cfg.independence_pairs {
            let x = rng.random_range(0..m);
            let mut y = rng.random_range(0..m - 1);
            if y >= x {
                y += 1;
            }
            let orders: Vec<Vec<usize>> = p
                .rankings()
                .map(|rk| {
                    order_preserving_ranking(rk, x, y, rng)
                        .into_iter()
                        .map(usize::from)
                        .collect()
                })
                .collect();
            perturbed.push(Profile::from_orders(&orders)?);
            rows.push(r);
            pairs.push((x, y));
        }
    }
    if perturbed.is_empty() {
        return Ok(zero(g));
    }
    let other = model.forward(g, &perturbed)?;
    let base = g.gather_rows(batch.logits, &rows)?;
    let scale = 1.0 / batch.len() as f64;
    let mut w = Tensor::zeros(&[rows.len(), batch.m_max]);
    for (i, &(x, y)) in pairs.iter().enumerate() {
        w.data_mut()[i * batch.m_max + x] = scale;
        w.data_mut()[i * batch.m_max + y] = scale;
    }
    Ok(g.kl_bernoulli(base, KlTarget::Logits(other), w)?)
}

/// The weighted sum of the set's losses plus each member's value.
pub struct CombinedLoss {
    pub total: Var,
    pub parts: Vec<(Objective, f64)>,
}

/// Weighted sum of the objectives' losses on one batch. `targets` is only
/// read when the set contains [`Objective::Bce`].
pub fn combined_loss(
    g: &mut Graph<'_>,
    model: &Model,
    profiles: &[Profile],
    targets: Option<&[WinningSet]>,
    objectives: &ObjectiveSet,
    cfg: &LossConfig,
    rng: &mut Rng,
) -> Result<CombinedLoss> {
    let batch = Batch::forward(g, model, profiles)?;
    let mut total: Option<Var> = None;
    let mut parts = Vec::with_capacity(objectives.entries().len());
    for &(o, w) in objectives.entries() {
        let v = match o {
            Objective::NoWinner => loss_no_winner(g, &batch)?,
            Objective::Anonymity => loss_anonymity(g, model, &batch, cfg, rng)?,
            Objective::Condorcet => loss_condorcet(g, &batch)?,
            Objective::Pareto => loss_pareto(g, &batch)?,
            Objective::Independence => loss_independence(g, model, &batch, cfg, rng)?,
            Objective::Bce => {
                let t = targets.ok_or_else(|| ModelError::InvalidSpec("bce needs labels".into()))?;
                loss_bce(g, &batch, t)?
            }
        };
        parts.push((o, g.value(v).item()));
        let scaled = g.scale(v, w);
        total = Some(match total {
            Some(t) => g.add(t, scaled)?,
            None => scaled,
        });
    }
    Ok(CombinedLoss {
        total: total.expect("objective set is nonempty"),
        parts,
    })
}
