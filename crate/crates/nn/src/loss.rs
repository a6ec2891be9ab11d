//! Scalar losses on top of the graph ops.

use crate::error::{shape_err, NnError, Result};
use crate::graph::{Graph, KlTarget, Var};
use crate::tensor::Tensor;

/// Mean binary cross-entropy over the coordinates where `mask` is 1.
pub fn bce_multilabel(g: &mut Graph<'_>, logits: Var, targets: &Tensor, mask: &Tensor) -> Result<Var> {
    if mask.shape() != g.value(logits).shape() {
        return shape_err("bce_multilabel", format!("mask {:?}", mask.shape()));
    }
    let total: f64 = mask.data().iter().sum();
    if total == 0.0 {
        return Err(NnError::EmptyMask);
    }
    let weights = mask.map(|m| m / total);
    g.bce_with_logits(logits, targets.clone(), weights)
}

/// Summed per-coordinate Bernoulli KL between `sigmoid(p_logits)` and `q`.
pub fn kl_bernoulli(g: &mut Graph<'_>, p_logits: Var, q: KlTarget) -> Result<Var> {
    let w = Tensor::full(g.value(p_logits).shape(), 1.0);
    g.kl_bernoulli(p_logits, q, w)
}
