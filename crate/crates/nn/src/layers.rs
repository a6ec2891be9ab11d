//! Sequential networks built from a handful of layer kinds.

use rand::Rng;

use crate::error::{shape_err, NnError, Result};
use crate::graph::{Graph, ParamId, ParamStore, Var};
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Linear {
        inp: usize,
        out: usize,
        weight: ParamId,
        bias: ParamId,
    },
    Conv2d {
        in_ch: usize,
        out_ch: usize,
        kh: usize,
        kw: usize,
        weight: ParamId,
        bias: ParamId,
    },
    Relu,
    Flatten,
    /// Mean of the embeddings of each row's tokens, skipping `pad`.
    EmbeddingBag {
        vocab: usize,
        dim: usize,
        pad: Option<usize>,
        table: ParamId,
    },
    LayerNorm {
        dim: usize,
        gamma: ParamId,
        beta: ParamId,
    },
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Linear { .. } => "linear",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Flatten => "flatten",
            LayerSpec::EmbeddingBag { .. } => "embedding_bag",
            LayerSpec::LayerNorm { .. } => "layer_norm",
        }
    }
}

/// Network input: a dense batch, or one token list per batch row.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Dense(Tensor),
    Tokens(Vec<Vec<usize>>),
}

impl Input {
    pub fn batch_size(&self) -> usize {
        match self {
            Input::Dense(t) => t.shape().first().copied().unwrap_or(0),
            Input::Tokens(rows) => rows.len(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    store: ParamStore,
}

fn uniform(shape: &[usize], bound: f64, rng: &mut impl Rng) -> Tensor {
    let mut t = Tensor::zeros(shape);
    if bound > 0.0 {
        for v in t.data_mut() {
            *v = rng.random_range(-bound..bound);
        }
    }
    t
}

impl Network {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn parameter_count(&self) -> usize {
        self.store.count()
    }

    fn prefix(&self) -> String {
        format!("layers.{}", self.layers.len())
    }

    /// Weights and biases uniform in `±1/√fan_in`.
    pub fn push_linear(&mut self, inp: usize, out: usize, rng: &mut impl Rng) -> &mut Self {
        let bound = 1.0 / (inp.max(1) as f64).sqrt();
        let p = self.prefix();
        let weight = self.store.add(format!("{p}.weight"), uniform(&[out, inp], bound, rng));
        let bias = self.store.add(format!("{p}.bias"), uniform(&[out], bound, rng));
        self.layers.push(LayerSpec::Linear {
            inp,
            out,
            weight,
            bias,
        });
        self
    }

    pub fn push_conv2d(
        &mut self,
        in_ch: usize,
        out_ch: usize,
        kh: usize,
        kw: usize,
        rng: &mut impl Rng,
    ) -> &mut Self {
        let bound = 1.0 / ((in_ch * kh * kw).max(1) as f64).sqrt();
        let p = self.prefix();
        let weight = self.store.add(
            format!("{p}.weight"),
            uniform(&[out_ch, in_ch, kh, kw], bound, rng),
        );
        let bias = self.store.add(format!("{p}.bias"), uniform(&[out_ch], bound, rng));
        self.layers.push(LayerSpec::Conv2d {
            in_ch,
            out_ch,
            kh,
            kw,
            weight,
            bias,
        });
        self
    }

    pub fn push_relu(&mut self) -> &mut Self {
        self.layers.push(LayerSpec::Relu);
        self
    }

    pub fn push_flatten(&mut self) -> &mut Self {
        self.layers.push(LayerSpec::Flatten);
        self
    }

    /// Embedding table uniform in `±0.5/dim`; the `pad` row starts at zero.
    pub fn push_embedding_bag(
        &mut self,
        vocab: usize,
        dim: usize,
        pad: Option<usize>,
        rng: &mut impl Rng,
    ) -> &mut Self {
        let mut t = uniform(&[vocab, dim], 0.5 / dim.max(1) as f64, rng);
        if let Some(pad) = pad.filter(|&p| p < vocab) {
            t.data_mut()[pad * dim..(pad + 1) * dim].fill(0.0);
        }
        let p = self.prefix();
        let table = self.store.add(format!("{p}.table"), t);
        self.layers.push(LayerSpec::EmbeddingBag {
            vocab,
            dim,
            pad,
            table,
        });
        self
    }

    pub fn push_layer_norm(&mut self, dim: usize) -> &mut Self {
        let p = self.prefix();
        let gamma = self.store.add(format!("{p}.gamma"), Tensor::full(&[dim], 1.0));
        let beta = self.store.add(format!("{p}.beta"), Tensor::zeros(&[dim]));
        self.layers.push(LayerSpec::LayerNorm { dim, gamma, beta });
        self
    }

    /// Records the forward pass on `g`, which must have been created over
    /// this network's store.
    pub fn forward(&self, g: &mut Graph<'_>, input: &Input) -> Result<Var> {
        let mut cur: Option<Var> = match input {
            Input::Dense(t) => Some(g.input(t.clone())),
            Input::Tokens(_) => None,
        };
        for (i, layer) in self.layers.iter().enumerate() {
            let x = match (cur, layer) {
                (None, LayerSpec::EmbeddingBag { pad, table, .. }) => {
                    let Input::Tokens(rows) = input else {
                        unreachable!()
                    };
                    let bags: Vec<Vec<usize>> = rows
                        .iter()
                        .map(|r| r.iter().copied().filter(|&t| Some(t) != *pad).collect())
                        .collect();
                    let t = g.param(*table);
                    cur = Some(g.embedding_mean(t, &bags)?);
                    continue;
                }
                (None, _) => {
                    return shape_err("forward", format!("layer {i} cannot take token input"))
                }
                (Some(_), LayerSpec::EmbeddingBag { .. }) => {
                    return shape_err("forward", format!("layer {i} needs token input"))
                }
                (Some(x), _) => x,
            };
            cur = Some(match layer {
                LayerSpec::Linear { weight, bias, .. } => {
                    let (w, b) = (g.param(*weight), g.param(*bias));
                    g.linear(x, w, Some(b))?
                }
                LayerSpec::Conv2d { weight, bias, .. } => {
                    let (w, b) = (g.param(*weight), g.param(*bias));
                    g.conv2d(x, w, Some(b))?
                }
                LayerSpec::Relu => g.relu(x),
                LayerSpec::Flatten => g.flatten(x)?,
                LayerSpec::LayerNorm { gamma, beta, .. } => {
                    let (ga, be) = (g.param(*gamma), g.param(*beta));
                    g.layer_norm(x, ga, be)?
                }
                LayerSpec::EmbeddingBag { .. } => unreachable!(),
            });
        }
        cur.ok_or_else(|| NnError::InvalidParameter("network has no layers".into()))
    }

    /// Forward pass without keeping the tape.
    pub fn predict(&self, input: &Input) -> Result<Tensor> {
        let mut g = Graph::new(&self.store);
        let out = self.forward(&mut g, input)?;
        Ok(g.value(out).clone())
    }
}
