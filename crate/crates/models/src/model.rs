//! Architectures, construction and checkpoints.

use std::fmt;
use std::str::FromStr;

use deepvote_core::{Profile, MAX_ALTERNATIVES};
use deepvote_nn::{Checkpoint, Embeddings, Graph, Input, Network, Tensor, Var, Vocabulary, PAD_ID};
use rand::Rng;

use crate::encode::{encode_cnn, encode_mlp, encode_wec, full_vocabulary, kt_reorder, KtMode};
use crate::error::{ModelError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    Mlp,
    Cnn,
    Wec,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Mlp, Architecture::Cnn, Architecture::Wec];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Mlp => "mlp",
            Architecture::Cnn => "cnn",
            Architecture::Wec => "wec",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self> {
        Architecture::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| ModelError::UnknownName {
                kind: "architecture",
                name: s.to_string(),
            })
    }
}

/// Shape of a model.
///
/// * MLP: `m_max²·n_max → h → h → m_max` with ReLUs in between.
/// * CNN: conv `(kh, 1)` then conv `(1, kw)` with `channels` maps each
///   (valid padding, ReLUs), flatten, then `→ h → h → m_max`. The kernel
///   extents are 5, clamped to the input size.
/// * WEC: mean of the voters' ranking embeddings (`embed_dim`), then
///   `→ h → h → m_max`.
///
/// With `layer_norm` every hidden linear layer is followed by a layer norm.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub arch: Architecture,
    pub m_max: usize,
    pub n_max: usize,
    pub hidden: usize,
    pub channels: usize,
    pub embed_dim: usize,
    pub layer_norm: bool,
    /// CNN only: reorder voters before encoding.
    pub kt_reorder: Option<KtMode>,
}

impl ModelSpec {
    /// Defaults: 128 hidden units; 32 conv channels and 100-dimensional
    /// embeddings up to 5 alternatives, 64 and 200 beyond.
    pub fn new(arch: Architecture, m_max: usize, n_max: usize) -> Self {
        let small = m_max <= 5;
        ModelSpec {
            arch,
            m_max,
            n_max,
            hidden: 128,
            channels: if small { 32 } else { 64 },
            embed_dim: if small { 100 } else { 200 },
            layer_norm: false,
            kt_reorder: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_ALTERNATIVES).contains(&self.m_max) {
            return Err(ModelError::InvalidSpec(format!("m_max = {} out of range", self.m_max)));
        }
        if self.n_max == 0 || self.hidden == 0 || self.channels == 0 || self.embed_dim == 0 {
            return Err(ModelError::InvalidSpec("sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn conv_kernels(&self) -> (usize, usize) {
        (self.m_max.min(5), self.n_max.min(5))
    }
}

/// A network together with what is needed to feed it profiles.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    spec: ModelSpec,
    net: Network,
    vocab: Option<Vocabulary>,
}

const PREDICT_CHUNK: usize = 512;

impl Model {
    /// WEC models get the full ranking vocabulary with random embeddings.
    pub fn build(spec: ModelSpec, rng: &mut impl Rng) -> Result<Self> {
        let vocab = (spec.arch == Architecture::Wec).then(|| full_vocabulary(spec.m_max));
        Self::assemble(spec, vocab, rng)
    }

    /// WEC model whose embedding table starts from pretrained vectors.
    pub fn build_with_embeddings(mut spec: ModelSpec, emb: &Embeddings, rng: &mut impl Rng) -> Result<Self> {
        if spec.arch != Architecture::Wec {
            return Err(ModelError::InvalidSpec("embeddings only apply to WEC".into()));
        }
        spec.embed_dim = emb.vectors.shape()[1];
        let mut model = Self::assemble(spec, Some(emb.vocab.clone()), rng)?;
        let table = model.net.store().find("layers.0.table").expect("embedding table");
        *model.net.store_mut().get_mut(table) = emb.vectors.clone();
        Ok(model)
    }

    fn assemble(spec: ModelSpec, vocab: Option<Vocabulary>, rng: &mut impl Rng) -> Result<Self> {
        spec.validate()?;
        let (m, n, h) = (spec.m_max, spec.n_max, spec.hidden);
        let mut net = Network::new();
        let first_in = match spec.arch {
            Architecture::Mlp => m * m * n,
            Architecture::Cnn => {
                let (kh, kw) = spec.conv_kernels();
                let c = spec.channels;
                net.push_conv2d(m, c, kh, 1, rng)
                    .push_relu()
                    .push_conv2d(c, c, 1, kw, rng)
                    .push_relu()
                    .push_flatten();
                c * (m - kh + 1) * (n - kw + 1)
            }
            Architecture::Wec => {
                let v = vocab.as_ref().expect("WEC vocabulary").len();
                net.push_embedding_bag(v, spec.embed_dim, Some(PAD_ID), rng);
                spec.embed_dim
            }
        };
        net.push_linear(first_in, h, rng);
        if spec.layer_norm {
            net.push_layer_norm(h);
        }
        net.push_relu().push_linear(h, h, rng);
        if spec.layer_norm {
            net.push_layer_norm(h);
        }
        net.push_relu().push_linear(h, m, rng);
        Ok(Model { spec, net, vocab })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn vocabulary(&self) -> Option<&Vocabulary> {
        self.vocab.as_ref()
    }

    pub fn parameter_count(&self) -> usize {
        self.net.parameter_count()
    }

    /// Encodes a batch of profiles for this architecture.
    pub fn input(&self, profiles: &[Profile]) -> Result<Input> {
        let (m, n) = (self.spec.m_max, self.spec.n_max);
        for p in profiles {
            if p.m() > m || p.n() > n {
                return Err(ModelError::Bounds {
                    m: p.m(),
                    n: p.n(),
                    m_max: m,
                    n_max: n,
                });
            }
        }
        let b = profiles.len();
        Ok(match self.spec.arch {
            Architecture::Mlp => {
                let mut data = Vec::with_capacity(b * m * m * n);
                for p in profiles {
                    data.extend(encode_mlp(p, m, n)?);
                }
                Input::Dense(Tensor::new(vec![b, m * m * n], data)?)
            }
            Architecture::Cnn => {
                let mut data = Vec::with_capacity(b * m * m * n);
                for p in profiles {
                    match self.spec.kt_reorder {
                        Some(mode) => data.extend(encode_cnn(&kt_reorder(p, mode), m, n)?),
                        None => data.extend(encode_cnn(p, m, n)?),
                    }
                }
                Input::Dense(Tensor::new(vec![b, m, m, n], data)?)
            }
            Architecture::Wec => {
                let vocab = self.vocab.as_ref().expect("WEC vocabulary");
                Input::Tokens(
                    profiles
                        .iter()
                        .map(|p| encode_wec(p, vocab, n))
                        .collect::<Result<_>>()?,
                )
            }
        })
    }

    /// Records the forward pass; the result has shape `[batch, m_max]`.
    pub fn forward(&self, g: &mut Graph<'_>, profiles: &[Profile]) -> Result<Var> {
        let input = self.input(profiles)?;
        Ok(self.net.forward(g, &input)?)
    }

    /// Logits for each profile, `m_max` per row.
    pub fn logits(&self, profiles: &[Profile]) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::with_capacity(profiles.len());
        for chunk in profiles.chunks(PREDICT_CHUNK) {
            let t = self.net.predict(&self.input(chunk)?)?;
            out.extend((0..chunk.len()).map(|r| t.row(r).to_vec()));
        }
        Ok(out)
    }

    /// Header plus all parameters; `extra` entries (for instance the training
    /// distribution) are appended to the header.
    pub fn to_checkpoint(&self, extra: &[(&str, String)]) -> Checkpoint {
        let s = &self.spec;
        let mut header: Vec<(String, String)> = vec![
            ("arch".into(), s.arch.to_string()),
            ("m_max".into(), s.m_max.to_string()),
            ("n_max".into(), s.n_max.to_string()),
            ("hidden".into(), s.hidden.to_string()),
            ("channels".into(), s.channels.to_string()),
            ("embed_dim".into(), s.embed_dim.to_string()),
            ("layer_norm".into(), s.layer_norm.to_string()),
            (
                "kt_reorder".into(),
                s.kt_reorder.map_or("none".to_string(), |k| k.to_string()),
            ),
        ];
        if let Some(v) = &self.vocab {
            header.push(("vocab".into(), v.words().join(" ")));
        }
        header.extend(extra.iter().map(|(k, v)| (k.to_string(), v.clone())));
        let tensors = self
            .net
            .store()
            .iter()
            .map(|(_, name, t)| (name.to_string(), t.clone()))
            .collect();
        Checkpoint { header, tensors }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let get = |k: &str| {
            ckpt.get(k)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing header key {k}")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| ModelError::Checkpoint(format!("bad value for {k}")))
        };
        let spec = ModelSpec {
            arch: get("arch")?.parse()?,
            m_max: num("m_max")?,
            n_max: num("n_max")?,
            hidden: num("hidden")?,
            channels: num("channels")?,
            embed_dim: num("embed_dim")?,
            layer_norm: get("layer_norm")? == "true",
            kt_reorder: match get("kt_reorder")? {
                "none" => None,
                other => Some(other.parse()?),
            },
        };
        let vocab = match spec.arch {
            Architecture::Wec => Some(Vocabulary::from_words(get("vocab")?.split(' '))),
            _ => None,
        };
        // Weights are overwritten below; the generator only fills shapes.
        let mut rng = deepvote_core::sampling::rng_from_seed(0);
        let mut model = Self::assemble(spec, vocab, &mut rng)?;
        let ids: Vec<_> = model.net.store().iter().map(|(id, n, _)| (id, n.to_string())).collect();
        for (id, name) in ids {
            let t = ckpt
                .tensor(&name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing tensor {name}")))?;
            let slot = model.net.store_mut().get_mut(id);
            if t.shape() != slot.shape() {
                return Err(ModelError::Checkpoint(format!("shape mismatch for {name}")));
            }
            *slot = t.clone();
        }
        Ok(model)
    }
}
