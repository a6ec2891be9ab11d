//! Skip-gram embeddings with negative sampling.

use std::collections::{HashMap, HashSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{NnError, Result};
use crate::tensor::{sigmoid, Tensor};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

/// Token list with `<pad>` at 0, `<unk>` at 1, then the corpus words ordered
/// by length and then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut rest: Vec<String> = words
            .into_iter()
            .map(Into::into)
            .filter(|w| w != PAD_TOKEN && w != UNK_TOKEN)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        rest.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
        let mut words = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        words.extend(rest);
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    /// Id of `word`, or the `<unk>` id.
    pub fn id(&self, word: &str) -> usize {
        self.get(word).unwrap_or(UNK_ID)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Word2VecConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Final learning rate as a fraction of `lr`.
    pub min_lr_fraction: f64,
}

impl Default for Word2VecConfig {
    fn default() -> Self {
        Word2VecConfig {
            dim: 100,
            window: 7,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            min_lr_fraction: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embeddings {
    pub vocab: Vocabulary,
    /// `[vocab, dim]` input vectors.
    pub vectors: Tensor,
}

impl Embeddings {
    pub fn vector(&self, word: &str) -> &[f64] {
        self.vectors.row(self.vocab.id(word))
    }

    pub fn cosine(&self, a: &str, b: &str) -> f64 {
        let (x, y) = (self.vector(a), self.vector(b));
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            dot / (nx * ny)
        }
    }
}

/// Trains skip-gram vectors on `corpus`; each sentence is one context.
pub fn word2vec_train<R: Rng>(
    corpus: &[Vec<String>],
    config: &Word2VecConfig,
    rng: &mut R,
) -> Result<Embeddings> {
    if corpus.iter().all(|s| s.is_empty()) {
        return Err(NnError::EmptyCorpus);
    }
    if config.dim == 0 {
        return Err(NnError::InvalidParameter("embedding dim must be positive".into()));
    }
    let vocab = Vocabulary::from_words(corpus.iter().flatten().cloned());
    let (v, dim) = (vocab.len(), config.dim);
    let sentences: Vec<Vec<usize>> = corpus
        .iter()
        .map(|s| s.iter().map(|w| vocab.id(w)).collect())
        .collect();

    let mut counts = vec![0.0f64; v];
    for &id in sentences.iter().flatten() {
        counts[id] += 1.0;
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75)))
        .map_err(|e| NnError::InvalidParameter(e.to_string()))?;

    let bound = 0.5 / dim as f64;
    let mut w_in: Vec<f64> = (0..v * dim).map(|_| rng.random_range(-bound..bound)).collect();
    w_in[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
    let mut w_out = vec![0.0; v * dim];

    let total_words = (sentences.iter().map(Vec::len).sum::<usize>() * config.epochs).max(1);
    let min_lr = config.lr * config.min_lr_fraction;
    let mut seen = 0usize;
    let mut grad_in = vec![0.0; dim];
    for _ in 0..config.epochs {
        for sentence in &sentences {
            for (i, &center) in sentence.iter().enumerate() {
                let lr = (config.lr * (1.0 - seen as f64 / total_words as f64)).max(min_lr);
                seen += 1;
                let lo = i.saturating_sub(config.window);
                let hi = (i + config.window + 1).min(sentence.len());
                for (j, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    // The context word's input vector predicts the center word.
                    grad_in.fill(0.0);
                    let row_in = context * dim;
                    for k in 0..=config.negatives {
                        let (target, label) = if k == 0 {
                            (center, 1.0)
                        } else {
                            let t = noise.sample(rng);
                            if t == center {
                                continue;
                            }
                            (t, 0.0)
                        };
                        let row_out = target * dim;
                        let dot: f64 = (0..dim).map(|d| w_in[row_in + d] * w_out[row_out + d]).sum();
                        let gcoef = (label - sigmoid(dot)) * lr;
                        for d in 0..dim {
                            grad_in[d] += gcoef * w_out[row_out + d];
                            w_out[row_out + d] += gcoef * w_in[row_in + d];
                        }
                    }
                    for d in 0..dim {
                        w_in[row_in + d] += grad_in[d];
                    }
                }
            }
        }
    }
    // Padding never appears as a word, but keep it exactly zero regardless.
    w_in[PAD_ID * dim..(PAD_ID + 1) * dim].fill(0.0);
    Ok(Embeddings {
        vocab,
        vectors: Tensor::new(vec![v, dim], w_in)?,
    })
}
