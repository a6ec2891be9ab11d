//! Minimal neural-network engine: `f64` tensors, a dynamic reverse-mode tape,
//! the layers used by the voting models, AdamW with a warm-restart cosine
//! schedule, skip-gram embeddings and a binary checkpoint format.

pub mod checkpoint;
mod error;
pub mod graph;
pub mod layers;
pub mod loss;
pub mod optim;
mod tensor;
pub mod word2vec;

pub use checkpoint::Checkpoint;
pub use error::{NnError, Result};
pub use graph::{Grads, Graph, KlTarget, ParamId, ParamStore, Var, KL_EPS};
pub use layers::{Input, LayerSpec, Network};
pub use loss::{bce_multilabel, kl_bernoulli};
pub use optim::{cosine_warm_restart_lr, AdamW, AdamWConfig, ScheduleConfig};
pub use tensor::{sigmoid, Tensor};
pub use word2vec::{word2vec_train, Embeddings, Vocabulary, Word2VecConfig, PAD_ID, UNK_ID};
