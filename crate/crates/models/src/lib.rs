//! Neural voting functions: profile encoders, the MLP, CNN and word-embedding
//! architectures, decoders that turn logits into winning sets, and the
//! axiom-based training losses.

pub mod decode;
pub mod encode;
mod error;
pub mod losses;
pub mod model;

pub use decode::{decode, decode_plain, decoded_logits, Decoder, ModelVoting};
pub use encode::{encode_cnn, encode_mlp, encode_wec, full_vocabulary, kt_reorder, KtMode};
pub use error::{ModelError, Result};
pub use losses::{combined_loss, LossConfig, Objective, ObjectiveSet};
pub use model::{Architecture, Model, ModelSpec};
