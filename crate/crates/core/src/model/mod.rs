//! Network components: field embeddings, feature extractors, translators,
//! prediction towers and the training objectives built from them.

mod assembly;
mod checkpoint;
mod config;
mod embedding;
mod extractor;
mod layers;
mod losses;


pub use assembly::{ModelAssembly, Objective, Stage};
pub use checkpoint::{Checkpoint, MAGIC, VERSION};
pub(crate) use checkpoint::{narrow, widen};
pub use config::{ExtractorConfig, ExtractorKind, ModelConfig};
pub use embedding::{EmbeddingLayer, FieldEmbedding};
pub use extractor::Extractor;
pub use layers::{Linear, Mlp};
pub use losses::{
    augment, labels, loss_augmentation, loss_cross, loss_orth, loss_translation_total, loss_vanilla,
    loss_vanilla_total, orth_term, LossBreakdown,
};
pub(crate) use losses::check_weights;
