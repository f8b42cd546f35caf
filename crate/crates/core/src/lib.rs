//! Cross-domain click-through-rate prediction with latent feature
//! translation and augmentation, on a small define-by-run autodiff engine.

pub mod autodiff;
pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod train;

pub use error::{Error, Result};

pub type Tensor = autodiff::Tensor<f64>;
pub type TensorF32 = autodiff::Tensor<f32>;
pub type Tape = autodiff::Tape<f64>;
pub type TapeF32 = autodiff::Tape<f32>;
pub type ParamStore = autodiff::ParamStore<f64>;
pub type ParamStoreF32 = autodiff::ParamStore<f32>;
pub type Model = model::ModelAssembly<f64>;
pub type ModelF32 = model::ModelAssembly<f32>;
pub type TwoStageRun = train::TwoStageRun<f64>;
