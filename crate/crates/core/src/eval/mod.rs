//! Metrics, the translated-feature neighbor analysis, ablations and sweeps.

mod ablation;
mod auc;
mod evaluate;
mod knn;
mod sweep;
mod table;


pub use ablation::{run_ablations, train_from_scratch, AblationPlan, Variant, MIN_ABLATION_SEEDS};
pub use auc::auc;
pub use evaluate::{evaluate, predict_logits, Metrics};
pub use knn::{knn_translation_analysis, Metric, Neighbor, NeighborQuery, NeighborReport};
pub use sweep::{
    hyper_cell, run_method, sparse_target, sparsity_cell, sweep_hyper, sweep_sparsity, Method, DEFAULT_ALPHAS,
    DEFAULT_BETAS, DEFAULT_RATIOS,
};
pub use table::{CellResult, ResultTable, CSV_HEADER};
