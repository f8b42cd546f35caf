use crate::error::{Error, Result};
use crate::model::ModelConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Weight of the cross-supervision losses.
    pub alpha: f64,
    /// Weight of the orthogonality penalty (both stages).
    pub beta: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: u64,
    /// Evaluations without a validation-AUC improvement before stopping.
    pub patience: u64,
    /// Steps between validations; `None` validates at the end of each epoch.
    pub eval_every: Option<u64>,
    /// Root seed; initialization and batch order use derived streams.
    pub seed: u64,
    pub model: ModelConfig,
    /// Record elapsed milliseconds in run records. Off by default so
    /// outputs are byte-reproducible.
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha: 0.01,
            beta: 0.1,
            lr: 1e-3,
            batch_size: 256,
            max_epochs: 200,
            patience: 5,
            eval_every: None,
            seed: 0,
            model: ModelConfig::default(),
            record_wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        crate::model::check_weights(self.alpha, self.beta)?;
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::config("train.lr", format!("must be > 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train.batch_size", "must be >= 1"));
        }
        if self.max_epochs == 0 {
            return Err(Error::config("train.max_epochs", "must be >= 1"));
        }
        if self.patience == 0 {
            return Err(Error::config("train.patience", "must be >= 1"));
        }
        if self.eval_every == Some(0) {
            return Err(Error::config("train.eval_every", "must be >= 1"));
        }
        self.model.validate()
    }

    /// Seed for parameter initialization.
    pub fn init_seed(&self) -> u64 {
        crate::rng::derive_seed(self.seed, "init")
    }

    /// Seed for batch shuffling.
    pub fn shuffle_seed(&self) -> u64 {
        crate::rng::derive_seed(self.seed, "shuffle")
    }
}
