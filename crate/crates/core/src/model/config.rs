use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractorKind {
    IndepMlp,
    SharedMlp,
    Mmoe,
    Ple,
}

impl ExtractorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractorKind::IndepMlp => "indep_mlp",
            ExtractorKind::SharedMlp => "shared_mlp",
            ExtractorKind::Mmoe => "mmoe",
            ExtractorKind::Ple => "ple",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "indep_mlp" => ExtractorKind::IndepMlp,
            "shared_mlp" => ExtractorKind::SharedMlp,
            "mmoe" => ExtractorKind::Mmoe,
            "ple" => ExtractorKind::Ple,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorConfig {
    pub kind: ExtractorKind,
    /// Output width of each layer of an MLP or expert. Empty means `[d, d]`.
    /// The last entry must equal `d`.
    pub layer_widths: Vec<usize>,
    /// Shared experts (MMoE and PLE).
    pub n_experts: usize,
    /// Domain-private experts per domain (PLE only).
    pub n_private_experts: usize,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            kind: ExtractorKind::Mmoe,
            layer_widths: Vec::new(),
            n_experts: 2,
            n_private_experts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Latent width of extractor outputs and translators.
    pub d: usize,
    /// Per-field embedding width.
    pub emb_dim: usize,
    pub extractor: ExtractorConfig,
    /// Hidden widths of prediction towers; the logit layer is appended.
    /// Empty means `[d]`, i.e. two layers including the logit layer.
    pub tower_hidden: Vec<usize>,
    /// Standard deviation of the Gaussian embedding-table initialization.
    pub emb_init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d: 128,
            emb_dim: 64,
            extractor: ExtractorConfig::default(),
            tower_hidden: Vec::new(),
            emb_init_std: 0.1,
        }
    }
}

impl ModelConfig {
    pub fn extractor_widths(&self) -> Vec<usize> {
        if self.extractor.layer_widths.is_empty() {
            vec![self.d, self.d]
        } else {
            self.extractor.layer_widths.clone()
        }
    }

    pub fn tower_widths(&self) -> Vec<usize> {
        let mut w = if self.tower_hidden.is_empty() {
            vec![self.d]
        } else {
            self.tower_hidden.clone()
        };
        w.push(1);
        w
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::config("model.d", "must be >= 1"));
        }
        if self.emb_dim == 0 {
            return Err(Error::config("model.emb_dim", "must be >= 1"));
        }
        let w = self.extractor_widths();
        if w.last() != Some(&self.d) {
            return Err(Error::config(
                "model.extractor.layer_widths",
                format!("last width must equal d = {}", self.d),
            ));
        }
        if w.contains(&0) || self.tower_hidden.contains(&0) {
            return Err(Error::config("model", "layer widths must be >= 1"));
        }
        let e = &self.extractor;
        match e.kind {
            ExtractorKind::Mmoe if e.n_experts == 0 => {
                return Err(Error::config("model.extractor.n_experts", "mmoe needs at least one expert"))
            }
            ExtractorKind::Ple if e.n_experts + e.n_private_experts == 0 => {
                return Err(Error::config("model.extractor.n_experts", "ple needs at least one expert"))
            }
            _ => {}
        }
        if !(self.emb_init_std > 0.0) {
            return Err(Error::config("model.emb_init_std", "must be > 0"));
        }
        Ok(())
    }
}
