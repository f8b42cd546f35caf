use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::LossBreakdown;

/// One validation point: mean training losses since the previous one and
/// the validation AUC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub step: u64,
    pub epoch: u64,
    pub losses: LossBreakdown,
    pub val_auc: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    EarlyStop,
    MaxEpochs,
    /// Halted on request before either condition (resumable).
    Interrupted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub objective: String,
    pub optimizer: String,
    pub lr: f64,
    pub history: Vec<EvalRecord>,
    pub best_val_auc: f64,
    pub best_step: u64,
    pub best_epoch: u64,
    pub stop_reason: StopReason,
}

impl RunRecord {
    /// The history as JSON Lines, one evaluation per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.history {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        fs::File::create(path)?.write_all(self.to_jsonl()?.as_bytes())?;
        Ok(())
    }

    /// Everything but the history, as one JSON object.
    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "objective": self.objective,
            "optimizer": self.optimizer,
            "lr": self.lr,
            "evals": self.history.len(),
            "best_val_auc": self.best_val_auc,
            "best_step": self.best_step,
            "best_epoch": self.best_epoch,
            "stop_reason": self.stop_reason,
        });
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }
}
