use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::evaluate::Metrics;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 5] = ["variant_or_cell", "seed", "auc", "logloss", "wall_ms"];

/// One trained-and-evaluated cell of an ablation or sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub cell: String,
    pub seed: u64,
    pub auc: f64,
    pub logloss: f64,
    /// Zero unless wall-clock recording is enabled.
    pub wall_ms: u64,
}

impl CellResult {
    pub fn new(cell: impl Into<String>, seed: u64, m: Metrics, wall_ms: u64) -> Self {
        CellResult {
            cell: cell.into(),
            seed,
            auc: m.auc,
            logloss: m.logloss,
            wall_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<CellResult>,
}

impl ResultTable {
    /// Cell names in first-appearance order.
    pub fn cells(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.cell.as_str()) {
                out.push(&r.cell);
            }
        }
        out
    }

    pub fn rows_of<'a>(&'a self, cell: &'a str) -> impl Iterator<Item = &'a CellResult> + 'a {
        self.rows.iter().filter(move |r| r.cell == cell)
    }

    pub fn mean_auc(&self, cell: &str) -> Option<f64> {
        let v: Vec<f64> = self.rows_of(cell).map(|r| r.auc).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.cell.clone(),
                r.seed.to_string(),
                r.auc.to_string(),
                r.logloss.to_string(),
                r.wall_ms.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()?)?;
        Ok(())
    }

    /// `cell → mean AUC` in cell order, as text lines.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for c in self.cells() {
            let n = self.rows_of(c).count();
            s.push_str(&format!("{c}\tmean_auc={:.6}\tseeds={n}\n", self.mean_auc(c).unwrap_or(f64::NAN)));
        }
        s
    }
}

pub(crate) type Job<'a> = Box<dyn Fn() -> Result<Vec<CellResult>> + Send + Sync + 'a>;

/// Runs jobs sequentially, or on a dedicated pool of `parallel` threads.
/// Output order follows job order either way.
pub(crate) fn run_jobs(jobs: Vec<Job<'_>>, parallel: usize) -> Result<ResultTable> {
    let chunks: Vec<Result<Vec<CellResult>>> = if parallel <= 1 {
        jobs.iter().map(|j| j()).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallel)
            .build()
            .map_err(|e| Error::Precondition(format!("cannot start {parallel} worker threads: {e}")))?;
        pool.install(|| jobs.par_iter().map(|j| j()).collect())
    };
    let mut rows = Vec::new();
    for c in chunks {
        rows.extend(c?);
    }
    Ok(ResultTable { rows })
}

/// Elapsed milliseconds when `record` is set, else 0.
pub(crate) fn elapsed_ms(start: Instant, record: bool) -> u64 {
    if record {
        start.elapsed().as_millis() as u64
    } else {
        0
    }
}
