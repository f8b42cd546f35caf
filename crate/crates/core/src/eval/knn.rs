use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::data::{Correspondence, Dataset, Domain};
use crate::error::{Error, Result};
use crate::model::ModelAssembly;
use crate::scalar::Scalar;

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `1 − cos(a, b)`
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cosine" => Some(Metric::Cosine),
            "euclidean" => Some(Metric::Euclidean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    /// Row of the source dataset.
    pub example: usize,
    pub item: usize,
    pub distance: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborQuery {
    /// Row of the target dataset.
    pub query: usize,
    pub item: usize,
    /// Ground-truth source item, if the correspondence knows one.
    pub truth: Option<usize>,
    pub translated: Vec<f64>,
    /// Ascending by distance.
    pub neighbors: Vec<Neighbor>,
    pub hit: bool,
    /// Probability that `k` candidates drawn at random contain a match.
    pub chance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighborReport {
    pub k: usize,
    pub metric: Metric,
    pub n_candidates: usize,
    pub queries: Vec<NeighborQuery>,
    /// Fraction of queries with a ground-truth item among their neighbors.
    pub hit_rate: f64,
    /// Expected hit rate of uniformly random neighbor sets.
    pub chance_rate: f64,
    /// Standard error of the hit rate under the random-neighbor null.
    pub chance_se: f64,
}

impl NeighborReport {
    /// `(hit_rate − chance_rate) / chance_se`
    pub fn z_score(&self) -> f64 {
        if self.chance_se > 0.0 {
            (self.hit_rate - self.chance_rate) / self.chance_se
        } else if self.hit_rate == self.chance_rate {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// One query per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        for q in &self.queries {
            f.write_all(serde_json::to_string(q)?.as_bytes())?;
            f.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        let v = serde_json::json!({
            "k": self.k,
            "metric": self.metric,
            "queries": self.queries.len(),
            "n_candidates": self.n_candidates,
            "hit_rate": self.hit_rate,
            "chance_rate": self.chance_rate,
            "chance_se": self.chance_se,
            "z_score": self.z_score(),
        });
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }
}

fn latents<S: Scalar>(model: &ModelAssembly<S>, data: &Dataset, domain: Domain, rows: &[usize], translate: bool) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(CHUNK) {
        let batch: Vec<_> = chunk.iter().map(|&i| &data.examples()[i]).collect();
        let t = Tape::new();
        let mut z = model.latent(&t, domain, &batch)?;
        if translate {
            z = model.translate(&t, domain, z)?;
        }
        t.with_value(z, |v| {
            for r in 0..v.shape()[0] {
                out.push(v.row(r).iter().map(|x| x.as_f64()).collect());
            }
        });
    }
    Ok(out)
}

fn item_of(data: &Dataset, field: usize, row: usize) -> Result<usize> {
    data.index_field(row, field)
        .ok_or_else(|| Error::Validation(format!("row {row}: item field is not an index")))
}

/// `1 − C(n−m, k) / C(n, k)`
fn chance_of_match(n: usize, m: usize, k: usize) -> f64 {
    if m == 0 {
        return 0.0;
    }
    if k + m > n {
        return 1.0;
    }
    let mut miss = 1.0;
    for i in 0..k {
        miss *= (n - m - i) as f64 / (n - i) as f64;
    }
    1.0 - miss
}

/// For every positive target example, translates its latent with the
/// target translator and retrieves the `k` nearest source positives by
/// latent. A query hits when one of its neighbors has the source item the
/// correspondence pairs with the query's item.
pub fn knn_translation_analysis<S: Scalar>(
    model: &ModelAssembly<S>,
    source: &Dataset,
    target: &Dataset,
    correspondence: &Correspondence,
    item_field: &str,
    k: usize,
    metric: Metric,
) -> Result<NeighborReport> {
    for (d, ds) in [(Domain::Source, source), (Domain::Target, target)] {
        if ds.schema().as_ref() != model.schema(d).as_ref() {
            return Err(Error::Validation(format!("{d} data does not match the model's {d} schema")));
        }
    }
    let field = |ds: &Dataset| {
        ds.schema()
            .field_index(item_field)
            .ok_or_else(|| Error::Validation(format!("no field `{item_field}` in the {} schema", ds.schema().domain)))
    };
    let (fs, ft) = (field(source)?, field(target)?);
    let positives = |ds: &Dataset| -> Vec<usize> { (0..ds.len()).filter(|&i| ds.examples()[i].label == 1).collect() };
    let (cand_rows, query_rows) = (positives(source), positives(target));
    let n = cand_rows.len();
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    if k > n {
        return Err(Error::Precondition(format!("k = {k} exceeds the {n} source positives")));
    }
    let cand_items = cand_rows.iter().map(|&r| item_of(source, fs, r)).collect::<Result<Vec<_>>>()?;
    let mut item_counts: HashMap<usize, usize> = HashMap::new();
    for &it in &cand_items {
        *item_counts.entry(it).or_default() += 1;
    }
    let cands = latents(model, source, Domain::Source, &cand_rows, false)?;
    let queries = latents(model, target, Domain::Target, &query_rows, true)?;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cand_norms: Vec<f64> = cands.iter().map(|c| norm(c)).collect();

    let mut out = Vec::with_capacity(query_rows.len());
    let mut dist = vec![0.0; n];
    for (qi, q) in queries.into_iter().enumerate() {
        let qn = norm(&q);
        for (j, c) in cands.iter().enumerate() {
            dist[j] = match metric {
                Metric::Cosine => {
                    let dot: f64 = q.iter().zip(c).map(|(a, b)| a * b).sum();
                    let den = qn * cand_norms[j];
                    if den > 0.0 {
                        1.0 - dot / den
                    } else {
                        1.0
                    }
                }
                Metric::Euclidean => q.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
            };
        }
        let mut order: Vec<usize> = (0..n).collect();
        let cmp = |a: &usize, b: &usize| dist[*a].total_cmp(&dist[*b]).then(a.cmp(b));
        if k < n {
            order.select_nth_unstable_by(k - 1, cmp);
            order.truncate(k);
        }
        order.sort_by(cmp);
        let row = query_rows[qi];
        let item = item_of(target, ft, row)?;
        let truth = correspondence.source_of(item);
        let neighbors: Vec<Neighbor> = order
            .iter()
            .map(|&j| Neighbor {
                example: cand_rows[j],
                item: cand_items[j],
                distance: dist[j],
                hit: Some(cand_items[j]) == truth,
            })
            .collect();
        let m = truth.and_then(|t| item_counts.get(&t).copied()).unwrap_or(0);
        out.push(NeighborQuery {
            query: row,
            item,
            truth,
            translated: q,
            hit: neighbors.iter().any(|nb| nb.hit),
            neighbors,
            chance: chance_of_match(n, m, k),
        });
    }
    if out.is_empty() {
        return Err(Error::Data("target data has no positive examples".into()));
    }
    let nq = out.len() as f64;
    let hit_rate = out.iter().filter(|q| q.hit).count() as f64 / nq;
    let chance_rate = out.iter().map(|q| q.chance).sum::<f64>() / nq;
    let chance_se = out.iter().map(|q| q.chance * (1.0 - q.chance)).sum::<f64>().sqrt() / nq;
    Ok(NeighborReport {
        k,
        metric,
        n_candidates: n,
        queries: out,
        hit_rate,
        chance_rate,
        chance_se,
    })
}
