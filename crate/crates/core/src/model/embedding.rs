use std::collections::HashMap;

use super::layers::{gaussian, xavier};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::data::{Domain, Example, FieldKind, FieldValue, Schema};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct FieldEmbedding {
    pub name: String,
    pub kind: FieldKind,
    /// `V×emb_dim` table, or `dense_dim×emb_dim` projection for dense fields.
    pub param: ParamId,
    pub shared: bool,
}

/// Per-field lookup tables for both domains. Overlapped fields point at one
/// shared parameter; every other field owns a domain-private table.
#[derive(Debug, Clone)]
pub struct EmbeddingLayer {
    pub fields: [Vec<FieldEmbedding>; 2],
    pub emb_dim: usize,
}

impl EmbeddingLayer {
    pub(crate) fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        seed: u64,
        schemas: [&Schema; 2],
        emb_dim: usize,
        init_std: f64,
    ) -> Result<Self> {
        schemas[0].check_compatible(schemas[1])?;
        let mut shared: HashMap<String, ParamId> = HashMap::new();
        let mut out: [Vec<FieldEmbedding>; 2] = [Vec::new(), Vec::new()];
        for domain in Domain::BOTH {
            for f in &schemas[domain.index()].fields {
                let name = if f.overlapped {
                    format!("shared.emb.{}", f.name)
                } else {
                    format!("{domain}.emb.{}", f.name)
                };
                let param = match shared.get(&name) {
                    Some(&p) => p,
                    None => {
                        let init = match f.kind {
                            FieldKind::Dense => xavier(seed, &name, f.size, emb_dim),
                            _ => gaussian(seed, &name, f.size, emb_dim, init_std),
                        };
                        let p = store.add(name.clone(), init)?;
                        if f.overlapped {
                            shared.insert(name, p);
                        }
                        p
                    }
                };
                out[domain.index()].push(FieldEmbedding {
                    name: f.name.clone(),
                    kind: f.kind,
                    param,
                    shared: f.overlapped,
                });
            }
        }
        Ok(EmbeddingLayer { fields: out, emb_dim })
    }

    pub fn width(&self, domain: Domain) -> usize {
        self.fields[domain.index()].len() * self.emb_dim
    }

    /// Looks up every field and concatenates the results in schema order.
    /// Multi-hot fields are mean-pooled; dense fields are projected.
    pub fn forward<S: Scalar>(
        &self,
        t: &Tape<S>,
        store: &ParamStore<S>,
        domain: Domain,
        batch: &[&Example],
    ) -> Result<Var> {
        let fields = &self.fields[domain.index()];
        let mut parts = Vec::with_capacity(fields.len());
        for (j, f) in fields.iter().enumerate() {
            let table = t.param(store, f.param);
            let mismatch = || Error::Validation(format!("field `{}` has a value of the wrong kind", f.name));
            let v = match f.kind {
                FieldKind::Id | FieldKind::OneHot => {
                    let idx = batch
                        .iter()
                        .map(|e| match e.values.get(j) {
                            Some(FieldValue::Index(i)) => Ok(*i),
                            _ => Err(mismatch()),
                        })
                        .collect::<Result<Vec<_>>>()?;
                    t.gather_rows(table, &idx, &f.name)?
                }
                FieldKind::MultiHot => {
                    let mut offsets = Vec::with_capacity(batch.len() + 1);
                    let mut idx = Vec::new();
                    offsets.push(0);
                    for e in batch {
                        match e.values.get(j) {
                            Some(FieldValue::Set(s)) => idx.extend_from_slice(s),
                            _ => return Err(mismatch()),
                        }
                        offsets.push(idx.len());
                    }
                    t.gather_mean(table, &offsets, &idx, &f.name)?
                }
                FieldKind::Dense => {
                    let dim = store.value(f.param).shape()[0];
                    let mut data = Vec::with_capacity(batch.len() * dim);
                    for e in batch {
                        match e.values.get(j) {
                            Some(FieldValue::Dense(d)) if d.len() == dim => {
                                data.extend(d.iter().map(|&x| S::lit(x)))
                            }
                            _ => return Err(mismatch()),
                        }
                    }
                    let x = t.constant(Tensor::matrix(batch.len(), dim, data)?);
                    t.matmul(x, table)?
                }
            };
            parts.push(v);
        }
        t.concat(&parts)
    }

    pub fn params(&self, domain: Domain) -> Vec<ParamId> {
        self.fields[domain.index()].iter().map(|f| f.param).collect()
    }
}
