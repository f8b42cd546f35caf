use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use super::schema::{FieldKind, Schema};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub const BOTH: [Domain; 2] = [Domain::Source, Domain::Target];

    pub fn other(self) -> Domain {
        match self {
            Domain::Source => Domain::Target,
            Domain::Target => Domain::Source,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldValue {
    Index(usize),
    Set(Vec<usize>),
    Dense(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub values: Vec<FieldValue>,
    pub label: u8,
    pub ts: i64,
}

impl Example {
    pub fn validate(&self, schema: &Schema) -> Result<()> {
        if self.values.len() != schema.fields.len() {
            return Err(Error::Validation(format!(
                "example has {} values, schema `{}` has {} fields",
                self.values.len(),
                schema.domain,
                schema.fields.len()
            )));
        }
        if self.label > 1 {
            return Err(Error::Validation(format!("label {} is not 0 or 1", self.label)));
        }
        for (v, f) in self.values.iter().zip(&schema.fields) {
            let oob = |i: usize| Error::IndexOutOfRange {
                field: f.name.clone(),
                index: i,
                vocab: f.size,
            };
            match (f.kind, v) {
                (FieldKind::Id | FieldKind::OneHot, FieldValue::Index(i)) => {
                    if *i >= f.size {
                        return Err(oob(*i));
                    }
                }
                (FieldKind::MultiHot, FieldValue::Set(s)) => {
                    if s.is_empty() {
                        return Err(Error::Validation(format!("empty multi-hot set in `{}`", f.name)));
                    }
                    if let Some(&i) = s.iter().find(|&&i| i >= f.size) {
                        return Err(oob(i));
                    }
                }
                (FieldKind::Dense, FieldValue::Dense(d)) => {
                    if d.len() != f.size {
                        return Err(Error::Validation(format!(
                            "dense field `{}` expects {} values, got {}",
                            f.name,
                            f.size,
                            d.len()
                        )));
                    }
                    if d.iter().any(|x| !x.is_finite()) {
                        return Err(Error::Validation(format!("non-finite value in `{}`", f.name)));
                    }
                }
                _ => {
                    return Err(Error::Validation(format!(
                        "value for `{}` does not match kind {}",
                        f.name,
                        f.kind.as_str()
                    )))
                }
            }
        }
        Ok(())
    }
}

/// An immutable, schema-checked list of examples.
///
/// Reads through [`Dataset::get`] and [`Dataset::select`] bump an access
/// counter, which lets callers audit which data a training stage touched.
/// Clones share the counter.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Arc<Schema>,
    examples: Arc<Vec<Example>>,
    reads: Arc<AtomicU64>,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, examples: Vec<Example>) -> Result<Self> {
        for e in &examples {
            e.validate(&schema)?;
        }
        Ok(Self::new_unchecked(schema, examples))
    }

    pub(crate) fn new_unchecked(schema: Arc<Schema>, examples: Vec<Example>) -> Self {
        Dataset {
            schema,
            examples: Arc::new(examples),
            reads: Arc::new(AtomicU64::new(0)),
        }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, i: usize) -> &Example {
        self.reads.fetch_add(1, Ordering::Relaxed);
        &self.examples[i]
    }

    pub fn select(&self, idx: &[usize]) -> Vec<&Example> {
        self.reads.fetch_add(idx.len() as u64, Ordering::Relaxed);
        idx.iter().map(|&i| &self.examples[i]).collect()
    }

    /// All examples, without touching the access counter.
    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn access_count(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn labels(&self) -> Vec<u8> {
        self.examples.iter().map(|e| e.label).collect()
    }

    pub fn positive_rate(&self) -> f64 {
        if self.examples.is_empty() {
            return 0.0;
        }
        self.examples.iter().filter(|e| e.label == 1).count() as f64 / self.examples.len() as f64
    }

    /// A new dataset over the given rows, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset::new_unchecked(
            self.schema.clone(),
            idx.iter().map(|&i| self.examples[i].clone()).collect(),
        )
    }

    /// Value of an index-valued field, for analysis code.
    pub fn index_field(&self, i: usize, field: usize) -> Option<usize> {
        match self.examples[i].values.get(field) {
            Some(FieldValue::Index(v)) => Some(*v),
            _ => None,
        }
    }
}
