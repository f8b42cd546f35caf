use serde::{Deserialize, Serialize};

use super::auc::auc;
use crate::autodiff::Tape;
use crate::data::{Dataset, Domain};
use crate::error::{Error, Result};
use crate::model::{ModelAssembly, Stage};
use crate::scalar::{self, Scalar};

const CHUNK: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub logloss: f64,
    pub n: usize,
}

/// Click logits for every example of a split, in split order.
pub fn predict_logits<S: Scalar>(model: &ModelAssembly<S>, data: &Dataset, domain: Domain, stage: Stage) -> Result<Vec<f64>> {
    if data.schema().as_ref() != model.schema(domain).as_ref() {
        return Err(Error::Validation(format!(
            "split schema `{}` does not match the model's {domain} schema",
            data.schema().domain
        )));
    }
    let ex = data.examples();
    let mut out = Vec::with_capacity(ex.len());
    for chunk in ex.chunks(CHUNK) {
        let batch: Vec<_> = chunk.iter().collect();
        let t = Tape::new();
        let l = model.predict_logits(&t, domain, stage, &batch)?;
        t.with_value(l, |v| out.extend(v.data().iter().map(|x| x.as_f64())));
    }
    Ok(out)
}

/// AUC and mean log loss of one split on the given prediction path.
/// A constant predictor scores AUC 0.5 by the tie rule.
pub fn evaluate<S: Scalar>(model: &ModelAssembly<S>, data: &Dataset, domain: Domain, stage: Stage) -> Result<Metrics> {
    let logits = predict_logits(model, data, domain, stage)?;
    let labels = data.labels();
    let logloss = logits
        .iter()
        .zip(&labels)
        .map(|(&l, &y)| if y == 1 { scalar::softplus(-l) } else { scalar::softplus(l) })
        .sum::<f64>()
        / logits.len().max(1) as f64;
    Ok(Metrics {
        auc: auc(&logits, &labels)?,
        logloss,
        n: logits.len(),
    })
}
