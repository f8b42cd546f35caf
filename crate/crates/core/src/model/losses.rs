use serde::{Deserialize, Serialize};

use super::assembly::ModelAssembly;
use crate::autodiff::{Tape, Var};
use crate::data::{Domain, Example};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Scalar loss components of one step. Stage one fills the vanilla, cross
/// and orthogonality terms; stage two fills `aug` and `orth`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub vani_s: f64,
    pub vani_t: f64,
    pub cross_s: f64,
    pub cross_t: f64,
    pub orth: f64,
    pub aug: f64,
    pub total: f64,
}

impl LossBreakdown {
    /// Stage-one breakdown with `total` assembled from the components.
    pub fn translation(vani: [f64; 2], cross: [f64; 2], orth: f64, alpha: f64, beta: f64) -> Self {
        LossBreakdown {
            vani_s: vani[0],
            vani_t: vani[1],
            cross_s: cross[0],
            cross_t: cross[1],
            orth,
            aug: 0.0,
            total: vani[0] + vani[1] + alpha * (cross[0] + cross[1]) + beta * orth,
        }
    }

    pub fn augmentation(aug: f64, orth: f64, beta: f64) -> Self {
        LossBreakdown {
            aug,
            orth,
            total: aug + beta * orth,
            ..Default::default()
        }
    }

    /// First non-finite component, by name.
    pub fn non_finite(&self) -> Option<(&'static str, f64)> {
        [
            ("vani_s", self.vani_s),
            ("vani_t", self.vani_t),
            ("cross_s", self.cross_s),
            ("cross_t", self.cross_t),
            ("orth", self.orth),
            ("aug", self.aug),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
    }
}

pub(crate) fn check_weights(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha >= 0.0) {
        return Err(Error::config("train.alpha", format!("must be >= 0, got {alpha}")));
    }
    if !(beta >= 0.0) {
        return Err(Error::config("train.beta", format!("must be >= 0, got {beta}")));
    }
    Ok(())
}

pub fn labels<S: Scalar>(batch: &[&Example]) -> Vec<S> {
    batch.iter().map(|e| S::lit(f64::from(e.label))).collect()
}

/// `BCE(σ(R_domain(z)), y)`
pub fn loss_vanilla<S: Scalar>(t: &Tape<S>, m: &ModelAssembly<S>, domain: Domain, z: Var, y: &[S]) -> Result<Var> {
    let logit = m.tower_logit(t, domain, z)?;
    t.bce_with_logits(logit, y)
}

/// Translates `z` with this domain's translator and scores it with the
/// opposite domain's tower against this domain's labels.
pub fn loss_cross<S: Scalar>(t: &Tape<S>, m: &ModelAssembly<S>, domain: Domain, z: Var, y: &[S]) -> Result<Var> {
    let zt = m.translate(t, domain, z)?;
    let logit = m.tower_logit(t, domain.other(), zt)?;
    t.bce_with_logits(logit, y)
}

/// `‖(z·Wᵀ)·W − z‖²_F / n` for one domain.
pub fn orth_term<S: Scalar>(t: &Tape<S>, m: &ModelAssembly<S>, domain: Domain, z: Var) -> Result<Var> {
    let n = t.with_value(z, |v| v.shape().first().copied().unwrap_or(1)).max(1);
    let w = t.param(&m.params, m.translator(domain));
    let zt = t.matmul(z, t.transpose(w)?)?;
    let back = t.matmul(zt, w)?;
    let r = t.frobenius_sq(t.sub(back, z)?)?;
    t.scale(r, S::one() / S::lit(n as f64))
}

/// Orthogonality penalty summed over both domains.
pub fn loss_orth<S: Scalar>(t: &Tape<S>, m: &ModelAssembly<S>, z_s: Var, z_t: Var) -> Result<Var> {
    let a = orth_term(t, m, Domain::Source, z_s)?;
    let b = orth_term(t, m, Domain::Target, z_t)?;
    t.add(a, b)
}

/// Stage-one objective on one batch per domain. Returns the total as a
/// differentiable scalar along with its recorded components.
pub fn loss_translation_total<S: Scalar>(
    t: &Tape<S>,
    m: &ModelAssembly<S>,
    batch_s: &[&Example],
    batch_t: &[&Example],
    alpha: f64,
    beta: f64,
) -> Result<(Var, LossBreakdown)> {
    check_weights(alpha, beta)?;
    let z = [
        m.latent(t, Domain::Source, batch_s)?,
        m.latent(t, Domain::Target, batch_t)?,
    ];
    let y = [labels::<S>(batch_s), labels::<S>(batch_t)];
    let vani = [
        loss_vanilla(t, m, Domain::Source, z[0], &y[0])?,
        loss_vanilla(t, m, Domain::Target, z[1], &y[1])?,
    ];
    let cross = [
        loss_cross(t, m, Domain::Source, z[0], &y[0])?,
        loss_cross(t, m, Domain::Target, z[1], &y[1])?,
    ];
    let orth = loss_orth(t, m, z[0], z[1])?;
    let v = t.add(vani[0], vani[1])?;
    let c = t.scale(t.add(cross[0], cross[1])?, S::lit(alpha))?;
    let o = t.scale(orth, S::lit(beta))?;
    let total = t.add(t.add(v, c)?, o)?;
    let f = |x: Var| t.scalar_value(x).as_f64();
    let mut br = LossBreakdown::translation(
        [f(vani[0]), f(vani[1])],
        [f(cross[0]), f(cross[1])],
        f(orth),
        alpha,
        beta,
    );
    br.total = f(total);
    Ok((total, br))
}

/// Vanilla objective on both domains (joint baselines) or one domain.
pub fn loss_vanilla_total<S: Scalar>(
    t: &Tape<S>,
    m: &ModelAssembly<S>,
    batches: [Option<&[&Example]>; 2],
) -> Result<(Var, LossBreakdown)> {
    let mut total: Option<Var> = None;
    let mut br = LossBreakdown::default();
    for d in Domain::BOTH {
        let Some(batch) = batches[d.index()] else { continue };
        let z = m.latent(t, d, batch)?;
        let l = loss_vanilla(t, m, d, z, &labels::<S>(batch))?;
        let v = t.scalar_value(l).as_f64();
        match d {
            Domain::Source => br.vani_s = v,
            Domain::Target => br.vani_t = v,
        }
        total = Some(match total {
            None => l,
            Some(a) => t.add(a, l)?,
        });
    }
    let total = total.ok_or_else(|| Error::Contract("vanilla objective over no domain".into()))?;
    br.total = t.scalar_value(total).as_f64();
    Ok((total, br))
}

/// `[z ⊕ z']`, original columns first.
pub fn augment<S: Scalar>(t: &Tape<S>, z: Var, z_translated: Var) -> Result<Var> {
    let (a, b) = (t.with_value(z, |v| v.shape().to_vec()), t.with_value(z_translated, |v| v.shape().to_vec()));
    if a != b {
        return Err(Error::Dimension { op: "augment", lhs: a, rhs: b });
    }
    t.concat2(z, z_translated)
}

/// Stage-two objective: augmented tower BCE plus this domain's
/// orthogonality term.
pub fn loss_augmentation<S: Scalar>(
    t: &Tape<S>,
    m: &ModelAssembly<S>,
    domain: Domain,
    batch: &[&Example],
    beta: f64,
) -> Result<(Var, LossBreakdown)> {
    check_weights(0.0, beta)?;
    let z = m.latent(t, domain, batch)?;
    let zt = m.translate(t, domain, z)?;
    let logit = m.aug_logit(t, domain, z, zt)?;
    let aug = t.bce_with_logits(logit, &labels::<S>(batch))?;
    let orth = orth_term(t, m, domain, z)?;
    let total = t.add(aug, t.scale(orth, S::lit(beta))?)?;
    let mut br = LossBreakdown::augmentation(t.scalar_value(aug).as_f64(), t.scalar_value(orth).as_f64(), beta);
    br.total = t.scalar_value(total).as_f64();
    Ok((total, br))
}
