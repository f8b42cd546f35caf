//! Latent feature extractors.
//!
//! All four variants map a domain's embedding to a `d`-wide latent. Shared
//! components (the shared MLP and shared experts) read a zero-padded input of
//! width `max(E_source, E_target)` so both domains can feed them even when
//! their schemas differ in width.

use super::config::{ExtractorKind, ModelConfig};
use super::layers::{Linear, Mlp};
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::data::Domain;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub enum Extractor {
    /// One private MLP per domain.
    Indep { mlps: [Mlp; 2] },
    /// One MLP for both domains.
    Shared { mlp: Mlp },
    /// Shared experts mixed by per-domain softmax gates.
    Mmoe { experts: Vec<Mlp>, gates: [Linear; 2] },
    /// Shared plus domain-private experts, gated per domain over both sets.
    Ple {
        shared: Vec<Mlp>,
        private: [Vec<Mlp>; 2],
        gates: [Linear; 2],
    },
}

pub(crate) fn build<S: Scalar>(
    store: &mut ParamStore<S>,
    seed: u64,
    cfg: &ModelConfig,
    widths_in: [usize; 2],
) -> Result<Extractor> {
    let widths = cfg.extractor_widths();
    let shared_in = widths_in[0].max(widths_in[1]);
    let e = &cfg.extractor;
    let mlp = |store: &mut ParamStore<S>, name: &str, input: usize| Mlp::new(store, seed, name, input, &widths, false);
    Ok(match e.kind {
        ExtractorKind::IndepMlp => Extractor::Indep {
            mlps: [
                mlp(store, "extractor.source.mlp", widths_in[0])?,
                mlp(store, "extractor.target.mlp", widths_in[1])?,
            ],
        },
        ExtractorKind::SharedMlp => Extractor::Shared {
            mlp: mlp(store, "extractor.shared.mlp", shared_in)?,
        },
        ExtractorKind::Mmoe => {
            let experts = (0..e.n_experts)
                .map(|i| mlp(store, &format!("extractor.expert.{i}"), shared_in))
                .collect::<Result<Vec<_>>>()?;
            let gates = [
                Linear::new(store, seed, "extractor.source.gate", widths_in[0], e.n_experts, false)?,
                Linear::new(store, seed, "extractor.target.gate", widths_in[1], e.n_experts, false)?,
            ];
            Extractor::Mmoe { experts, gates }
        }
        ExtractorKind::Ple => {
            let shared = (0..e.n_experts)
                .map(|i| mlp(store, &format!("extractor.expert.{i}"), shared_in))
                .collect::<Result<Vec<_>>>()?;
            let mut private: [Vec<Mlp>; 2] = [Vec::new(), Vec::new()];
            for d in Domain::BOTH {
                for i in 0..e.n_private_experts {
                    private[d.index()].push(mlp(store, &format!("extractor.{d}.private.{i}"), widths_in[d.index()])?);
                }
            }
            let n = e.n_experts + e.n_private_experts;
            let gates = [
                Linear::new(store, seed, "extractor.source.gate", widths_in[0], n, false)?,
                Linear::new(store, seed, "extractor.target.gate", widths_in[1], n, false)?,
            ];
            Extractor::Ple { shared, private, gates }
        }
    })
}

fn pad<S: Scalar>(t: &Tape<S>, x: Var, width: usize) -> Result<Var> {
    let (n, w) = t.with_value(x, |v| v.dims2("pad"))?;
    if w == width {
        return Ok(x);
    }
    let z = t.constant(Tensor::zeros(&[n, width - w]));
    t.concat2(x, z)
}

fn mix<S: Scalar>(t: &Tape<S>, outs: &[Var], gate: Var) -> Result<Var> {
    let mut acc = None;
    for (i, &o) in outs.iter().enumerate() {
        let g = t.select_col(gate, i)?;
        let term = t.mul_rows(o, g)?;
        acc = Some(match acc {
            None => term,
            Some(a) => t.add(a, term)?,
        });
    }
    acc.ok_or_else(|| Error::Contract("gated mixture over zero experts".into()))
}

impl Extractor {
    pub fn forward<S: Scalar>(
        &self,
        t: &Tape<S>,
        store: &ParamStore<S>,
        domain: Domain,
        e: Var,
        widths_in: [usize; 2],
    ) -> Result<Var> {
        let di = domain.index();
        let shape = t.with_value(e, |v| v.shape().to_vec());
        if shape.len() != 2 || shape[1] != widths_in[di] {
            return Err(Error::Dimension {
                op: "extract",
                lhs: shape,
                rhs: vec![widths_in[di]],
            });
        }
        let shared_in = widths_in[0].max(widths_in[1]);
        match self {
            Extractor::Indep { mlps } => mlps[di].forward(t, store, e),
            Extractor::Shared { mlp } => mlp.forward(t, store, pad(t, e, shared_in)?),
            Extractor::Mmoe { experts, gates } => {
                let x = pad(t, e, shared_in)?;
                let outs = experts
                    .iter()
                    .map(|m| m.forward(t, store, x))
                    .collect::<Result<Vec<_>>>()?;
                let g = t.softmax_rows(gates[di].forward(t, store, e)?)?;
                mix(t, &outs, g)
            }
            Extractor::Ple { shared, private, gates } => {
                let mut outs = private[di]
                    .iter()
                    .map(|m| m.forward(t, store, e))
                    .collect::<Result<Vec<_>>>()?;
                if !shared.is_empty() {
                    let x = pad(t, e, shared_in)?;
                    for m in shared {
                        outs.push(m.forward(t, store, x)?);
                    }
                }
                let g = t.softmax_rows(gates[di].forward(t, store, e)?)?;
                mix(t, &outs, g)
            }
        }
    }

    /// Parameters on the computation path of one domain.
    pub fn params(&self, domain: Domain) -> Vec<ParamId> {
        let di = domain.index();
        match self {
            Extractor::Indep { mlps } => mlps[di].params(),
            Extractor::Shared { mlp } => mlp.params(),
            Extractor::Mmoe { experts, gates } => experts
                .iter()
                .flat_map(Mlp::params)
                .chain(gates[di].params())
                .collect(),
            Extractor::Ple { shared, private, gates } => private[di]
                .iter()
                .chain(shared)
                .flat_map(Mlp::params)
                .chain(gates[di].params())
                .collect(),
        }
    }
}
