use std::collections::HashSet;
use std::sync::Arc;

use super::config::ModelConfig;
use super::embedding::EmbeddingLayer;
use super::extractor::{self, Extractor};
use super::layers::Mlp;
use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::data::{Domain, Example, Schema};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Towers `R_s`, `R_t` on `d`-wide latents.
    Translation,
    /// Fresh towers on `[z ⊕ z']`, `2d` wide.
    Augmentation,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Translation => "translation",
            Stage::Augmentation => "augmentation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "translation" => Some(Stage::Translation),
            "augmentation" => Some(Stage::Augmentation),
            _ => None,
        }
    }
}

/// Which loss a training run minimizes; decides the trainable set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Vanilla + cross-supervision + orthogonality over both domains.
    Translation,
    /// Both vanilla losses only (joint-training baselines).
    JointVanilla,
    /// One domain's vanilla loss (single-domain baseline).
    SingleDomain(Domain),
    /// Augmented tower loss plus that domain's orthogonality term.
    Augmentation(Domain),
}

impl Objective {
    pub fn name(self) -> String {
        match self {
            Objective::Translation => "translation".into(),
            Objective::JointVanilla => "joint_vanilla".into(),
            Objective::SingleDomain(d) => format!("single_domain/{d}"),
            Objective::Augmentation(d) => format!("augmentation/{d}"),
        }
    }

    /// Domain and prediction path used for validation.
    pub fn eval_target(self) -> (Domain, Stage) {
        match self {
            Objective::Translation | Objective::JointVanilla => (Domain::Target, Stage::Translation),
            Objective::SingleDomain(d) => (d, Stage::Translation),
            Objective::Augmentation(d) => (d, Stage::Augmentation),
        }
    }

    /// Domains whose training data the objective consumes.
    pub fn domains(self) -> Vec<Domain> {
        match self {
            Objective::Translation | Objective::JointVanilla => Domain::BOTH.to_vec(),
            Objective::SingleDomain(d) | Objective::Augmentation(d) => vec![d],
        }
    }
}

/// Every parameter of one model: embeddings, extractor, both translators and
/// whichever towers the stage uses.
#[derive(Debug, Clone)]
pub struct ModelAssembly<S> {
    pub config: ModelConfig,
    pub schemas: [Arc<Schema>; 2],
    pub params: ParamStore<S>,
    pub init_seed: u64,
    embedding: EmbeddingLayer,
    extractor: Extractor,
    translators: [ParamId; 2],
    towers: [Option<Mlp>; 2],
    aug_towers: [Option<Mlp>; 2],
    /// Replace `z'` by zeros in the augmented tower input (ablation hook).
    pub mask_translated: bool,
    zero_init_logit: bool,
}

impl<S: Scalar> ModelAssembly<S> {
    /// Stage-one model with towers on both domains.
    pub fn translation(cfg: &ModelConfig, source: Arc<Schema>, target: Arc<Schema>, seed: u64) -> Result<Self> {
        Self::build_with(cfg, [source, target], seed, true, &[], false)
    }

    /// Stage-two model from scratch: no stage-one towers and a fresh
    /// augmented tower for each domain in `aug`.
    pub fn augmentation(
        cfg: &ModelConfig,
        source: Arc<Schema>,
        target: Arc<Schema>,
        seed: u64,
        aug: &[Domain],
    ) -> Result<Self> {
        Self::build_with(cfg, [source, target], seed, false, aug, false)
    }

    /// Same as the constructors, with every tower's logit weights at zero.
    pub fn with_zero_logit(
        cfg: &ModelConfig,
        source: Arc<Schema>,
        target: Arc<Schema>,
        seed: u64,
        stage: Stage,
    ) -> Result<Self> {
        match stage {
            Stage::Translation => Self::build_with(cfg, [source, target], seed, true, &[], true),
            Stage::Augmentation => Self::build_with(cfg, [source, target], seed, false, &[Domain::Target], true),
        }
    }

    pub(crate) fn build_with(
        cfg: &ModelConfig,
        schemas: [Arc<Schema>; 2],
        seed: u64,
        towers: bool,
        aug: &[Domain],
        zero_logit: bool,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut params = ParamStore::new();
        let embedding = EmbeddingLayer::new(&mut params, seed, [&schemas[0], &schemas[1]], cfg.emb_dim, cfg.emb_init_std)?;
        let widths = [embedding.width(Domain::Source), embedding.width(Domain::Target)];
        let extractor = extractor::build(&mut params, seed, cfg, widths)?;
        let translators = [
            params.add("source.translator.W", Tensor::identity(cfg.d))?,
            params.add("target.translator.W", Tensor::identity(cfg.d))?,
        ];
        let tw = cfg.tower_widths();
        let mut tower_arr: [Option<Mlp>; 2] = [None, None];
        if towers {
            for d in Domain::BOTH {
                tower_arr[d.index()] = Some(Mlp::new(&mut params, seed, &format!("{d}.tower"), cfg.d, &tw, zero_logit)?);
            }
        }
        let mut aug_arr: [Option<Mlp>; 2] = [None, None];
        for &d in aug {
            aug_arr[d.index()] = Some(Mlp::new(&mut params, seed, &format!("{d}.aug_tower"), 2 * cfg.d, &tw, zero_logit)?);
        }
        Ok(ModelAssembly {
            config: cfg.clone(),
            schemas,
            params,
            init_seed: seed,
            embedding,
            extractor,
            translators,
            towers: tower_arr,
            aug_towers: aug_arr,
            mask_translated: false,
            zero_init_logit: zero_logit,
        })
    }

    pub fn zero_init_logit(&self) -> bool {
        self.zero_init_logit
    }

    pub fn stage(&self) -> Stage {
        if self.towers.iter().any(Option::is_some) {
            Stage::Translation
        } else {
            Stage::Augmentation
        }
    }

    pub fn aug_domains(&self) -> Vec<Domain> {
        Domain::BOTH
            .into_iter()
            .filter(|d| self.aug_towers[d.index()].is_some())
            .collect()
    }

    pub fn schema(&self, domain: Domain) -> &Arc<Schema> {
        &self.schemas[domain.index()]
    }

    pub fn embedding_width(&self, domain: Domain) -> usize {
        self.embedding.width(domain)
    }

    pub fn translator(&self, domain: Domain) -> ParamId {
        self.translators[domain.index()]
    }

    pub fn tower(&self, domain: Domain) -> Option<&Mlp> {
        self.towers[domain.index()].as_ref()
    }

    pub fn aug_tower(&self, domain: Domain) -> Option<&Mlp> {
        self.aug_towers[domain.index()].as_ref()
    }

    pub fn extractor(&self) -> &Extractor {
        &self.extractor
    }

    pub fn embedding(&self) -> &EmbeddingLayer {
        &self.embedding
    }

    pub fn embed(&self, t: &Tape<S>, domain: Domain, batch: &[&Example]) -> Result<Var> {
        self.embedding.forward(t, &self.params, domain, batch)
    }

    pub fn extract(&self, t: &Tape<S>, domain: Domain, e: Var) -> Result<Var> {
        let w = [self.embedding.width(Domain::Source), self.embedding.width(Domain::Target)];
        self.extractor.forward(t, &self.params, domain, e, w)
    }

    /// `z = F_domain(E(x))`
    pub fn latent(&self, t: &Tape<S>, domain: Domain, batch: &[&Example]) -> Result<Var> {
        let e = self.embed(t, domain, batch)?;
        self.extract(t, domain, e)
    }

    /// `z' = z·Wᵀ`, the row form of `W z`.
    pub fn translate(&self, t: &Tape<S>, domain: Domain, z: Var) -> Result<Var> {
        let w = t.param(&self.params, self.translator(domain));
        t.matmul(z, t.transpose(w)?)
    }

    pub fn tower_logit(&self, t: &Tape<S>, domain: Domain, z: Var) -> Result<Var> {
        let tower = self.tower(domain).ok_or_else(|| {
            Error::Contract(format!("model has no stage-one {domain} tower (stage {})", self.stage().as_str()))
        })?;
        tower.forward(t, &self.params, z)
    }

    /// `R_aug(z ⊕ z')`.
    pub fn aug_logit(&self, t: &Tape<S>, domain: Domain, z: Var, z_translated: Var) -> Result<Var> {
        let tower = self.aug_tower(domain).ok_or_else(|| {
            Error::Contract(format!("model has no augmented {domain} tower (stage {})", self.stage().as_str()))
        })?;
        let zt = if self.mask_translated {
            let shape = t.with_value(z_translated, |v| v.shape().to_vec());
            t.constant(Tensor::zeros(&shape))
        } else {
            z_translated
        };
        let aug = t.concat2(z, zt)?;
        tower.forward(t, &self.params, aug)
    }

    /// Click logits for a batch on the stage's prediction path.
    pub fn predict_logits(&self, t: &Tape<S>, domain: Domain, stage: Stage, batch: &[&Example]) -> Result<Var> {
        let z = self.latent(t, domain, batch)?;
        match stage {
            Stage::Translation => self.tower_logit(t, domain, z),
            Stage::Augmentation => {
                let zt = self.translate(t, domain, z)?;
                self.aug_logit(t, domain, z, zt)
            }
        }
    }

    fn path(&self, domain: Domain) -> Vec<ParamId> {
        let mut p = self.embedding.params(domain);
        p.extend(self.extractor.params(domain));
        p
    }

    /// Parameters the given objective can reach.
    pub fn objective_params(&self, objective: Objective) -> Result<HashSet<ParamId>> {
        let need_tower = |d: Domain| -> Result<Vec<ParamId>> {
            self.tower(d)
                .map(Mlp::params)
                .ok_or_else(|| Error::Contract(format!("objective needs the {d} tower")))
        };
        let mut set = HashSet::new();
        match objective {
            Objective::Translation => {
                for d in Domain::BOTH {
                    set.extend(self.path(d));
                    set.extend(need_tower(d)?);
                    set.insert(self.translator(d));
                }
            }
            Objective::JointVanilla => {
                for d in Domain::BOTH {
                    set.extend(self.path(d));
                    set.extend(need_tower(d)?);
                }
            }
            Objective::SingleDomain(d) => {
                set.extend(self.path(d));
                set.extend(need_tower(d)?);
            }
            Objective::Augmentation(d) => {
                set.extend(self.path(d));
                set.insert(self.translator(d));
                let tower = self
                    .aug_tower(d)
                    .ok_or_else(|| Error::Contract(format!("objective needs the {d} augmented tower")))?;
                set.extend(tower.params());
            }
        }
        Ok(set)
    }

    /// Marks exactly the parameters reachable by `objective` as trainable.
    pub fn configure_trainable(&mut self, objective: Objective) -> Result<()> {
        let set = self.objective_params(objective)?;
        let ids: Vec<ParamId> = self.params.iter().map(|(id, _)| id).collect();
        for id in ids {
            self.params.get_mut(id).trainable = set.contains(&id);
        }
        Ok(())
    }

    /// Names of the parameters a stage-two model inherits.
    pub fn transferable_names(&self) -> Vec<String> {
        let towers: HashSet<ParamId> = self
            .towers
            .iter()
            .chain(&self.aug_towers)
            .flatten()
            .flat_map(Mlp::params)
            .collect();
        self.params
            .iter()
            .filter(|(id, _)| !towers.contains(id))
            .map(|(_, p)| p.name.clone())
            .collect()
    }

    /// Builds the augmentation model: embeddings, extractor and both
    /// translators are copied value-exactly, the prediction towers are
    /// dropped, and a freshly initialized `2d → 1` tower is added for each
    /// domain in `aug`. The result shares no storage with `self`.
    pub fn transfer_parameters(&self, aug: &[Domain]) -> Result<Self> {
        self.transfer_parameters_with(&self.config, aug)
    }

    /// As [`Self::transfer_parameters`] with an explicit stage-two config,
    /// which must agree with this model on `d`.
    pub fn transfer_parameters_with(&self, cfg: &ModelConfig, aug: &[Domain]) -> Result<Self> {
        if cfg.d != self.config.d {
            return Err(Error::Contract(format!(
                "latent width mismatch: translation model d = {}, augmentation config d = {}",
                self.config.d, cfg.d
            )));
        }
        let mut out = Self::build_with(
            cfg,
            self.schemas.clone(),
            self.init_seed,
            false,
            aug,
            self.zero_init_logit,
        )?;
        for name in self.transferable_names() {
            let src = self.params.by_name(&name).expect("name from this store");
            let id = out
                .params
                .id(&name)
                .ok_or_else(|| Error::Contract(format!("parameter `{name}` has no counterpart in stage two")))?;
            let dst = out.params.get_mut(id);
            if dst.value.shape() != src.value.shape() {
                return Err(Error::Contract(format!(
                    "parameter `{name}`: shape {:?} vs {:?}",
                    src.value.shape(),
                    dst.value.shape()
                )));
            }
            dst.value = src.value.clone();
        }
        Ok(out)
    }
}
