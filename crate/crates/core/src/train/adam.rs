use crate::autodiff::{ParamStore, Tensor};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Adam with bias correction. Moment buffers are kept for every parameter,
/// trainable or not, in store order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<Tensor<S>>,
    pub v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(store: &ParamStore<S>) -> Self {
        Self::with_hyper(store, 0.9, 0.999, 1e-8)
    }

    pub fn with_hyper(store: &ParamStore<S>, beta1: f64, beta2: f64, eps: f64) -> Self {
        let zeros: Vec<Tensor<S>> = store.iter().map(|(_, p)| Tensor::zeros(p.value.shape())).collect();
        Adam {
            beta1,
            beta2,
            eps,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn describe(&self) -> String {
        format!("adam(beta1={}, beta2={}, eps={:e})", self.beta1, self.beta2, self.eps)
    }

    /// One update of every trainable parameter from its accumulated
    /// gradient, then clears all gradients.
    pub fn step(&mut self, store: &mut ParamStore<S>, lr: f64) -> Result<()> {
        if self.m.len() != store.len() {
            return Err(Error::Contract(format!(
                "optimizer tracks {} parameters, store has {}",
                self.m.len(),
                store.len()
            )));
        }
        for (i, p) in store.iter_mut().enumerate() {
            if p.trainable && p.grad.is_none() {
                return Err(Error::Contract(format!("trainable parameter `{}` has no gradient", p.name)));
            }
            if self.m[i].shape() != p.value.shape() {
                return Err(Error::Contract(format!("moment shape mismatch for `{}`", p.name)));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let (b1, b2) = (S::lit(self.beta1), S::lit(self.beta2));
        let (c1, c2) = (S::one() - b1, S::one() - b2);
        let bc1 = S::one() - b1.powi(t);
        let bc2 = S::one() - b2.powi(t);
        let lr = S::lit(lr);
        let eps = S::lit(self.eps);
        for (i, p) in store.iter_mut().enumerate() {
            let Some(g) = p.grad.take() else { continue };
            if !p.trainable {
                continue;
            }
            let (m, v) = (self.m[i].data_mut(), self.v[i].data_mut());
            for (((w, &g), m), v) in p.value.data_mut().iter_mut().zip(g.data()).zip(m).zip(v.iter_mut()) {
                *m = b1 * *m + c1 * g;
                *v = b2 * *v + c2 * g * g;
                let mh = *m / bc1;
                let vh = *v / bc2;
                *w = *w - lr * mh / (vh.sqrt() + eps);
            }
        }
        store.zero_grad();
        Ok(())
    }
}
