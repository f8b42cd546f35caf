use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::autodiff::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::error::Result;
use crate::rng;
use crate::scalar::Scalar;

/// Uniform Glorot initialization, `±sqrt(6 / (fan_in + fan_out))`.
pub(crate) fn xavier<S: Scalar>(seed: u64, name: &str, fan_in: usize, fan_out: usize) -> Tensor<S> {
    let mut r = rng::stream(seed, name);
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out).map(|_| S::lit(r.random_range(-a..=a))).collect();
    Tensor::new(vec![fan_in, fan_out], data).expect("shape matches")
}

pub(crate) fn gaussian<S: Scalar>(seed: u64, name: &str, rows: usize, cols: usize, std: f64) -> Tensor<S> {
    let mut r = rng::stream(seed, name);
    let dist = Normal::new(0.0, std).expect("valid std");
    let data = (0..rows * cols).map(|_| S::lit(dist.sample(&mut r))).collect();
    Tensor::new(vec![rows, cols], data).expect("shape matches")
}

/// Affine map `x·W + b` with `W: in×out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub fan_in: usize,
    pub fan_out: usize,
}

impl Linear {
    pub(crate) fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        seed: u64,
        name: &str,
        fan_in: usize,
        fan_out: usize,
        zero: bool,
    ) -> Result<Self> {
        let wname = format!("{name}.w");
        let w = if zero {
            Tensor::zeros(&[fan_in, fan_out])
        } else {
            xavier(seed, &wname, fan_in, fan_out)
        };
        Ok(Linear {
            w: store.add(wname, w)?,
            b: store.add(format!("{name}.b"), Tensor::zeros(&[1, fan_out]))?,
            fan_in,
            fan_out,
        })
    }

    pub fn forward<S: Scalar>(&self, t: &Tape<S>, store: &ParamStore<S>, x: Var) -> Result<Var> {
        let h = t.matmul(x, t.param(store, self.w))?;
        t.add_row_bias(h, t.param(store, self.b))
    }

    pub fn params(&self) -> [ParamId; 2] {
        [self.w, self.b]
    }
}

/// Stack of linear layers with ReLU between them and a linear output.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `widths` lists the output width of each layer. With `zero_last`
    /// the final weight matrix starts at zero.
    pub(crate) fn new<S: Scalar>(
        store: &mut ParamStore<S>,
        seed: u64,
        name: &str,
        input: usize,
        widths: &[usize],
        zero_last: bool,
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len());
        let mut fan_in = input;
        for (i, &w) in widths.iter().enumerate() {
            let last = i + 1 == widths.len();
            layers.push(Linear::new(store, seed, &format!("{name}.{i}"), fan_in, w, zero_last && last)?);
            fan_in = w;
        }
        Ok(Mlp { layers })
    }

    pub fn forward<S: Scalar>(&self, t: &Tape<S>, store: &ParamStore<S>, x: Var) -> Result<Var> {
        let mut h = x;
        for (i, l) in self.layers.iter().enumerate() {
            h = l.forward(t, store, h)?;
            if i + 1 < self.layers.len() {
                h = t.relu(h)?;
            }
        }
        Ok(h)
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.fan_in)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.fan_out)
    }

    pub fn params(&self) -> Vec<ParamId> {
        self.layers.iter().flat_map(Linear::params).collect()
    }
}
