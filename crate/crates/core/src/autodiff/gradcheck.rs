use super::params::ParamStore;
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub coords_checked: usize,
}

/// Compares analytic gradients with central differences
/// `(f(θ+h) - f(θ-h)) / 2h` on every coordinate of every trainable
/// parameter. The relative error of a coordinate is
/// `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// `f` builds the scalar objective on a fresh tape from the current
/// parameter values; it is evaluated twice at the starting point to
/// confirm it is deterministic.
pub fn grad_check<S, F>(store: &mut ParamStore<S>, h: S, f: F) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&Tape<S>, &ParamStore<S>) -> Result<Var>,
{
    if !(h > S::zero()) || !h.is_finite() {
        return Err(Error::Precondition(format!("finite-difference step must be > 0, got {h}")));
    }
    let eval = |store: &ParamStore<S>| -> Result<S> {
        let tape = Tape::new();
        let out = f(&tape, store)?;
        if !tape.with_value(out, |t| t.is_scalar()) {
            return Err(Error::Contract("grad_check objective must be scalar".into()));
        }
        Ok(tape.scalar_value(out))
    };

    let f0 = eval(store)?;
    let f1 = eval(store)?;
    if !f0.to_bits_eq(f1) {
        return Err(Error::Determinism(format!("objective gave {f0} then {f1} at the same point")));
    }

    let grads = {
        let tape = Tape::new();
        let out = f(&tape, store)?;
        tape.backward(out)?
    };

    let floor = S::lit(1e-8);
    let two_h = h + h;
    let mut report = GradCheckReport {
        max_rel_err: 0.0,
        worst: None,
        coords_checked: 0,
    };
    let ids: Vec<_> = store.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    for id in ids {
        let analytic = grads.param(id).map(|t| t.data().to_vec());
        let n = store.get(id).value.numel();
        for j in 0..n {
            let orig = store.get(id).value.data()[j];
            store.get_mut(id).value.data_mut()[j] = orig + h;
            let fp = eval(store);
            store.get_mut(id).value.data_mut()[j] = orig - h;
            let fm = eval(store);
            store.get_mut(id).value.data_mut()[j] = orig;
            let numeric = (fp? - fm?) / two_h;
            let a = analytic.as_ref().map_or(S::zero(), |g| g[j]);
            let denom = a.abs().max(numeric.abs()).max(floor);
            let rel = ((a - numeric).abs() / denom).as_f64();
            report.coords_checked += 1;
            if rel > report.max_rel_err || rel.is_nan() {
                report.max_rel_err = rel;
                report.worst = Some((store.get(id).name.clone(), j));
            }
        }
    }
    Ok(report)
}

trait BitsEq {
    fn to_bits_eq(self, other: Self) -> bool;
}

impl<S: Scalar> BitsEq for S {
    fn to_bits_eq(self, other: Self) -> bool {
        // integer_decode distinguishes every finite value, including signed zeros
        self.integer_decode() == other.integer_decode() || (self.is_nan() && other.is_nan())
    }
}
