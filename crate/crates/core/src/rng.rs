//! Seed derivation.
//!
//! Every random stream is derived from one root seed: `derive_seed(root,
//! purpose)` hashes the little-endian root together with a purpose label
//! using SHA-256 and takes the first eight bytes. Purposes used by the crate:
//!
//! - `"generator"` and `"generator/<part>"` for synthetic data,
//! - `"init"` and then `"<parameter name>"` for weight initialization,
//! - `"shuffle"` and then `"<domain>/<epoch>/<cycle>"` for batch order,
//! - `"subsample"` for sparsity sweeps.
//!
//! Streams are independent of each other, so reseeding one component never
//! perturbs another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Rng = ChaCha8Rng;

pub fn derive_seed(root: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(root.to_le_bytes());
    h.update(purpose.as_bytes());
    let out = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&out[..8]);
    u64::from_le_bytes(b)
}

pub fn stream(root: u64, purpose: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(root, purpose))
}
