//! Counter-based random streams.
//!
//! A stream is identified by `(master_seed, stream_id)` and backed by a
//! ChaCha8 generator keyed by the master seed and positioned on its own
//! ChaCha stream. Simulations hand each replicate `stream_id = replicate`
//! and derive further sub-streams by tag, so results never depend on the
//! order in which replicates are scheduled.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Normal};

use crate::error::{invalid, Result};

#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Dist {
    Uniform,
    Bernoulli(f64),
    Beta(f64, f64),
    Normal(f64, f64),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_id);
        Self {
            master_seed,
            stream_id,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream whose id is a hash of this stream's id and `tag`.
    /// Derivation ignores how far this stream has advanced.
    pub fn derive(&self, tag: u64) -> RngStream {
        let id = splitmix64(self.stream_id ^ splitmix64(tag.wrapping_add(0x5851_F42D_4C95_7F2D)));
        RngStream::new(self.master_seed, id)
    }

    /// Two-level derivation for `(kind, index)` tags such as (cohort draw, k).
    pub fn derive2(&self, kind: u64, index: u64) -> RngStream {
        self.derive(splitmix64(kind).wrapping_add(index))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.rng.random_range(0..len)
    }

    pub fn normal01(&mut self) -> f64 {
        rand_distr::StandardNormal.sample(&mut self.rng)
    }

    /// Standard exponential; `-exp1()` is distributed as `ln(uniform())`.
    pub fn exp1(&mut self) -> f64 {
        rand_distr::Exp1.sample(&mut self.rng)
    }

    pub fn draw(&mut self, dist: Dist) -> Result<f64> {
        match dist {
            Dist::Uniform => Ok(self.uniform()),
            Dist::Bernoulli(p) => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(invalid(format!("Bernoulli p={p} outside [0,1]")));
                }
                Ok(if self.uniform() < p { 1.0 } else { 0.0 })
            }
            Dist::Beta(a, b) => {
                let d = Beta::new(a, b).map_err(|e| invalid(format!("Beta({a},{b}): {e}")))?;
                Ok(d.sample(&mut self.rng))
            }
            Dist::Normal(mu, sigma) => {
                if !(sigma > 0.0) {
                    return Err(invalid(format!("Normal sigma={sigma} must be positive")));
                }
                let d = Normal::new(mu, sigma)
                    .map_err(|e| invalid(format!("Normal({mu},{sigma}): {e}")))?;
                Ok(d.sample(&mut self.rng))
            }
        }
    }

    /// Binomial(n, p) as a sum of `n` uniform threshold tests, so that two
    /// streams in the same state give coupled counts for different `p`.
    pub fn binomial(&mut self, n: u32, p: f64) -> u32 {
        (0..n).filter(|_| self.uniform() < p).count() as u32
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Pick uniformly among `items`; `None` when empty.
pub fn choose<T: Copy>(rng: &mut RngStream, items: &[T]) -> Option<T> {
    match items.len() {
        0 => None,
        1 => Some(items[0]),
        n => Some(items[rng.index(n)]),
    }
}
