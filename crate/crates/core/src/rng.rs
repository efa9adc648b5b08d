//! Seed derivation and reproducible Gaussian sampling.
//!
//! Every random draw in an experiment comes from a [`SeedStream`] built from
//! `(master_seed, trial, role)`, so changing the number of draws made for one
//! role (say, the noise) never shifts the draws of another (say, the signal).
//! Normal variates use the Marsaglia polar method on top of ChaCha8, which is
//! fully specified and therefore bit-identical across platforms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// What a derived stream is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Matrix,
    Schedule,
    Signal,
    Noise,
}

impl Role {
    fn tag(self) -> u64 {
        match self {
            Role::Matrix => 0x6d61_7472_6978,
            Role::Schedule => 0x7363_6865_6475,
            Role::Signal => 0x7369_676e_616c,
            Role::Noise => 0x6e6f_6973_65,
        }
    }
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for one trial and one role.
pub fn child_seed(master: u64, trial: u64, role: Role) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ trial) ^ role.tag())
}

/// A seeded source of uniform and Gaussian variates.
#[derive(Clone, Debug)]
pub struct SeedStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeedStream {
    pub fn new(seed: u64) -> Self {
        SeedStream {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn derive(master: u64, trial: u64, role: Role) -> Self {
        SeedStream::new(child_seed(master, trial, role))
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Standard normal variate (Marsaglia polar method).
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn normal(&mut self, variance: f64) -> f64 {
        variance.sqrt() * self.standard_normal()
    }

    /// `N(0, variance)` conditioned on `|w| <= cutoff`, by rejection.
    pub fn truncated_normal(&mut self, variance: f64, cutoff: f64) -> f64 {
        let sd = variance.sqrt();
        if sd == 0.0 {
            return 0.0;
        }
        loop {
            let w = sd * self.standard_normal();
            if w.abs() <= cutoff {
                return w;
            }
        }
    }

    /// `k` distinct values drawn uniformly from `pool` (partial Fisher-Yates).
    pub fn sample_without_replacement(&mut self, pool: &mut Vec<usize>, k: usize) -> Vec<usize> {
        let k = k.min(pool.len());
        let mut out = Vec::with_capacity(k);
        for _ in 0..k {
            let j = self.below(pool.len());
            out.push(pool.swap_remove(j));
        }
        out
    }
}
