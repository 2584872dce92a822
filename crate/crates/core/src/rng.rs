//! Seeded random streams.
//!
//! Every replicate draws from its own ChaCha8 stream. The 256-bit key is
//! derived from `(master seed, domain)` through SplitMix64 and the
//! replicate index selects the ChaCha stream, so streams never overlap and
//! do not depend on which worker runs the replicate.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Domain tags separating the uses of one master seed.
pub mod domain {
    pub const COALESCENT: u64 = 1;
    pub const OFFSPRING: u64 = 2;
    pub const GENEALOGY: u64 = 3;
    pub const TRANSITION: u64 = 4;
    pub const ESTIMATE_CN: u64 = 5;
    pub const PHI: u64 = 6;
    pub const TAIL: u64 = 7;
    pub const DISPERSION: u64 = 8;
    pub const CALIBRATION: u64 = 9;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A ChaCha8 stream that remembers where it came from.
#[derive(Clone, Debug)]
pub struct Stream {
    seed: u64,
    domain: u64,
    index: u64,
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, domain: u64, index: u64) -> Self {
        let mut state = seed ^ domain.wrapping_mul(0xD1B5_4A32_D192_ED03);
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        Self { seed, domain, index, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn domain(&self) -> u64 {
        self.domain
    }

    pub fn index(&self) -> u64 {
        self.index
    }
}

impl RngCore for Stream {
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

/// Runs `f` on replicates `0..reps`, each with its own stream, and returns
/// the results in replicate order.
pub fn par_replicates<T, F>(seed: u64, domain: u64, reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Stream) -> T + Sync + Send,
{
    (0..reps)
        .into_par_iter()
        .map(|i| f(&mut Stream::new(seed, domain, i)))
        .collect()
}

/// Uniform draw on `(0, 1]`.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    // 53 random bits mapped to {1, ..., 2^53} / 2^53
    ((rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Exponential holding time with the given rate, by inversion.
#[inline]
pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -open_unit(rng).ln() / rate
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map(|_| Stream::new(7, 1, 3).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut s1 = Stream::new(7, 1, 3);
        let mut s2 = Stream::new(7, 1, 4);
        let mut s3 = Stream::new(7, 2, 3);
        let mut s4 = Stream::new(8, 1, 3);
        let x = s1.next_u64();
        assert_ne!(x, s2.next_u64());
        assert_ne!(x, s3.next_u64());
        assert_ne!(x, s4.next_u64());
    }

    #[test]
    fn parallel_order_is_replicate_order() {
        let v = par_replicates(11, domain::CALIBRATION, 64, |s| (s.index(), s.random::<u32>()));
        for (i, (idx, x)) in v.iter().enumerate() {
            assert_eq!(*idx, i as u64);
            assert_eq!(*x, Stream::new(11, domain::CALIBRATION, i as u64).random::<u32>());
        }
    }

    #[test]
    fn open_unit_never_zero() {
        let mut s = Stream::new(1, 1, 1);
        for _ in 0..10_000 {
            let u = open_unit(&mut s);
            assert!(u > 0.0 && u <= 1.0);
        }
    }
}
