//! Counter-based random streams.
//!
//! Every random quantity in a simulation is drawn from a ChaCha stream keyed
//! by `(seed, domain, index, stream)`, so the value of a draw never depends on
//! which worker produced it or in which order work items ran.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::C64;

/// Separates the stream families so equal numeric seeds do not collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Scatterers = 0x5CA7_7E85,
    Trial = 0x7_81A1,
    Channel = 0xC4A2_2E15,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic generator for work item `(index, stream)` of `seed` in `domain`.
pub fn keyed_rng(seed: u64, domain: Domain, index: u64, stream: u64) -> ChaCha8Rng {
    let mut state = seed ^ (domain as u64).rotate_left(17);
    let _ = splitmix64(&mut state);
    state ^= index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}

/// One draw of a standard circularly-symmetric complex Gaussian, CN(0, 1).
#[inline]
pub fn complex_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
