//! Counter-based random global phases.
//!
//! Phase `m` of realization `r` under seed `s` is the `m`-th 64-bit word
//! pair of the ChaCha8 keystream with key `s` (little-endian, zero padded)
//! and stream id `r`. Any element can be produced without generating its
//! predecessors, and the values do not depend on platform or thread count.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::{PhaseMode, SequencePlan};
use crate::error::{Error, Result};

/// Identifier recorded in every output manifest.
pub const RNG_ALGORITHM: &str = "chacha8(rand_chacha-0.9):key=seed_u64le,stream=realization,word=2*unit;phase=2pi*(u64>>11)*2^-53";

fn generator(seed: u64, realization: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(realization);
    rng
}

#[inline]
fn to_phase(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * TAU
}

/// Global phase of unit `unit_index` in realization `realization`, uniform on
/// `[0, 2π)`.
pub fn phase_at(seed: u64, realization: u64, unit_index: u64) -> f64 {
    let mut rng = generator(seed, realization);
    rng.set_word_pos(2 * unit_index as u128);
    to_phase(rng.next_u64())
}

/// `count` consecutive phases starting at unit `start`.
pub fn phase_stream(seed: u64, realization: u64, start: u64, count: usize) -> Vec<f64> {
    phase_iter(seed, realization, start).take(count).collect()
}

/// Unbounded form of [`phase_stream`].
pub(crate) fn phase_iter(seed: u64, realization: u64, start: u64) -> impl Iterator<Item = f64> {
    let mut rng = generator(seed, realization);
    rng.set_word_pos(2 * start as u128);
    std::iter::repeat_with(move || to_phase(rng.next_u64()))
}

/// The `M` per-unit global phases of one realization. Standard plans always
/// get zeros.
pub fn draw_unit_phases(plan: &SequencePlan, realization_index: u64) -> Result<Vec<f64>> {
    match plan.phase_mode() {
        PhaseMode::Standard => Ok(plan.zero_phases()),
        PhaseMode::Randomized { seed, realizations } => {
            if realization_index >= realizations {
                return Err(Error::RealizationOutOfRange {
                    index: realization_index,
                    realizations,
                });
            }
            Ok(phase_stream(seed, realization_index, 0, plan.repetitions()))
        }
    }
}
