//! Counter-based synchronized bit generator.
//!
//! Both ends of the link hold a [`SyncRng`] built from the same [`RngSeed`].
//! Because every word is a pure function of `(seed, slot)`, the two
//! generators stay in lockstep without exchanging any state, and any slot can
//! be revisited in O(1) (the sequence decoder relies on this).
//!
//! The mixer is the SplitMix64 finalizer applied to `seed + (slot + 1) * φ`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Shared generator seed. Every value, including zero, is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RngSeed(pub u64);

/// Slot counter `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SlotIndex(pub u64);

#[inline]
fn mix(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The 64-bit word drawn in `slot` by a generator seeded with `seed`.
#[inline]
pub fn rng_word(seed: RngSeed, slot: SlotIndex) -> u64 {
    mix(seed
        .0
        .wrapping_add(slot.0.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Top `bits` bits of the slot word, `1 <= bits <= 32`.
pub fn rng_bits(seed: RngSeed, slot: SlotIndex, bits: u32) -> Result<u32> {
    check_width(bits)?;
    Ok(top_bits(rng_word(seed, slot), bits))
}

#[inline]
pub(crate) fn top_bits(word: u64, bits: u32) -> u32 {
    (word >> (64 - bits)) as u32
}

pub(crate) fn check_width(bits: u32) -> Result<()> {
    if (1..=32).contains(&bits) {
        Ok(())
    } else {
        Err(SimError::config(format!(
            "bits per slot must be in [1, 32], got {bits}"
        )))
    }
}

/// Seed of Monte Carlo substream `stream_id` under `seed`.
#[inline]
pub fn derive_substream(seed: RngSeed, stream_id: u64) -> RngSeed {
    RngSeed(rng_word(seed, SlotIndex(stream_id)))
}

/// Random access to one word per slot.
pub trait SlotWords {
    fn word(&self, slot: u64) -> u64;

    /// Top `bits` bits of the slot word. `bits` must already be validated.
    #[inline]
    fn bits(&self, slot: u64, bits: u32) -> u32 {
        top_bits(self.word(slot), bits)
    }
}

/// The synchronized generator held by transmitter and receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyncRng {
    seed: RngSeed,
}

impl SyncRng {
    pub fn new(seed: RngSeed) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }
}

impl SlotWords for SyncRng {
    #[inline]
    fn word(&self, slot: u64) -> u64 {
        rng_word(self.seed, SlotIndex(slot))
    }
}

/// Scripted per-slot values, cycled when a slot runs past the end.
///
/// Values are given as `width`-bit integers and placed in the top bits of
/// the word, so `bits(slot, width)` returns them unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubSlots {
    words: Vec<u64>,
}

impl StubSlots {
    pub fn from_bits(values: &[u32], width: u32) -> Self {
        assert!((1..=32).contains(&width) && !values.is_empty());
        Self {
            words: values.iter().map(|&v| (v as u64) << (64 - width)).collect(),
        }
    }
}

impl SlotWords for StubSlots {
    fn word(&self, slot: u64) -> u64 {
        self.words[(slot % self.words.len() as u64) as usize]
    }
}

/// Sequential consumer of words (one counter value per word).
pub trait WordStream {
    fn next_word(&mut self) -> u64;
}

/// Deterministic cursor over the words of one seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitCursor {
    seed: RngSeed,
    next_counter: u64,
}

impl BitCursor {
    pub fn new(seed: RngSeed) -> Self {
        Self {
            seed,
            next_counter: 0,
        }
    }

    pub fn seed(&self) -> RngSeed {
        self.seed
    }

    pub fn next_counter(&self) -> u64 {
        self.next_counter
    }
}

impl WordStream for BitCursor {
    #[inline]
    fn next_word(&mut self) -> u64 {
        let w = rng_word(self.seed, SlotIndex(self.next_counter));
        self.next_counter += 1;
        w
    }
}

/// Scripted word stream for hand-traced tests.
#[derive(Debug, Clone)]
pub struct StubWords {
    words: Vec<u64>,
    pos: usize,
}

impl StubWords {
    pub fn new(words: Vec<u64>) -> Self {
        Self { words, pos: 0 }
    }

    /// Words whose top `width` bits equal the given values.
    pub fn from_top_bits(values: &[u64], width: u32) -> Self {
        assert!((1..=64).contains(&width));
        Self::new(values.iter().map(|&v| v << (64 - width)).collect())
    }

    /// Number of words consumed so far.
    pub fn consumed(&self) -> usize {
        self.pos
    }
}

impl WordStream for StubWords {
    fn next_word(&mut self) -> u64 {
        let w = *self.words.get(self.pos).expect("stub word stream exhausted");
        self.pos += 1;
        w
    }
}

/// Unbiased draw from `[0, k)` by rejection on the top `ceil(log2 k)` bits.
///
/// `k == 1` returns 0 without consuming a word.
pub fn uniform_below<S: WordStream + ?Sized>(src: &mut S, k: u64) -> u64 {
    assert!(k >= 1, "uniform_below requires k >= 1");
    if k == 1 {
        return 0;
    }
    let width = 64 - (k - 1).leading_zeros();
    loop {
        let v = src.next_word() >> (64 - width);
        if v < k {
            return v;
        }
    }
}

/// Uniform fraction in `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit_fraction<S: WordStream + ?Sized>(src: &mut S) -> f64 {
    (src.next_word() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
