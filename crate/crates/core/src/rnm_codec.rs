//! Random number modulation (RNM) and fixed-frame pulse-position framing.
//!
//! In RNM the transmitter waits for a slot whose `B`-bit random word lies in
//! the representative set of the pending message and then emits the index of
//! that representative as an `M`-ary symbol. The representative set of
//! message `m` is `{m ^ d : d < M}`, so slot `t` matches iff
//! `r_t ^ m < M` and the receiver inverts with `m = r_t ^ i`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sync_rng::{check_width, SlotIndex, SlotWords};

/// Bits per message `B` and non-zero symbol count `M`, with `2 <= M < 2^B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRnmConfig")]
pub struct RnmConfig {
    bits: u32,
    symbols: u32,
}

#[derive(Deserialize)]
struct RawRnmConfig {
    bits: u32,
    symbols: u32,
}

impl TryFrom<RawRnmConfig> for RnmConfig {
    type Error = SimError;
    fn try_from(raw: RawRnmConfig) -> Result<Self> {
        RnmConfig::new(raw.bits, raw.symbols)
    }
}

impl RnmConfig {
    pub fn new(bits: u32, symbols: u32) -> Result<Self> {
        check_width(bits)?;
        if symbols < 2 || u64::from(symbols) >= 1u64 << bits {
            return Err(SimError::config(format!(
                "need 2 <= M < 2^B, got B={bits}, M={symbols}"
            )));
        }
        Ok(Self { bits, symbols })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn symbols(&self) -> u32 {
        self.symbols
    }

    /// Number of distinct messages, `2^B`.
    pub fn message_space(&self) -> u64 {
        1u64 << self.bits
    }

    /// Per-slot match probability `p = M / 2^B`.
    pub fn match_prob(&self) -> f64 {
        f64::from(self.symbols) / self.message_space() as f64
    }
}

/// A `B`-bit message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Message(pub u32);

/// One emission: symbol `symbol_index` sent in `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxEvent {
    pub slot: SlotIndex,
    pub symbol_index: u32,
}

/// Emission record of a message stream.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TxSchedule {
    pub events: Vec<TxEvent>,
    /// Last emission slot + 1 (zero for an empty stream).
    pub total_slots: u64,
    /// Slots consumed by each message, counting its emission slot.
    pub waits: Vec<u64>,
}

impl TxSchedule {
    /// Per-slot view: `Some(symbol)` where an emission happened.
    pub fn slot_symbols(&self, total_slots: u64) -> Vec<Option<u32>> {
        let mut out = vec![None; total_slots as usize];
        for ev in &self.events {
            out[ev.slot.0 as usize] = Some(ev.symbol_index);
        }
        out
    }
}

/// Symbol index that represents `m` in a slot whose random word is `r`.
#[inline]
pub fn match_slot(m: Message, r: u32, cfg: &RnmConfig) -> Option<u32> {
    let i = r ^ m.0;
    (i < cfg.symbols).then_some(i)
}

/// Receiver-side inverse of [`match_slot`].
#[inline]
pub fn decode_event(r: u32, symbol_index: u32, _cfg: &RnmConfig) -> Message {
    Message(r ^ symbol_index)
}

/// Mean of the geometric waiting time, `2^B / M` slots.
pub fn expected_wait_slots(cfg: &RnmConfig) -> f64 {
    1.0 / cfg.match_prob()
}

/// Encodes `messages` back to back on the slot words of `source`.
///
/// Fails with [`SimError::SlotBudgetExceeded`] once the scan would need slot
/// index `max_slots` or beyond.
pub fn encode_stream<S: SlotWords + ?Sized>(
    messages: &[Message],
    source: &S,
    cfg: &RnmConfig,
    max_slots: u64,
) -> Result<TxSchedule> {
    if max_slots == 0 {
        return Err(SimError::config("max_slots must be at least 1"));
    }
    let mut events = Vec::with_capacity(messages.len());
    let mut waits = Vec::with_capacity(messages.len());
    let mut slot = 0u64;
    for &m in messages {
        if u64::from(m.0) >= cfg.message_space() {
            return Err(SimError::config(format!(
                "message {} does not fit in {} bits",
                m.0, cfg.bits
            )));
        }
        let start = slot;
        loop {
            if slot >= max_slots {
                return Err(SimError::SlotBudgetExceeded { max_slots });
            }
            let r = source.bits(slot, cfg.bits);
            slot += 1;
            if let Some(symbol_index) = match_slot(m, r, cfg) {
                events.push(TxEvent {
                    slot: SlotIndex(slot - 1),
                    symbol_index,
                });
                waits.push(slot - start);
                break;
            }
        }
    }
    Ok(TxSchedule {
        events,
        total_slots: slot,
        waits,
    })
}

/// Pulse-position framing: `L` slots per frame, one `M`-ary pulse per frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawPpmConfig")]
pub struct PpmConfig {
    slots: u32,
    symbols: u32,
}

#[derive(Deserialize)]
struct RawPpmConfig {
    slots: u32,
    symbols: u32,
}

impl TryFrom<RawPpmConfig> for PpmConfig {
    type Error = SimError;
    fn try_from(raw: RawPpmConfig) -> Result<Self> {
        PpmConfig::new(raw.slots, raw.symbols)
    }
}

impl PpmConfig {
    pub fn new(slots: u32, symbols: u32) -> Result<Self> {
        let ok = |v: u32| v >= 2 && v.is_power_of_two();
        if !ok(slots) || !ok(symbols) {
            return Err(SimError::config(format!(
                "PPM needs powers of two >= 2, got L={slots}, M={symbols}"
            )));
        }
        if slots.trailing_zeros() + symbols.trailing_zeros() > 32 {
            return Err(SimError::config("PPM frame carries more than 32 bits"));
        }
        Ok(Self { slots, symbols })
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn symbols(&self) -> u32 {
        self.symbols
    }

    pub fn bits_per_frame(&self) -> u32 {
        self.slots.trailing_zeros() + self.symbols.trailing_zeros()
    }

    /// Number of distinct frame values `L * M`.
    pub fn frame_space(&self) -> u64 {
        u64::from(self.slots) * u64::from(self.symbols)
    }
}

/// High bits select the pulse position, low bits the symbol.
pub fn ppm_encode(bits: u64, cfg: &PpmConfig) -> Result<(u32, u32)> {
    if bits >= cfg.frame_space() {
        return Err(SimError::config(format!(
            "frame value {bits} out of range for L*M = {}",
            cfg.frame_space()
        )));
    }
    let shift = cfg.symbols.trailing_zeros();
    Ok(((bits >> shift) as u32, (bits & u64::from(cfg.symbols - 1)) as u32))
}

pub fn ppm_decode(position: u32, symbol_index: u32, cfg: &PpmConfig) -> u64 {
    (u64::from(position) << cfg.symbols.trailing_zeros()) | u64::from(symbol_index)
}
