//! Receivers: per-slot detection, the two-stage frame detector and the
//! maximum-likelihood sequence decoder over a whole received block.
//!
//! Candidate scores are squared Euclidean distances (lower is better). The
//! sequence decoder works with log-likelihoods `-|y - c|^2 / N0` instead
//! (higher is better).

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channel_model::{ChannelParams, ComplexSample, Constellation};
use crate::error::{Result, SimError};
use crate::rnm_codec::{decode_event, Message, PpmConfig, RnmConfig, TxEvent};
use crate::sync_rng::{SlotIndex, SlotWords};

/// Detector output for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Empty,
    Symbol(u32),
}

impl Verdict {
    pub fn from_option(s: Option<u32>) -> Self {
        s.map_or(Verdict::Empty, Verdict::Symbol)
    }

    pub fn symbol(self) -> Option<u32> {
        match self {
            Verdict::Empty => None,
            Verdict::Symbol(k) => Some(k),
        }
    }

    pub fn is_empty(self) -> bool {
        self == Verdict::Empty
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub slot: SlotIndex,
    pub verdict: Verdict,
}

/// Wraps per-slot verdicts as events numbered from slot 0.
pub fn events_from_verdicts(verdicts: &[Verdict]) -> Vec<DetectionEvent> {
    verdicts
        .iter()
        .enumerate()
        .map(|(t, &verdict)| DetectionEvent {
            slot: SlotIndex(t as u64),
            verdict,
        })
        .collect()
}

/// Maximum likelihood, or maximum a posteriori with fixed priors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectorMode {
    Ml,
    Map { prior_empty: f64, prior_symbol: f64 },
}

impl DetectorMode {
    /// MAP priors for `order` symbols; `prior_empty + order * prior_symbol` must be 1.
    pub fn map(prior_empty: f64, prior_symbol: f64, order: u32) -> Result<Self> {
        let total = prior_empty + f64::from(order) * prior_symbol;
        if !(prior_empty > 0.0 && prior_symbol > 0.0) || (total - 1.0).abs() > 1e-9 {
            return Err(SimError::config(format!(
                "MAP priors must be positive and sum to 1 (got {prior_empty} + {order} x {prior_symbol})"
            )));
        }
        Ok(DetectorMode::Map {
            prior_empty,
            prior_symbol,
        })
    }

    /// Priors implied by the RNM match probability: `1 - p` and `p / M`.
    pub fn map_for(cfg: &RnmConfig) -> Self {
        let p = cfg.match_prob();
        DetectorMode::Map {
            prior_empty: 1.0 - p,
            prior_symbol: p / f64::from(cfg.symbols()),
        }
    }

    /// Equal priors over the zero symbol and all `order` points.
    pub fn uniform_map(order: u32) -> Self {
        let q = 1.0 / f64::from(order + 1);
        DetectorMode::Map {
            prior_empty: q,
            prior_symbol: q,
        }
    }
}

/// Whether the zero symbol is among the detection candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidates {
    WithZero,
    /// Plain M-PSK, used to check the substitution rate against the textbook curve.
    NonZeroOnly,
}

/// Configured per-slot detector.
#[derive(Debug, Clone)]
pub struct SlotDetector {
    constellation: Constellation,
    n0: f64,
    // penalties -N0 ln(prior); zero under ML
    empty_penalty: f64,
    symbol_penalty: f64,
    candidates: Candidates,
}

impl SlotDetector {
    pub fn new(constellation: Constellation, params: &ChannelParams, mode: DetectorMode) -> Self {
        let n0 = params.n0();
        let (empty_penalty, symbol_penalty) = match mode {
            DetectorMode::Ml => (0.0, 0.0),
            DetectorMode::Map {
                prior_empty,
                prior_symbol,
            } => (-n0 * prior_empty.ln(), -n0 * prior_symbol.ln()),
        };
        Self {
            constellation,
            n0,
            empty_penalty,
            symbol_penalty,
            candidates: Candidates::WithZero,
        }
    }

    pub fn with_candidates(mut self, candidates: Candidates) -> Self {
        self.candidates = candidates;
        self
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    /// Minimum-score candidate; ties go to the zero symbol, then the lowest index.
    pub fn detect(&self, y: ComplexSample) -> Verdict {
        let mut best = Verdict::Empty;
        let mut best_score = f64::INFINITY;
        if self.candidates == Candidates::WithZero {
            best_score = y.norm_sqr() + self.empty_penalty;
        }
        for (k, &s) in self.constellation.points().iter().enumerate() {
            let score = (y - s).norm_sqr() + self.symbol_penalty;
            if score < best_score {
                best_score = score;
                best = Verdict::Symbol(k as u32);
            }
        }
        best
    }

    pub fn detect_slots(&self, ys: &[ComplexSample]) -> Vec<Verdict> {
        ys.iter().map(|&y| self.detect(y)).collect()
    }
}

/// One-shot form of [`SlotDetector::detect`].
pub fn slot_detect(
    y: ComplexSample,
    constellation: &Constellation,
    params: &ChannelParams,
    mode: DetectorMode,
) -> Verdict {
    SlotDetector::new(constellation.clone(), params, mode).detect(y)
}

/// Turns every non-empty verdict into a message using that slot's word.
pub fn naive_decode<S: SlotWords + ?Sized>(
    verdicts: &[Verdict],
    source: &S,
    cfg: &RnmConfig,
) -> Vec<Message> {
    verdicts
        .iter()
        .enumerate()
        .filter_map(|(t, v)| {
            v.symbol()
                .map(|i| decode_event(source.bits(t as u64, cfg.bits()), i, cfg))
        })
        .collect()
}

/// Slot-by-slot receiver without framing: each detected symbol yields one
/// message, so insertions and deletions shift every later message.
pub fn naive_receive<S: SlotWords + ?Sized>(
    y_slots: &[ComplexSample],
    source: &S,
    cfg: &RnmConfig,
    detector: &SlotDetector,
) -> Vec<Message> {
    naive_decode(&detector.detect_slots(y_slots), source, cfg)
}

/// Non-coherent position search followed by coherent symbol decision.
///
/// Always returns exactly one `(position, symbol)`.
pub fn two_stage_detect(frame: &[ComplexSample], constellation: &Constellation) -> (u32, u32) {
    assert!(!frame.is_empty(), "empty PPM frame");
    let mut pos = 0;
    let mut best = frame[0].norm_sqr();
    for (t, y) in frame.iter().enumerate().skip(1) {
        let e = y.norm_sqr();
        if e > best {
            best = e;
            pos = t;
        }
    }
    let y = frame[pos];
    let mut sym = 0;
    let mut best_d = f64::INFINITY;
    for (k, &s) in constellation.points().iter().enumerate() {
        let d = (y - s).norm_sqr();
        if d < best_d {
            best_d = d;
            sym = k;
        }
    }
    (pos as u32, sym as u32)
}

/// Decodes consecutive `L`-slot frames into frame values.
pub fn ppm_receive(
    y_slots: &[ComplexSample],
    cfg: &PpmConfig,
    constellation: &Constellation,
) -> Result<Vec<u64>> {
    let l = cfg.slots() as usize;
    if !y_slots.len().is_multiple_of(l) {
        return Err(SimError::LengthMismatch {
            expected: y_slots.len().div_ceil(l) * l,
            actual: y_slots.len(),
        });
    }
    Ok(y_slots
        .chunks_exact(l)
        .map(|frame| {
            let (p, s) = two_stage_detect(frame, constellation);
            crate::rnm_codec::ppm_decode(p, s, cfg)
        })
        .collect())
}

/// Best emission schedule found by [`ml_sequence_decode`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceEstimate {
    pub messages: Vec<Message>,
    pub events: Vec<TxEvent>,
    pub log_likelihood: f64,
}

// Most recent slot before the current one whose word matched a message.
enum LastSeen {
    Dense(Vec<u32>),
    Sparse(HashMap<u32, u32>),
}

impl LastSeen {
    const NONE: u32 = u32::MAX;

    fn new(bits: u32) -> Self {
        if bits <= 16 {
            LastSeen::Dense(vec![Self::NONE; 1 << bits])
        } else {
            LastSeen::Sparse(HashMap::new())
        }
    }

    fn get(&self, m: u32) -> Option<u32> {
        match self {
            LastSeen::Dense(v) => Some(v[m as usize]).filter(|&u| u != Self::NONE),
            LastSeen::Sparse(h) => h.get(&m).copied(),
        }
    }

    fn set(&mut self, m: u32, slot: u32) {
        match self {
            LastSeen::Dense(v) => v[m as usize] = slot,
            LastSeen::Sparse(h) => {
                h.insert(m, slot);
            }
        }
    }
}

/// Suffix-maximum stack: answers `max_{a in [lo, now)} value[a]`, earliest on ties.
struct SuffixMax {
    entries: Vec<(u32, f64)>,
}

impl SuffixMax {
    fn new() -> Self {
        Self { entries: Vec::new() }
    }

    fn push(&mut self, idx: u32, value: f64) {
        if value == f64::NEG_INFINITY {
            return;
        }
        while let Some(&(_, v)) = self.entries.last() {
            if v < value {
                self.entries.pop();
            } else {
                break;
            }
        }
        self.entries.push((idx, value));
    }

    fn query(&self, lo: u32) -> Option<(u32, f64)> {
        let k = self.entries.partition_point(|&(i, _)| i < lo);
        self.entries.get(k).copied()
    }
}

/// Exact ML decoding of `k` RNM messages from a block of received slots.
///
/// Maximizes the joint log-likelihood of emissions and empty slots over all
/// schedules the transmitter could actually have produced: message `m_j`
/// emitted at `t_j` must not have matched any slot strictly between
/// `t_{j-1}` and `t_j`. Slots after the last emission are scored as empty.
pub fn ml_sequence_decode<S: SlotWords + ?Sized>(
    y_slots: &[ComplexSample],
    source: &S,
    cfg: &RnmConfig,
    constellation: &Constellation,
    params: &ChannelParams,
    k: usize,
) -> Result<SequenceEstimate> {
    let t_len = y_slots.len();
    if k == 0 {
        return Err(SimError::config("sequence decoder needs K >= 1"));
    }
    if t_len < k {
        return Err(SimError::LengthMismatch {
            expected: k,
            actual: t_len,
        });
    }
    if t_len >= u32::MAX as usize {
        return Err(SimError::config("block too long for the sequence decoder"));
    }
    if constellation.order() != cfg.symbols() {
        return Err(SimError::config(format!(
            "constellation has {} points but M = {}",
            constellation.order(),
            cfg.symbols()
        )));
    }
    let m = cfg.symbols() as usize;
    let inv_n0 = 1.0 / params.n0();
    let words: Vec<u32> = (0..t_len as u64).map(|t| source.bits(t, cfg.bits())).collect();

    // prefix[t] = sum of empty scores over slots [0, t)
    let mut prefix = Vec::with_capacity(t_len + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for y in y_slots {
        acc -= y.norm_sqr() * inv_n0;
        prefix.push(acc);
    }

    let emit = |t: usize, i: usize| -(y_slots[t] - constellation.points()[i]).norm_sqr() * inv_n0;

    // last_match[t * m + i]: latest u < t whose word matched message words[t] ^ i
    let mut last_match = vec![LastSeen::NONE; t_len * m];
    let mut seen = LastSeen::new(cfg.bits());
    for (t, &r) in words.iter().enumerate() {
        for i in 0..m {
            if let Some(u) = seen.get(r ^ i as u32) {
                last_match[t * m + i] = u;
            }
        }
        for d in 0..m as u32 {
            seen.set(r ^ d, t as u32);
        }
    }

    // back[level][t] = (predecessor slot, symbol); predecessor NONE for the first level
    let mut back = vec![vec![(LastSeen::NONE, 0u32); t_len]; k];
    let mut prev = vec![f64::NEG_INFINITY; t_len];
    for (t, slot) in prev.iter_mut().enumerate() {
        for i in 0..m {
            if last_match[t * m + i] != LastSeen::NONE {
                continue;
            }
            let score = prefix[t] + emit(t, i);
            if score > *slot {
                *slot = score;
                back[0][t] = (LastSeen::NONE, i as u32);
            }
        }
    }

    for links in back.iter_mut().skip(1) {
        let mut cur = vec![f64::NEG_INFINITY; t_len];
        let mut stack = SuffixMax::new();
        for t in 1..t_len {
            let a = t - 1;
            stack.push(a as u32, prev[a] - prefix[a + 1]);
            for i in 0..m {
                let lm = last_match[t * m + i];
                let lo = if lm == LastSeen::NONE { 0 } else { lm };
                if let Some((a_best, v)) = stack.query(lo) {
                    let score = v + prefix[t] + emit(t, i);
                    if score > cur[t] {
                        cur[t] = score;
                        links[t] = (a_best, i as u32);
                    }
                }
            }
        }
        prev = cur;
    }

    let mut best_t = None;
    let mut best_score = f64::NEG_INFINITY;
    for (t, &d) in prev.iter().enumerate() {
        if d == f64::NEG_INFINITY {
            continue;
        }
        let score = d + (prefix[t_len] - prefix[t + 1]);
        if score > best_score {
            best_score = score;
            best_t = Some(t);
        }
    }
    let mut t = best_t.ok_or(SimError::InfeasibleSchedule)?;

    let mut events = Vec::with_capacity(k);
    for level in (0..k).rev() {
        let (a, i) = back[level][t];
        events.push(TxEvent {
            slot: SlotIndex(t as u64),
            symbol_index: i,
        });
        t = a as usize;
    }
    events.reverse();
    let messages = events
        .iter()
        .map(|ev| decode_event(words[ev.slot.0 as usize], ev.symbol_index, cfg))
        .collect();
    Ok(SequenceEstimate {
        messages,
        events,
        log_likelihood: best_score,
    })
}

/// Gaussian tail `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Reference coherent M-PSK symbol error rate at `snr = Es/N0` (linear).
///
/// Exact for BPSK, the usual high-SNR approximation for larger `M`.
pub fn theoretical_ser(order: u32, snr: f64) -> f64 {
    assert!(order >= 2 && snr > 0.0);
    if order == 2 {
        q_function((2.0 * snr).sqrt())
    } else {
        let s = (std::f64::consts::PI / f64::from(order)).sin();
        2.0 * q_function((2.0 * snr).sqrt() * s)
    }
}
