//! Feedback compression with synchronized generators.
//!
//! In every slot both ends draw `2^C` random permutations of `N` items. The
//! receiver waits for the first candidate equal to its feedback message and
//! reports only the candidate index (`C` bits); the slot is implied by the
//! shared timing.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::sync_rng::{derive_substream, uniform_below, BitCursor, RngSeed, WordStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFeedbackConfig")]
pub struct FeedbackConfig {
    n: u32,
    c: u32,
}

#[derive(Deserialize)]
struct RawFeedbackConfig {
    n: u32,
    c: u32,
}

impl TryFrom<RawFeedbackConfig> for FeedbackConfig {
    type Error = SimError;
    fn try_from(r: RawFeedbackConfig) -> Result<Self> {
        FeedbackConfig::new(r.n, r.c)
    }
}

impl FeedbackConfig {
    /// `2 <= n <= 10`, `0 <= c <= 20` (`c = 0` is the uncompressed baseline row).
    pub fn new(n: u32, c: u32) -> Result<Self> {
        if !(2..=10).contains(&n) || c > 20 {
            return Err(SimError::config(format!(
                "feedback needs 2 <= N <= 10 and C <= 20, got N={n}, C={c}"
            )));
        }
        Ok(Self { n, c })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn c(&self) -> u32 {
        self.c
    }

    /// Message space size `W = N!`.
    pub fn message_space(&self) -> u64 {
        (1..=u64::from(self.n)).product()
    }

    pub fn candidates_per_slot(&self) -> u64 {
        1u64 << self.c
    }

    /// `log2 N!`, the uncompressed payload.
    pub fn log2_message_space(&self) -> f64 {
        (self.message_space() as f64).log2()
    }

    /// Per-slot success probability `q = 1 - (1 - 1/W)^(2^C)`.
    pub fn slot_success_prob(&self) -> f64 {
        let w = self.message_space() as f64;
        // 1 - exp(2^C * ln(1 - 1/W)), stable for large W
        -((self.candidates_per_slot() as f64) * (-1.0 / w).ln_1p()).exp_m1()
    }

    /// Mean slots until a match, `1 / q`.
    pub fn expected_slots(&self) -> f64 {
        1.0 / self.slot_success_prob()
    }
}

/// A permutation of `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PermutationMessage(Vec<u8>);

impl PermutationMessage {
    pub fn new(perm: Vec<u8>) -> Result<Self> {
        let mut seen = vec![false; perm.len()];
        for &v in &perm {
            match seen.get_mut(v as usize) {
                Some(s) if !*s => *s = true,
                _ => return Err(SimError::config(format!("{perm:?} is not a permutation"))),
            }
        }
        Ok(Self(perm))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n as u8).collect())
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lehmer-code rank in `[0, N!)`.
    pub fn rank(&self) -> u64 {
        let n = self.0.len();
        let mut rank = 0u64;
        for i in 0..n {
            let smaller = self.0[i + 1..].iter().filter(|&&v| v < self.0[i]).count() as u64;
            rank = rank * (n - i) as u64 + smaller;
        }
        rank
    }
}

/// Compressed feedback: candidate `index` of `slot`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackReport {
    pub slot: u64,
    pub index: u64,
}

/// Fisher-Yates shuffle of the identity: for `i = N-1 .. 1`, swap `i` with a
/// uniform position in `[0, i]`.
pub fn shuffle_identity<S: WordStream + ?Sized>(n: usize, src: &mut S) -> PermutationMessage {
    let mut p: Vec<u8> = (0..n as u8).collect();
    for i in (1..n).rev() {
        let j = uniform_below(src, i as u64 + 1) as usize;
        p.swap(i, j);
    }
    PermutationMessage(p)
}

/// Candidate `j` of `slot`, drawn from substream `slot * 2^C + j`.
pub fn candidate(seed: RngSeed, slot: u64, j: u64, cfg: &FeedbackConfig) -> PermutationMessage {
    assert!(j < cfg.candidates_per_slot(), "candidate index out of range");
    let stream = slot.wrapping_mul(cfg.candidates_per_slot()).wrapping_add(j);
    let mut cur = BitCursor::new(derive_substream(seed, stream));
    shuffle_identity(cfg.n as usize, &mut cur)
}

/// First `(slot, index)` whose candidate equals `msg`.
pub fn compress(
    msg: &PermutationMessage,
    seed: RngSeed,
    cfg: &FeedbackConfig,
    max_slots: u64,
) -> Result<FeedbackReport> {
    if msg.len() != cfg.n as usize {
        return Err(SimError::LengthMismatch {
            expected: cfg.n as usize,
            actual: msg.len(),
        });
    }
    for slot in 0..max_slots {
        for j in 0..cfg.candidates_per_slot() {
            if candidate(seed, slot, j, cfg) == *msg {
                return Ok(FeedbackReport { slot, index: j });
            }
        }
    }
    Err(SimError::SlotBudgetExceeded { max_slots })
}

pub fn decompress(report: &FeedbackReport, seed: RngSeed, cfg: &FeedbackConfig) -> PermutationMessage {
    candidate(seed, report.slot, report.index, cfg)
}

/// Uniform random permutation for test traffic.
pub fn random_message<S: WordStream + ?Sized>(n: u32, src: &mut S) -> PermutationMessage {
    shuffle_identity(n as usize, src)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompressionRow {
    pub n: u32,
    pub c: u32,
    pub log2_w: f64,
    pub bits_saved: f64,
    pub expected_slots_analytic: f64,
    /// Mean matching slot count (1-based) over the Monte Carlo messages.
    pub expected_slots_mc: Option<f64>,
    pub mc_messages: usize,
}

/// Mean number of slots (counting the matching one) over `messages` random messages.
pub fn monte_carlo_slots(
    cfg: &FeedbackConfig,
    seed: RngSeed,
    messages: usize,
    max_slots: u64,
) -> Result<f64> {
    let mut total = 0u64;
    for k in 0..messages as u64 {
        let mut src = BitCursor::new(derive_substream(seed, 2 * k));
        let msg = random_message(cfg.n, &mut src);
        let link = derive_substream(seed, 2 * k + 1);
        total += compress(&msg, link, cfg, max_slots)?.slot + 1;
    }
    Ok(total as f64 / messages.max(1) as f64)
}

/// Analytic and (optionally) simulated latency for every `C` in `cs`.
pub fn latency_compression_table(
    n: u32,
    cs: &[u32],
    mc_messages: usize,
    seed: RngSeed,
    max_slots: u64,
) -> Result<Vec<CompressionRow>> {
    if cs.is_empty() {
        return Err(SimError::config("compression grid is empty"));
    }
    cs.iter()
        .map(|&c| {
            let cfg = FeedbackConfig::new(n, c)?;
            let expected_slots_mc = if mc_messages > 0 {
                let sub = derive_substream(seed, (u64::from(n) << 8) | u64::from(c));
                Some(monte_carlo_slots(&cfg, sub, mc_messages, max_slots)?)
            } else {
                None
            };
            Ok(CompressionRow {
                n,
                c,
                log2_w: cfg.log2_message_space(),
                bits_saved: cfg.log2_message_space() - f64::from(c),
                expected_slots_analytic: cfg.expected_slots(),
                expected_slots_mc,
                mc_messages,
            })
        })
        .collect()
}

/// `(N, C)` pairs of the `feedback` experiment; every `C < log2 N!`.
pub fn default_grid() -> Vec<(u32, Vec<u32>)> {
    vec![
        (4, vec![1, 2, 3, 4]),
        (5, vec![2, 3, 4, 5, 6]),
        (6, vec![4, 5, 6, 7, 8, 9]),
    ]
}

/// CSV with columns N,C,log2W,expected_slots_analytic,expected_slots_mc,bits_saved.
pub fn write_table_csv<W: std::io::Write>(rows: &[CompressionRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "N",
        "C",
        "log2W",
        "expected_slots_analytic",
        "expected_slots_mc",
        "bits_saved",
    ])?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.c.to_string(),
            format!("{:.6}", r.log2_w),
            format!("{:.6}", r.expected_slots_analytic),
            r.expected_slots_mc.map(|v| format!("{v:.6}")).unwrap_or_default(),
            format!("{:.6}", r.bits_saved),
        ])?;
    }
    w.flush()?;
    Ok(())
}
