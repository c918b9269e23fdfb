//! Slot-level error taxonomy, message-stream alignment and error propagation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detectors::{DetectionEvent, Verdict};
use crate::error::{Result, SimError};
use crate::rnm_codec::TxSchedule;

/// Per-slot comparison of transmitted and detected symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotErrorCounts {
    /// Empty slot detected as a symbol.
    pub insertions: u64,
    /// Transmitted symbol detected as empty.
    pub deletions: u64,
    /// Transmitted symbol detected as a different symbol.
    pub substitutions: u64,
    pub correct_symbols: u64,
    pub correct_empties: u64,
    pub total_slots: u64,
}

impl SlotErrorCounts {
    pub fn errors(&self) -> u64 {
        self.insertions + self.deletions + self.substitutions
    }

    pub fn is_consistent(&self) -> bool {
        self.errors() + self.correct_symbols + self.correct_empties == self.total_slots
    }

    /// `max / min` over the three error counts, `None` when any is zero.
    pub fn max_min_ratio(&self) -> Option<f64> {
        let v = [self.insertions, self.deletions, self.substitutions];
        let lo = *v.iter().min().unwrap();
        let hi = *v.iter().max().unwrap();
        (lo > 0).then(|| hi as f64 / lo as f64)
    }

    pub fn merge(&mut self, other: &SlotErrorCounts) {
        self.insertions += other.insertions;
        self.deletions += other.deletions;
        self.substitutions += other.substitutions;
        self.correct_symbols += other.correct_symbols;
        self.correct_empties += other.correct_empties;
        self.total_slots += other.total_slots;
    }
}

/// Classifies every detected slot against the emission schedule.
///
/// `detections` must list slots `0..T` in order with `T >= truth.total_slots`;
/// slots past the last emission are empty in the truth.
pub fn classify_slot_errors(truth: &TxSchedule, detections: &[DetectionEvent]) -> Result<SlotErrorCounts> {
    let t_len = detections.len() as u64;
    if t_len < truth.total_slots {
        return Err(SimError::LengthMismatch {
            expected: truth.total_slots as usize,
            actual: detections.len(),
        });
    }
    if let Some((k, _)) = detections.iter().enumerate().find(|(k, d)| d.slot.0 != *k as u64) {
        return Err(SimError::config(format!("detection {k} is not for slot {k}")));
    }
    let sent = truth.slot_symbols(t_len);
    let mut counts = SlotErrorCounts {
        total_slots: t_len,
        ..Default::default()
    };
    for (s, d) in sent.iter().zip(detections) {
        match (*s, d.verdict) {
            (None, Verdict::Empty) => counts.correct_empties += 1,
            (None, Verdict::Symbol(_)) => counts.insertions += 1,
            (Some(_), Verdict::Empty) => counts.deletions += 1,
            (Some(i), Verdict::Symbol(k)) if i == k => counts.correct_symbols += 1,
            (Some(_), Verdict::Symbol(_)) => counts.substitutions += 1,
        }
    }
    Ok(counts)
}

/// Edit operation turning the truth into the decoded stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EditOp {
    Match,
    Sub,
    /// Truth element missing from the decoded stream.
    Del,
    /// Decoded element with no counterpart in the truth.
    Ins,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AlignmentReport {
    pub edit_distance: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub substitutions: usize,
    pub matches: usize,
    pub ops: Vec<EditOp>,
}

impl AlignmentReport {
    /// Rebuilds the decoded stream from the truth by replaying `ops`.
    pub fn replay<T: Clone>(&self, truth: &[T], decoded: &[T]) -> Vec<T> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::with_capacity(decoded.len());
        for op in &self.ops {
            match op {
                EditOp::Match => {
                    out.push(truth[i].clone());
                    i += 1;
                    j += 1;
                }
                EditOp::Sub | EditOp::Ins => {
                    out.push(decoded[j].clone());
                    i += usize::from(*op == EditOp::Sub);
                    j += 1;
                }
                EditOp::Del => i += 1,
            }
        }
        out
    }
}

/// Unit-cost Levenshtein alignment with traceback preference
/// MATCH > SUB > DEL > INS.
pub fn align<T: PartialEq>(truth: &[T], decoded: &[T]) -> AlignmentReport {
    let (n, m) = (truth.len(), decoded.len());
    let w = m + 1;
    let mut dist = vec![0u32; (n + 1) * w];
    for (j, d) in dist[..w].iter_mut().enumerate() {
        *d = j as u32;
    }
    for i in 1..=n {
        dist[i * w] = i as u32;
        for j in 1..=m {
            let diag = dist[(i - 1) * w + j - 1] + u32::from(truth[i - 1] != decoded[j - 1]);
            let up = dist[(i - 1) * w + j] + 1;
            let left = dist[i * w + j - 1] + 1;
            dist[i * w + j] = diag.min(up).min(left);
        }
    }

    let mut report = AlignmentReport {
        edit_distance: dist[n * w + m] as usize,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dist[i * w + j];
        if i > 0 && j > 0 && truth[i - 1] == decoded[j - 1] && here == dist[(i - 1) * w + j - 1] {
            report.ops.push(EditOp::Match);
            report.matches += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && here == dist[(i - 1) * w + j - 1] + 1 {
            report.ops.push(EditOp::Sub);
            report.substitutions += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && here == dist[(i - 1) * w + j] + 1 {
            report.ops.push(EditOp::Del);
            report.deletions += 1;
            i -= 1;
        } else {
            report.ops.push(EditOp::Ins);
            report.insertions += 1;
            j -= 1;
        }
    }
    report.ops.reverse();
    report
}

/// Index-by-index accuracy against the best alignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PropagationProfile {
    /// One flag per index up to the longer stream; overhang counts as error.
    pub positional_error_flags: Vec<u8>,
    /// Maximal error run length -> number of runs.
    pub burst_length_histogram: BTreeMap<usize, usize>,
    pub positional_mer: f64,
    pub aligned_mer: f64,
    pub alignment: AlignmentReport,
}

impl PropagationProfile {
    pub fn positional_errors(&self) -> usize {
        self.positional_error_flags.iter().map(|&f| usize::from(f)).sum()
    }

    pub fn burst_count(&self) -> usize {
        self.burst_length_histogram.values().sum()
    }

    pub fn max_burst(&self) -> usize {
        self.burst_length_histogram
            .keys()
            .next_back()
            .copied()
            .unwrap_or(0)
    }

    pub fn mean_burst(&self) -> f64 {
        match self.burst_count() {
            0 => 0.0,
            c => self.positional_errors() as f64 / c as f64,
        }
    }
}

/// Flags positional mismatches and groups them into bursts.
///
/// Both rates are normalized by `max(|truth|, |decoded|)`, which keeps them
/// in `[0, 1]` and guarantees `positional_mer >= aligned_mer`.
pub fn propagation_profile<T: PartialEq>(truth: &[T], decoded: &[T]) -> Result<PropagationProfile> {
    if truth.is_empty() {
        return Err(SimError::EmptyTruth);
    }
    let len = truth.len().max(decoded.len());
    let flags: Vec<u8> = (0..len)
        .map(|k| match (truth.get(k), decoded.get(k)) {
            (Some(a), Some(b)) => u8::from(a != b),
            _ => 1,
        })
        .collect();

    let mut hist = BTreeMap::new();
    let mut run = 0usize;
    for &f in flags.iter().chain(std::iter::once(&0)) {
        if f == 1 {
            run += 1;
        } else if run > 0 {
            *hist.entry(run).or_insert(0) += 1;
            run = 0;
        }
    }

    let alignment = align(truth, decoded);
    let errors: usize = flags.iter().map(|&f| usize::from(f)).sum();
    Ok(PropagationProfile {
        positional_mer: errors as f64 / len as f64,
        aligned_mer: alignment.edit_distance as f64 / len as f64,
        positional_error_flags: flags,
        burst_length_histogram: hist,
        alignment,
    })
}
