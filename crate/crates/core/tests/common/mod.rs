#![allow(dead_code)]

use rnm_core::channel_model::{ChannelParams, ComplexSample, Constellation};
use rnm_core::sync_rng::{uniform_below, unit_fraction, BitCursor, SlotWords};
use rnm_core::RnmConfig;

/// Exhaustive ML schedule search: every `t_1 < .. < t_K` and symbol choice,
/// keeping only schedules where each message first matches at its own slot.
/// Returns `(log_likelihood, [(slot, symbol)])`.
pub fn brute_force_decode<S: SlotWords>(
    ys: &[ComplexSample],
    source: &S,
    cfg: &RnmConfig,
    constellation: &Constellation,
    params: &ChannelParams,
    k: usize,
) -> Option<(f64, Vec<(u64, u32)>)> {
    let t_len = ys.len();
    let m = cfg.symbols();
    let words: Vec<u32> = (0..t_len as u64).map(|t| source.bits(t, cfg.bits())).collect();
    let mut best: Option<(f64, Vec<(u64, u32)>)> = None;

    let mut slots = vec![0usize; k];
    let mut syms = vec![0u32; k];
    fn next_combo(slots: &mut [usize], n: usize) -> bool {
        let k = slots.len();
        for i in (0..k).rev() {
            if slots[i] < n - k + i {
                slots[i] += 1;
                for j in i + 1..k {
                    slots[j] = slots[j - 1] + 1;
                }
                return true;
            }
        }
        false
    }
    for (i, s) in slots.iter_mut().enumerate() {
        *s = i;
    }
    loop {
        let combos = (m as usize).pow(k as u32);
        for code in 0..combos {
            let mut c = code;
            for s in syms.iter_mut() {
                *s = (c % m as usize) as u32;
                c /= m as usize;
            }
            let mut feasible = true;
            let mut start = 0usize;
            for j in 0..k {
                let msg = words[slots[j]] ^ syms[j];
                if (start..slots[j]).any(|u| (words[u] ^ msg) < m) {
                    feasible = false;
                    break;
                }
                start = slots[j] + 1;
            }
            if !feasible {
                continue;
            }
            let mut ll = 0.0;
            for (t, y) in ys.iter().enumerate() {
                let x = match slots.iter().position(|&s| s == t) {
                    Some(j) => constellation.point(syms[j]),
                    None => ComplexSample::new(0.0, 0.0),
                };
                ll -= (y - x).norm_sqr() / params.n0();
            }
            if best.as_ref().is_none_or(|(b, _)| ll > *b) {
                let sched = slots.iter().zip(&syms).map(|(&t, &i)| (t as u64, i)).collect();
                best = Some((ll, sched));
            }
        }
        if !next_combo(&mut slots, t_len) {
            break;
        }
    }
    best
}

/// Random small decoding instance: `(cfg, k, received slots, snr_db)`.
pub fn random_instance(cur: &mut BitCursor) -> (RnmConfig, usize, Vec<ComplexSample>, f64) {
    let bits = 2 + uniform_below(cur, 2) as u32;
    let max_m = if bits == 2 { 3 } else { 4 };
    let symbols = 2 + uniform_below(cur, max_m - 1) as u32;
    let cfg = RnmConfig::new(bits, symbols).unwrap();
    let k = 1 + uniform_below(cur, 2) as usize;
    let t_len = k + uniform_below(cur, (9 - k) as u64) as usize;
    let snr_db = -2.0 + 14.0 * unit_fraction(cur);
    let amp = 1.5;
    let ys = (0..t_len)
        .map(|_| {
            ComplexSample::new(
                amp * (2.0 * unit_fraction(cur) - 1.0),
                amp * (2.0 * unit_fraction(cur) - 1.0),
            )
        })
        .collect();
    (cfg, k, ys, snr_db)
}
