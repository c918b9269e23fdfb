//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on failure.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use common::{brute_force_decode, random_instance};
use rnm_core::channel_model::{awgn_stream, ChannelParams, Constellation};
use rnm_core::detectors::{
    events_from_verdicts, ml_sequence_decode, naive_decode, DetectorMode, SlotDetector,
};
use rnm_core::energy_model::{
    break_even_overhead, continuous_energy, rnm_energy, standard_grid, tradeoff_sweep, EnergyParams,
};
use rnm_core::error_analysis::propagation_profile;
use rnm_core::experiment::{
    distinct_messages, inject, ppm_frames_from_detections, random_messages, results_csv_string, run,
    run_feedback, schedule_slot_values, ExperimentConfig, InjectAction, ReceiverKind, SchemeKind,
};
use rnm_core::feedback_codec::{compress, decompress, default_grid, random_message, FeedbackConfig};
use rnm_core::rnm_codec::{encode_stream, ppm_encode};
use rnm_core::spectrum::{expansion_factor, ExpansionSetup};
use rnm_core::sync_rng::{derive_substream, rng_word, BitCursor};
use rnm_core::{Execution, PpmConfig, RngSeed, RnmConfig, SlotIndex, SyncRng};

const VECTORS: &str = include_str!("../data/rng_vectors.csv");

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn rng_conformance() -> Check {
    ensure(
        rng_word(RngSeed(0), SlotIndex(0)) == 0xE220_A839_7B1D_CDAF,
        "known answer",
    )?;
    let mut rows = 0;
    for (n, line) in VECTORS.lines().skip(1).enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let seed: u64 = f[0].parse().map_err(|e| format!("row {n}: {e}"))?;
        let slot: u64 = f[1].parse().map_err(|e| format!("row {n}: {e}"))?;
        let word = u64::from_str_radix(f[2], 16).map_err(|e| format!("row {n}: {e}"))?;
        ensure(
            rng_word(RngSeed(seed), SlotIndex(slot)) == word,
            format!("vector row {n}"),
        )?;
        rows += 1;
    }
    ensure(rows == 100, format!("{rows} vectors"))?;
    Ok(format!("known answer and {rows} vectors exact"))
}

fn rnm_round_trip() -> Check {
    let mut notes = Vec::new();
    for (bits, symbols) in [(8, 4), (12, 8)] {
        let cfg = RnmConfig::new(bits, symbols).unwrap();
        let n = 10_000;
        let msgs = random_messages(&cfg, RngSeed(21), n);
        let link = SyncRng::new(RngSeed(22));
        let sched = encode_stream(&msgs, &link, &cfg, u64::MAX).map_err(|e| e.to_string())?;
        let c = Constellation::psk(symbols, 1.0).unwrap();
        let p = ChannelParams::new(1e-12).unwrap();
        let y = awgn_stream(
            &schedule_slot_values(&sched, &c, sched.total_slots),
            &p,
            &mut BitCursor::new(RngSeed(23)),
        );
        let det = SlotDetector::new(c, &p, DetectorMode::Ml);
        ensure(
            naive_decode(&det.detect_slots(&y), &link, &cfg) == msgs,
            "messages differ",
        )?;
        let q = cfg.match_prob();
        let mean = sched.total_slots as f64 / n as f64;
        let se = ((1.0 - q).sqrt() / q) / (n as f64).sqrt();
        let expect = f64::from(1u32 << bits) / f64::from(symbols);
        ensure(
            (mean - expect).abs() < 3.0 * se,
            format!("B={bits}: mean wait {mean} vs {expect}"),
        )?;
        notes.push(format!("B={bits},M={symbols} wait {mean:.2}/{expect}"));
    }
    Ok(format!("10^4 messages recovered; {}", notes.join(", ")))
}

fn three_error_types() -> Check {
    let mut c = ExperimentConfig::rnm("c3", RnmConfig::new(8, 4).unwrap(), vec![10.0]);
    c.trials = 40;
    c.messages_per_trial = 400;
    let row = run(&c, Execution::Parallel).map_err(|e| e.to_string())?.remove(0);
    let k = row.counts;
    ensure(row.slots >= 1_000_000, format!("only {} slots", row.slots))?;
    ensure(k.is_consistent(), "counts do not sum to the slot total")?;
    ensure(
        k.insertions > 0 && k.deletions > 0 && k.substitutions > 0,
        format!("ins={} del={} sub={}", k.insertions, k.deletions, k.substitutions),
    )?;
    ensure(row.positional_mer >= row.aligned_mer, "positional < aligned")?;
    Ok(format!(
        "{} slots: ins={} del={} sub={}, max/min ratio {:.2}",
        row.slots,
        k.insertions,
        k.deletions,
        k.substitutions,
        k.max_min_ratio().unwrap()
    ))
}

fn propagation() -> Check {
    let cfg = RnmConfig::new(8, 4).unwrap();
    let msgs = distinct_messages(&cfg, RngSeed(31), 100).unwrap();
    let link = SyncRng::new(RngSeed(32));
    let sched = encode_stream(&msgs, &link, &cfg, u64::MAX).unwrap();
    let verdicts: Vec<_> = sched
        .slot_symbols(sched.total_slots)
        .into_iter()
        .map(rnm_core::detectors::Verdict::from_option)
        .collect();
    let clean = events_from_verdicts(&verdicts);
    let at = 37;
    let dropped = inject(&clean, InjectAction::Drop(sched.events[at].slot.0)).unwrap();
    let v: Vec<_> = dropped.iter().map(|d| d.verdict).collect();
    let prof = propagation_profile(&msgs, &naive_decode(&v, &link, &cfg)).unwrap();
    let flags = &prof.positional_error_flags;
    ensure(flags[..at].iter().all(|&f| f == 0), "errors before the deletion")?;
    ensure(flags[at..].iter().all(|&f| f == 1), "gap after the deletion")?;
    ensure(
        prof.burst_count() == 1 && prof.max_burst() == 100 - at,
        "burst shape",
    )?;

    let ppm = PpmConfig::new(8, 4).unwrap();
    let mut cur = BitCursor::new(RngSeed(33));
    let frames: Vec<u64> = (0..100)
        .map(|_| rnm_core::sync_rng::uniform_below(&mut cur, ppm.frame_space()))
        .collect();
    let mut pv = vec![rnm_core::detectors::Verdict::Empty; 800];
    for (f, &x) in frames.iter().enumerate() {
        let (pos, sym) = ppm_encode(x, &ppm).unwrap();
        pv[f * 8 + pos as usize] = rnm_core::detectors::Verdict::Symbol(sym);
    }
    let pe = events_from_verdicts(&pv);
    let target = pe.iter().skip(at * 8).find(|d| !d.verdict.is_empty()).unwrap();
    let sym = target.verdict.symbol().unwrap();
    let swapped = inject(&pe, InjectAction::Swap(target.slot.0, (sym + 1) % 4)).unwrap();
    let pprof = propagation_profile(&frames, &ppm_frames_from_detections(&swapped, &ppm).unwrap()).unwrap();
    ensure(pprof.positional_errors() == 1, "PPM error propagated")?;

    let mut c = ExperimentConfig::rnm("c4", cfg, vec![0.0, 5.0, 10.0, 15.0]);
    c.trials = 20;
    let rows = run(&c, Execution::Parallel).map_err(|e| e.to_string())?;
    for r in &rows {
        ensure(
            r.positional_mer >= r.aligned_mer,
            format!(
                "{} dB: {} < {}",
                r.snr_db.unwrap(),
                r.positional_mer,
                r.aligned_mer
            ),
        )?;
    }
    let mc: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{}dB {:.3}>={:.3}",
                r.snr_db.unwrap(),
                r.positional_mer,
                r.aligned_mer
            )
        })
        .collect();
    Ok(format!(
        "deletion at {at} flags all later positions; PPM swap costs 1 frame; {}",
        mc.join(", ")
    ))
}

fn sequence_optimality() -> Check {
    let mut cur = BitCursor::new(RngSeed(41));
    for n in 0..500u64 {
        let (cfg, k, ys, snr_db) = random_instance(&mut cur);
        let source = SyncRng::new(derive_substream(RngSeed(42), n));
        let c = Constellation::psk(cfg.symbols(), 1.0).unwrap();
        let p = ChannelParams::from_snr_db(1.0, snr_db).unwrap();
        let est = ml_sequence_decode(&ys, &source, &cfg, &c, &p, k).map_err(|e| e.to_string())?;
        let (_, sched) = brute_force_decode(&ys, &source, &cfg, &c, &p, k).ok_or("no schedule")?;
        let got: Vec<(u64, u32)> = est.events.iter().map(|e| (e.slot.0, e.symbol_index)).collect();
        ensure(got == sched, format!("instance {n} disagrees"))?;
    }
    let mut c = ExperimentConfig::rnm("c5", RnmConfig::new(8, 4).unwrap(), vec![0.0, 5.0]);
    c.trials = 400;
    c.messages_per_trial = 25;
    c.receiver = ReceiverKind::Both;
    let rows = run(&c, Execution::Parallel).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for pair in rows.chunks(2) {
        let (naive, seq) = (&pair[0], &pair[1]);
        ensure(
            seq.aligned_mer <= naive.aligned_mer,
            format!(
                "{} dB: sequence {} > naive {}",
                naive.snr_db.unwrap(),
                seq.aligned_mer,
                naive.aligned_mer
            ),
        )?;
        notes.push(format!(
            "{}dB seq {:.3} <= naive {:.3}",
            naive.snr_db.unwrap(),
            seq.aligned_mer,
            naive.aligned_mer
        ));
    }
    Ok(format!("500/500 exhaustive matches; {}", notes.join(", ")))
}

fn energy_claims() -> Check {
    let rf_only = EnergyParams::new(0.0, 1.0, 1.0).unwrap();
    for m in [2u32, 4, 8] {
        let mut last = f64::INFINITY;
        for b in (2..=16).filter(|&b| u64::from(m) < 1 << b) {
            let e = rnm_energy(&rf_only, &RnmConfig::new(b, m).unwrap()).e_total_per_bit;
            ensure(e < last, format!("M={m}: not decreasing at B={b}"))?;
            last = e;
        }
    }
    let base = EnergyParams::new(1.0, 1.0, 1.0).unwrap();
    let cfg = RnmConfig::new(8, 4).unwrap();
    let p_star = break_even_overhead(&base, &cfg, 4)
        .unwrap()
        .ok_or("no crossing")?;
    ensure((p_star - 0.05).abs() < 1e-12, format!("P* = {p_star}"))?;
    let at = base.with_overhead_power(p_star).unwrap();
    let gap = rnm_energy(&at, &cfg).e_total_per_bit - continuous_energy(&at, 4).unwrap().e_total_per_bit;
    ensure(gap.abs() < 1e-12, format!("closed forms differ by {gap}"))?;
    for p_oh in [10.0, 20.0, 100.0, 1e4] {
        let t = tradeoff_sweep(&base.with_overhead_power(p_oh).unwrap(), &standard_grid()).unwrap();
        ensure(
            t.best().scheme == t.fastest().scheme,
            format!("P_oh={p_oh}: argmin {:?} is not the fastest", t.best().scheme),
        )?;
    }
    Ok(format!(
        "RF-only monotone in B; P*={p_star} (|gap| {:.1e}); argmin = fastest for P_oh >= 10",
        gap.abs()
    ))
}

fn spectral_expansion() -> Check {
    let cfg = RnmConfig::new(8, 4).unwrap();
    let mut worst = f64::INFINITY;
    let mut worst_parseval = 0.0f64;
    for seed in 1..=10u64 {
        let sharp = ExpansionSetup {
            seed,
            ..ExpansionSetup::default()
        };
        let smooth = ExpansionSetup {
            ramp_fraction: 0.25,
            ..sharp
        };
        let a = expansion_factor(&cfg, 4, &sharp).map_err(|e| e.to_string())?;
        let b = expansion_factor(&cfg, 4, &smooth).map_err(|e| e.to_string())?;
        for psd in [&a.rnm_psd, &a.continuous_psd, &b.rnm_psd, &b.continuous_psd] {
            let err = (psd.total_power() - psd.mean_power).abs() / psd.mean_power;
            worst_parseval = worst_parseval.max(err);
        }
        ensure(a.factor > 1.0, format!("seed {seed}: factor {}", a.factor))?;
        ensure(a.obw_rnm >= b.obw_rnm, format!("seed {seed}: ramp widened OBW"))?;
        worst = worst.min(a.factor);
    }
    ensure(worst_parseval < 0.01, format!("Parseval off by {worst_parseval}"))?;
    Ok(format!(
        "min factor {worst:.3} over 10 seeds; worst Parseval error {worst_parseval:.1e}"
    ))
}

fn feedback_codec() -> Check {
    let cfg = FeedbackConfig::new(5, 4).unwrap();
    for k in 0..1000u64 {
        let mut cur = BitCursor::new(derive_substream(RngSeed(51), k));
        let msg = random_message(5, &mut cur);
        let link = derive_substream(RngSeed(52), k);
        let r = compress(&msg, link, &cfg, 1 << 20).map_err(|e| e.to_string())?;
        ensure(decompress(&r, link, &cfg) == msg, format!("round trip {k}"))?;
    }
    let q = 1.0 - (23.0f64 / 24.0).powi(8);
    let (mean_ref, sigma) = (1.0 / q, (1.0 - q).sqrt() / q);
    let mut c = ExperimentConfig::rnm("c8", RnmConfig::new(8, 4).unwrap(), vec![]);
    c.scheme = SchemeKind::Feedback;
    c.feedback = Some(FeedbackConfig::new(4, 3).unwrap());
    c.trials = 10_000;
    c.max_slots = 1 << 20;
    let row = *run_feedback(&c, Execution::Parallel)
        .map_err(|e| e.to_string())?
        .last()
        .unwrap();
    let mc = row.expected_slots_mc.unwrap();
    ensure(
        (row.expected_slots_analytic - mean_ref).abs() < 1e-12,
        "analytic mean",
    )?;
    ensure(
        (mc - mean_ref).abs() < 3.0 * sigma / 100.0,
        format!("mean slots {mc} vs {mean_ref}"),
    )?;
    for (n, cs) in default_grid() {
        for cc in cs {
            let f = FeedbackConfig::new(n, cc).unwrap();
            ensure(f64::from(cc) < f.log2_message_space(), format!("N={n} C={cc}"))?;
        }
    }
    Ok(format!(
        "1000 round trips exact; N=4,C=3 mean {mc:.4} vs {mean_ref:.4} (3 sigma {:.4})",
        3.0 * sigma / 100.0
    ))
}

fn determinism() -> Check {
    let mut rnm = ExperimentConfig::rnm("c9", RnmConfig::new(6, 4).unwrap(), vec![0.0, 8.0]);
    rnm.trials = 24;
    rnm.messages_per_trial = 30;
    rnm.receiver = ReceiverKind::Both;
    let mut ppm = ExperimentConfig::ppm("c9p", PpmConfig::new(8, 2).unwrap(), vec![2.0]);
    ppm.trials = 24;
    let mut fb = rnm.clone();
    fb.scheme = SchemeKind::Feedback;
    fb.feedback = Some(FeedbackConfig::new(4, 2).unwrap());
    let render = |exec| -> Result<String, String> {
        let mut s = results_csv_string(&run(&rnm, exec).map_err(|e| e.to_string())?).unwrap();
        s += &results_csv_string(&run(&ppm, exec).map_err(|e| e.to_string())?).unwrap();
        let mut buf = Vec::new();
        rnm_core::feedback_codec::write_table_csv(
            &run_feedback(&fb, exec).map_err(|e| e.to_string())?,
            &mut buf,
        )
        .unwrap();
        Ok(s + &String::from_utf8(buf).unwrap())
    };
    let one = render(Execution::Sequential)?;
    let again = render(Execution::Sequential)?;
    ensure(one == again, "re-run differs")?;
    for threads in [2, 8] {
        ensure(
            render(Execution::Threads(threads))? == one,
            format!("{threads} threads differ"),
        )?;
    }
    Ok(format!("{} bytes identical at 1, 2 and 8 threads", one.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("RNG conformance", rng_conformance),
        ("RNM round trip and waiting time", rnm_round_trip),
        ("three error types", three_error_types),
        ("error propagation", propagation),
        ("sequence decoder optimality", sequence_optimality),
        ("energy trade-off", energy_claims),
        ("spectral expansion", spectral_expansion),
        ("feedback codec", feedback_codec),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "criterion {}: {tag} {name} ({:.1}s): {detail}",
            n + 1,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/9 passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
