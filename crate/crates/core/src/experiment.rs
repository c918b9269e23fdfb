//! Experiment configuration, the deterministic Monte Carlo runner, error
//! injection and result CSVs.
//!
//! Every trial derives its own substreams from `(seed, trial)`:
//! substream 0 draws messages, 1 seeds the synchronized link generator and
//! 2 (split again per SNR point) drives the channel noise. Messages are
//! therefore identical across SNR points and receivers, and output depends
//! only on the configuration, never on the thread count.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::channel_model::{awgn_stream, ChannelParams, ComplexSample, Constellation};
use crate::detectors::{
    events_from_verdicts, ml_sequence_decode, naive_decode, two_stage_detect, DetectionEvent, DetectorMode,
    SlotDetector, Verdict,
};
use crate::energy_model::{
    fmt_f64, measured_energy, standard_grid, tradeoff_sweep, EnergyBreakdown, EnergyParams,
};
use crate::error::{Result, SimError};
use crate::error_analysis::{classify_slot_errors, propagation_profile, SlotErrorCounts};
use crate::exec::{map_indexed, Execution};
use crate::feedback_codec::{compress, random_message, CompressionRow, FeedbackConfig};
use crate::rnm_codec::{
    encode_stream, ppm_decode, ppm_encode, Message, PpmConfig, RnmConfig, TxEvent, TxSchedule,
};
use crate::spectrum::{expansion_factor, ExpansionReport, ExpansionSetup};
use crate::sync_rng::{derive_substream, uniform_below, BitCursor, RngSeed, SlotIndex, SyncRng};

/// Bumped whenever [`RESULT_COLUMNS`] changes.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const RESULT_COLUMNS: [&str; 20] = [
    "experiment",
    "scheme",
    "B",
    "M",
    "L",
    "C",
    "snr_db",
    "trials",
    "slots",
    "insertions",
    "deletions",
    "substitutions",
    "positional_mer",
    "aligned_mer",
    "mean_burst",
    "max_burst",
    "e_rf_per_bit",
    "e_oh_per_bit",
    "e_total_per_bit",
    "latency_per_bit",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeKind {
    Rnm,
    Ppm,
    Feedback,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    #[default]
    Ml,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReceiverKind {
    #[default]
    Naive,
    Sequence,
    Both,
}

fn default_experiment() -> String {
    "experiment".into()
}
fn default_seed() -> u64 {
    1
}
fn default_trials() -> usize {
    10
}
fn default_messages() -> usize {
    100
}
fn default_max_slots() -> u64 {
    1 << 32
}
fn default_order() -> u32 {
    4
}

/// One experiment, read from JSON with snake_case keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_experiment")]
    pub experiment: String,
    pub scheme: SchemeKind,
    #[serde(default)]
    pub rnm: Option<RnmConfig>,
    #[serde(default)]
    pub ppm: Option<PpmConfig>,
    #[serde(default)]
    pub feedback: Option<FeedbackConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_messages")]
    pub messages_per_trial: usize,
    #[serde(default)]
    pub snr_db_list: Vec<f64>,
    #[serde(default)]
    pub detector: DetectorKind,
    #[serde(default)]
    pub receiver: ReceiverKind,
    #[serde(default = "default_max_slots")]
    pub max_slots: u64,
    #[serde(default)]
    pub energy: EnergyParams,
    /// M' of the continuous reference in spectrum experiments.
    #[serde(default = "default_order")]
    pub continuous_order: u32,
    #[serde(default)]
    pub spectrum: ExpansionSetup,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Minimal RNM configuration with defaults elsewhere.
    pub fn rnm(experiment: &str, cfg: RnmConfig, snr_db_list: Vec<f64>) -> Self {
        Self {
            experiment: experiment.into(),
            scheme: SchemeKind::Rnm,
            rnm: Some(cfg),
            ppm: None,
            feedback: None,
            seed: default_seed(),
            trials: default_trials(),
            messages_per_trial: default_messages(),
            snr_db_list,
            detector: DetectorKind::Ml,
            receiver: ReceiverKind::Naive,
            max_slots: default_max_slots(),
            energy: EnergyParams::default(),
            continuous_order: default_order(),
            spectrum: ExpansionSetup::default(),
            output: None,
        }
    }

    pub fn ppm(experiment: &str, cfg: PpmConfig, snr_db_list: Vec<f64>) -> Self {
        Self {
            scheme: SchemeKind::Ppm,
            rnm: None,
            ppm: Some(cfg),
            ..Self::rnm(experiment, RnmConfig::new(2, 2).unwrap(), snr_db_list)
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(SimError::config("trials must be >= 1"));
        }
        if self.messages_per_trial == 0 {
            return Err(SimError::config("messages_per_trial must be >= 1"));
        }
        if self.max_slots == 0 {
            return Err(SimError::config("max_slots must be >= 1"));
        }
        match self.scheme {
            SchemeKind::Rnm if self.rnm.is_none() => {
                return Err(SimError::config("scheme rnm needs an \"rnm\" block"))
            }
            SchemeKind::Ppm if self.ppm.is_none() => {
                return Err(SimError::config("scheme ppm needs a \"ppm\" block"))
            }
            _ => {}
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return Err(SimError::config("snr_db_list entries must be finite"));
        }
        if self.scheme == SchemeKind::Ppm && self.receiver != ReceiverKind::Naive {
            return Err(SimError::config("PPM uses the two-stage frame detector only"));
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the checks only channel runs need.
    pub fn validate_channel(&self) -> Result<()> {
        self.validate()?;
        if self.snr_db_list.is_empty() {
            return Err(SimError::config("snr_db_list must not be empty"));
        }
        Ok(())
    }

    fn rnm_cfg(&self) -> Result<RnmConfig> {
        self.rnm.ok_or_else(|| SimError::config("missing \"rnm\" block"))
    }

    fn ppm_cfg(&self) -> Result<PpmConfig> {
        self.ppm.ok_or_else(|| SimError::config("missing \"ppm\" block"))
    }
}

/// One aggregated line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub scheme: String,
    pub bits: Option<u32>,
    pub symbols: Option<u32>,
    pub frame_slots: Option<u32>,
    pub report_bits: Option<u32>,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub messages: u64,
    pub slots: u64,
    pub counts: SlotErrorCounts,
    pub positional_mer: f64,
    pub aligned_mer: f64,
    pub mean_burst: f64,
    pub max_burst: u64,
    pub energy: EnergyBreakdown,
}

impl ResultRow {
    fn record(&self) -> Vec<String> {
        let opt = |v: Option<u32>| v.map(|x| x.to_string()).unwrap_or_default();
        vec![
            self.experiment.clone(),
            self.scheme.clone(),
            opt(self.bits),
            opt(self.symbols),
            opt(self.frame_slots),
            opt(self.report_bits),
            self.snr_db.map(|s| format!("{s}")).unwrap_or_default(),
            self.trials.to_string(),
            self.slots.to_string(),
            self.counts.insertions.to_string(),
            self.counts.deletions.to_string(),
            self.counts.substitutions.to_string(),
            format!("{:.8}", self.positional_mer),
            format!("{:.8}", self.aligned_mer),
            format!("{:.6}", self.mean_burst),
            self.max_burst.to_string(),
            fmt_f64(self.energy.e_rf_per_bit),
            fmt_f64(self.energy.e_oh_per_bit),
            fmt_f64(self.energy.e_total_per_bit),
            fmt_f64(self.energy.latency_per_bit),
        ]
    }
}

/// Writes the header and one record per row.
pub fn write_results_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RESULT_COLUMNS)?;
    for row in rows {
        w.write_record(row.record())?;
    }
    w.flush()?;
    Ok(())
}

pub fn results_csv_string(rows: &[ResultRow]) -> Result<String> {
    let mut buf = Vec::new();
    write_results_csv(rows, &mut buf)?;
    String::from_utf8(buf).map_err(|e| SimError::Io(e.to_string()))
}

/// Per-trial tallies; summed in trial order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Tally {
    counts: SlotErrorCounts,
    positional_errors: u64,
    flag_len: u64,
    edit_distance: u64,
    bursts: u64,
    max_burst: u64,
    slots: u64,
    emissions: u64,
    messages: u64,
}

impl Tally {
    fn of<T: PartialEq>(counts: SlotErrorCounts, truth: &[T], decoded: &[T], slots: u64) -> Result<Self> {
        let p = propagation_profile(truth, decoded)?;
        Ok(Self {
            counts,
            positional_errors: p.positional_errors() as u64,
            flag_len: p.positional_error_flags.len() as u64,
            edit_distance: p.alignment.edit_distance as u64,
            bursts: p.burst_count() as u64,
            max_burst: p.max_burst() as u64,
            slots,
            emissions: truth.len() as u64,
            messages: truth.len() as u64,
        })
    }

    fn add(&mut self, o: &Tally) {
        self.counts.merge(&o.counts);
        self.positional_errors += o.positional_errors;
        self.flag_len += o.flag_len;
        self.edit_distance += o.edit_distance;
        self.bursts += o.bursts;
        self.max_burst = self.max_burst.max(o.max_burst);
        self.slots += o.slots;
        self.emissions += o.emissions;
        self.messages += o.messages;
    }

    fn ratio(a: u64, b: u64) -> f64 {
        if b == 0 {
            0.0
        } else {
            a as f64 / b as f64
        }
    }
}

struct TrialSeeds {
    messages: RngSeed,
    link: RngSeed,
    noise: RngSeed,
}

fn trial_seeds(seed: u64, trial: usize, snr_index: usize) -> TrialSeeds {
    let base = derive_substream(RngSeed(seed), trial as u64);
    TrialSeeds {
        messages: derive_substream(base, 0),
        link: derive_substream(base, 1),
        noise: derive_substream(derive_substream(base, 2), snr_index as u64),
    }
}

/// `k` uniform messages of `cfg.bits()` bits.
pub fn random_messages(cfg: &RnmConfig, seed: RngSeed, k: usize) -> Vec<Message> {
    let mut cur = BitCursor::new(seed);
    (0..k)
        .map(|_| Message(uniform_below(&mut cur, cfg.message_space()) as u32))
        .collect()
}

/// `k` pairwise-distinct messages (partial Fisher-Yates over the message space).
pub fn distinct_messages(cfg: &RnmConfig, seed: RngSeed, k: usize) -> Result<Vec<Message>> {
    let space = cfg.message_space();
    if k as u64 > space || space > 1 << 24 {
        return Err(SimError::config(format!(
            "cannot draw {k} distinct messages from a space of {space}"
        )));
    }
    let mut pool: Vec<u32> = (0..space as u32).collect();
    let mut cur = BitCursor::new(seed);
    for i in 0..k {
        let j = i + uniform_below(&mut cur, space - i as u64) as usize;
        pool.swap(i, j);
    }
    Ok(pool[..k].iter().map(|&m| Message(m)).collect())
}

/// Slot values of a schedule over `total` slots.
pub fn schedule_slot_values(
    schedule: &TxSchedule,
    constellation: &Constellation,
    total: u64,
) -> Vec<ComplexSample> {
    schedule
        .slot_symbols(total)
        .into_iter()
        .map(|s| constellation.slot_value(s))
        .collect()
}

fn schedule_from_events(events: Vec<TxEvent>) -> TxSchedule {
    let total_slots = events.last().map_or(0, |e| e.slot.0 + 1);
    let mut prev = 0;
    let waits = events
        .iter()
        .map(|e| {
            let w = e.slot.0 + 1 - prev;
            prev = e.slot.0 + 1;
            w
        })
        .collect();
    TxSchedule {
        events,
        total_slots,
        waits,
    }
}

fn verdicts_from_events(events: &[TxEvent], total: usize) -> Vec<Verdict> {
    let mut v = vec![Verdict::Empty; total];
    for e in events {
        v[e.slot.0 as usize] = Verdict::Symbol(e.symbol_index);
    }
    v
}

fn detector_mode(kind: DetectorKind, cfg: &RnmConfig) -> DetectorMode {
    match kind {
        DetectorKind::Ml => DetectorMode::Ml,
        DetectorKind::Map => DetectorMode::map_for(cfg),
    }
}

/// Tallies for the naive receiver and/or the sequence decoder on one trial.
fn rnm_trial(
    config: &ExperimentConfig,
    cfg: &RnmConfig,
    trial: usize,
    snr_index: usize,
) -> Result<(Option<Tally>, Option<Tally>)> {
    let seeds = trial_seeds(config.seed, trial, snr_index);
    let es = config.energy.symbol_energy();
    let params = ChannelParams::from_snr_db(es, config.snr_db_list[snr_index])?;
    let constellation = Constellation::psk(cfg.symbols(), es)?;
    let link = SyncRng::new(seeds.link);

    let msgs = random_messages(cfg, seeds.messages, config.messages_per_trial);
    let schedule = encode_stream(&msgs, &link, cfg, config.max_slots)?;
    let total = schedule.total_slots;
    let x = schedule_slot_values(&schedule, &constellation, total);
    let y = awgn_stream(&x, &params, &mut BitCursor::new(seeds.noise));

    let naive = if config.receiver != ReceiverKind::Sequence {
        let det = SlotDetector::new(
            constellation.clone(),
            &params,
            detector_mode(config.detector, cfg),
        );
        let verdicts = det.detect_slots(&y);
        let counts = classify_slot_errors(&schedule, &events_from_verdicts(&verdicts))?;
        let decoded = naive_decode(&verdicts, &link, cfg);
        Some(Tally::of(counts, &msgs, &decoded, total)?)
    } else {
        None
    };

    let sequence = if config.receiver != ReceiverKind::Naive {
        let est = ml_sequence_decode(&y, &link, cfg, &constellation, &params, msgs.len())?;
        let verdicts = verdicts_from_events(&est.events, total as usize);
        let counts = classify_slot_errors(&schedule, &events_from_verdicts(&verdicts))?;
        Some(Tally::of(counts, &msgs, &est.messages, total)?)
    } else {
        None
    };
    Ok((naive, sequence))
}

fn ppm_trial(config: &ExperimentConfig, cfg: &PpmConfig, trial: usize, snr_index: usize) -> Result<Tally> {
    let seeds = trial_seeds(config.seed, trial, snr_index);
    let es = config.energy.symbol_energy();
    let params = ChannelParams::from_snr_db(es, config.snr_db_list[snr_index])?;
    let constellation = Constellation::psk(cfg.symbols(), es)?;
    let l = cfg.slots() as u64;

    let mut cur = BitCursor::new(seeds.messages);
    let frames: Vec<u64> = (0..config.messages_per_trial)
        .map(|_| uniform_below(&mut cur, cfg.frame_space()))
        .collect();
    let mut events = Vec::with_capacity(frames.len());
    for (f, &v) in frames.iter().enumerate() {
        let (pos, sym) = ppm_encode(v, cfg)?;
        events.push(TxEvent {
            slot: SlotIndex(f as u64 * l + u64::from(pos)),
            symbol_index: sym,
        });
    }
    let schedule = schedule_from_events(events);
    let total = frames.len() as u64 * l;
    let x = schedule_slot_values(&schedule, &constellation, total);
    let y = awgn_stream(&x, &params, &mut BitCursor::new(seeds.noise));

    let mut verdicts = vec![Verdict::Empty; total as usize];
    let mut decoded = Vec::with_capacity(frames.len());
    for (f, frame) in y.chunks_exact(l as usize).enumerate() {
        let (pos, sym) = two_stage_detect(frame, &constellation);
        verdicts[f * l as usize + pos as usize] = Verdict::Symbol(sym);
        decoded.push(ppm_decode(pos, sym, cfg));
    }
    let counts = classify_slot_errors(&schedule, &events_from_verdicts(&verdicts))?;
    Tally::of(counts, &frames, &decoded, total)
}

fn collect_in_order(results: Vec<Result<Tally>>) -> Result<Tally> {
    let mut total = Tally::default();
    for r in results {
        total.add(&r?);
    }
    Ok(total)
}

struct RowShape {
    scheme: &'static str,
    bits: Option<u32>,
    symbols: Option<u32>,
    frame_slots: Option<u32>,
    bits_per_message: u64,
}

fn make_row(config: &ExperimentConfig, shape: &RowShape, snr_db: f64, t: &Tally) -> ResultRow {
    ResultRow {
        experiment: config.experiment.clone(),
        scheme: shape.scheme.into(),
        bits: shape.bits,
        symbols: shape.symbols,
        frame_slots: shape.frame_slots,
        report_bits: None,
        snr_db: Some(snr_db),
        trials: config.trials,
        messages: t.messages,
        slots: t.slots,
        counts: t.counts,
        positional_mer: Tally::ratio(t.positional_errors, t.flag_len),
        aligned_mer: Tally::ratio(t.edit_distance, t.flag_len),
        mean_burst: Tally::ratio(t.positional_errors, t.bursts),
        max_burst: t.max_burst,
        energy: measured_energy(
            &config.energy,
            t.slots,
            t.emissions,
            t.messages * shape.bits_per_message,
        ),
    }
}

/// Runs an RNM or PPM channel experiment; one row per SNR point and receiver.
pub fn run(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ResultRow>> {
    config.validate_channel()?;
    match config.scheme {
        SchemeKind::Rnm => run_rnm(config, exec),
        SchemeKind::Ppm => run_ppm(config, exec),
        SchemeKind::Feedback => Err(SimError::config(
            "feedback experiments produce a compression table, use run_feedback",
        )),
    }
}

fn run_rnm(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ResultRow>> {
    let cfg = config.rnm_cfg()?;
    let mut rows = Vec::new();
    for (si, &snr) in config.snr_db_list.iter().enumerate() {
        let results = map_indexed(config.trials, exec, |trial| rnm_trial(config, &cfg, trial, si));
        let mut naive = Tally::default();
        let mut seq = Tally::default();
        for r in results {
            let (a, b) = r?;
            if let Some(a) = a {
                naive.add(&a);
            }
            if let Some(b) = b {
                seq.add(&b);
            }
        }
        let shape = |scheme| RowShape {
            scheme,
            bits: Some(cfg.bits()),
            symbols: Some(cfg.symbols()),
            frame_slots: None,
            bits_per_message: u64::from(cfg.bits()),
        };
        if config.receiver != ReceiverKind::Sequence {
            rows.push(make_row(config, &shape("rnm"), snr, &naive));
        }
        if config.receiver != ReceiverKind::Naive {
            rows.push(make_row(config, &shape("rnm-seq"), snr, &seq));
        }
    }
    Ok(rows)
}

fn run_ppm(config: &ExperimentConfig, exec: Execution) -> Result<Vec<ResultRow>> {
    let cfg = config.ppm_cfg()?;
    let shape = RowShape {
        scheme: "ppm",
        bits: None,
        symbols: Some(cfg.symbols()),
        frame_slots: Some(cfg.slots()),
        bits_per_message: u64::from(cfg.bits_per_frame()),
    };
    config
        .snr_db_list
        .iter()
        .enumerate()
        .map(|(si, &snr)| {
            let results = map_indexed(config.trials, exec, |trial| ppm_trial(config, &cfg, trial, si));
            Ok(make_row(config, &shape, snr, &collect_in_order(results)?))
        })
        .collect()
}

/// Feedback compression table: analytic and simulated latency per `(N, C)`.
///
/// Uses `config.feedback` (rows `C = 1..=c`) or the default grid; `trials`
/// random messages per row.
pub fn run_feedback(config: &ExperimentConfig, exec: Execution) -> Result<Vec<CompressionRow>> {
    let grid = match config.feedback {
        Some(f) => vec![(f.n(), (1..=f.c()).collect())],
        None => crate::feedback_codec::default_grid(),
    };
    let mut rows = Vec::new();
    for (n, cs) in grid {
        for c in cs {
            let cfg = FeedbackConfig::new(n, c)?;
            let base = derive_substream(RngSeed(config.seed), (u64::from(n) << 8) | u64::from(c));
            let slots = map_indexed(config.trials, exec, |k| {
                let mut src = BitCursor::new(derive_substream(base, 2 * k as u64));
                let msg = random_message(n, &mut src);
                compress(
                    &msg,
                    derive_substream(base, 2 * k as u64 + 1),
                    &cfg,
                    config.max_slots,
                )
                .map(|r| r.slot + 1)
            });
            let mut total = 0u64;
            for s in slots {
                total += s?;
            }
            rows.push(CompressionRow {
                n,
                c,
                log2_w: cfg.log2_message_space(),
                bits_saved: cfg.log2_message_space() - f64::from(c),
                expected_slots_analytic: cfg.expected_slots(),
                expected_slots_mc: Some(total as f64 / config.trials as f64),
                mc_messages: config.trials,
            });
        }
    }
    Ok(rows)
}

/// Analytic energy/latency per bit over the standard grid, one row per scheme.
pub fn run_energy(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let table = tradeoff_sweep(&config.energy, &standard_grid())?;
    Ok(table
        .rows
        .iter()
        .map(|row| {
            let (bits, symbols) = row.scheme.bits_and_symbols();
            ResultRow {
                experiment: config.experiment.clone(),
                scheme: row.scheme.name().into(),
                bits: Some(bits),
                symbols: Some(symbols),
                frame_slots: None,
                report_bits: None,
                snr_db: None,
                trials: 0,
                messages: 0,
                slots: 0,
                counts: SlotErrorCounts::default(),
                positional_mer: 0.0,
                aligned_mer: 0.0,
                mean_burst: 0.0,
                max_burst: 0,
                energy: row.energy,
            }
        })
        .collect())
}

pub const SPECTRUM_COLUMNS: [&str; 8] = [
    "experiment",
    "scheme",
    "B",
    "M",
    "samples_per_symbol",
    "ramp_fraction",
    "obw_cycles_per_slot",
    "parseval_rel_error",
];

/// Occupied bandwidths of an RNM waveform and the equal-rate continuous
/// reference, plus the resulting expansion factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSummary {
    pub experiment: String,
    pub cfg: RnmConfig,
    pub continuous_order: u32,
    pub setup: ExpansionSetup,
    pub report: ExpansionReport,
}

impl SpectrumSummary {
    /// Header plus one line per waveform and a final `expansion_factor` line.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SPECTRUM_COLUMNS)?;
        let q = self.setup.samples_per_slot;
        let parseval = |psd: &crate::spectrum::PsdEstimate| {
            ((psd.total_power() - psd.mean_power) / psd.mean_power).abs()
        };
        let r = &self.report;
        w.write_record([
            self.experiment.clone(),
            "rnm".into(),
            self.cfg.bits().to_string(),
            self.cfg.symbols().to_string(),
            q.to_string(),
            format!("{}", self.setup.ramp_fraction),
            fmt_f64(r.obw_rnm * q as f64),
            fmt_f64(parseval(&r.rnm_psd)),
        ])?;
        w.write_record([
            self.experiment.clone(),
            "continuous".into(),
            self.continuous_order.ilog2().to_string(),
            self.continuous_order.to_string(),
            r.continuous_samples_per_symbol.to_string(),
            "0".into(),
            fmt_f64(r.obw_continuous * q as f64),
            fmt_f64(parseval(&r.continuous_psd)),
        ])?;
        w.write_record([
            self.experiment.clone(),
            "expansion_factor".into(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            fmt_f64(r.factor),
            String::new(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Spectral expansion of the configured RNM scheme (default B=8, M=4)
/// against continuous M'-PSK at the same bit rate and power.
pub fn run_spectrum(config: &ExperimentConfig) -> Result<SpectrumSummary> {
    let cfg = match config.rnm {
        Some(c) => c,
        None => RnmConfig::new(8, 4)?,
    };
    let mut setup = config.spectrum;
    setup.seed = config.seed;
    let report = expansion_factor(&cfg, config.continuous_order, &setup)?;
    Ok(SpectrumSummary {
        experiment: config.experiment.clone(),
        cfg,
        continuous_order: config.continuous_order,
        setup,
        report,
    })
}

/// A single controlled detection error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InjectAction {
    /// Remove the symbol detected in `slot`.
    Drop(u64),
    /// Detect `symbol` in the empty `slot`.
    Add(u64, u32),
    /// Replace the symbol detected in `slot` by a different `symbol`.
    Swap(u64, u32),
}

pub fn inject(detections: &[DetectionEvent], action: InjectAction) -> Result<Vec<DetectionEvent>> {
    let slot = match action {
        InjectAction::Drop(s) | InjectAction::Add(s, _) | InjectAction::Swap(s, _) => s,
    };
    let idx = detections
        .iter()
        .position(|d| d.slot.0 == slot)
        .ok_or_else(|| SimError::Injection(format!("slot {slot} is not in the detection stream")))?;
    let mut out = detections.to_vec();
    let current = out[idx].verdict;
    out[idx].verdict = match (action, current) {
        (InjectAction::Drop(_), Verdict::Symbol(_)) => Verdict::Empty,
        (InjectAction::Add(_, k), Verdict::Empty) => Verdict::Symbol(k),
        (InjectAction::Swap(_, k), Verdict::Symbol(i)) if i != k => Verdict::Symbol(k),
        _ => {
            return Err(SimError::Injection(format!(
                "{action:?} does not apply to verdict {current:?}"
            )))
        }
    };
    Ok(out)
}

/// Noiseless RNM and PPM streams with one injected error each.
///
/// Rows: `baseline`, `drop`, `add`, `swap` for RNM (naive receiver), then
/// `ppm-baseline` and `ppm-swap` for the frame scheme.
pub fn inject_demo(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let cfg = config.rnm.unwrap_or(RnmConfig::new(8, 4)?);
    let es = config.energy.symbol_energy();
    let constellation = Constellation::psk(cfg.symbols(), es)?;
    let seeds = trial_seeds(config.seed, 0, 0);
    let link = SyncRng::new(seeds.link);
    let k = config
        .messages_per_trial
        .min(cfg.message_space().min(1 << 16) as usize);
    let msgs = distinct_messages(&cfg, seeds.messages, k)?;
    let schedule = encode_stream(&msgs, &link, &cfg, config.max_slots)?;
    let total = schedule.total_slots;
    let x = schedule_slot_values(&schedule, &constellation, total);
    let params = ChannelParams::new(1e-12 * es)?;
    let det = SlotDetector::new(constellation.clone(), &params, DetectorMode::Ml);
    let clean = events_from_verdicts(&det.detect_slots(&x));

    let mid = &schedule.events[schedule.events.len() / 2];
    let empty_slot = (mid.slot.0 + 1..total)
        .chain(0..mid.slot.0)
        .find(|&t| clean[t as usize].verdict.is_empty());
    let mut cases = vec![("baseline", clean.clone())];
    cases.push(("drop", inject(&clean, InjectAction::Drop(mid.slot.0))?));
    if let Some(t) = empty_slot {
        cases.push(("add", inject(&clean, InjectAction::Add(t, 0))?));
    }
    let other = (mid.symbol_index + 1) % cfg.symbols();
    cases.push(("swap", inject(&clean, InjectAction::Swap(mid.slot.0, other))?));

    let shape = RowShape {
        scheme: "rnm",
        bits: Some(cfg.bits()),
        symbols: Some(cfg.symbols()),
        frame_slots: None,
        bits_per_message: u64::from(cfg.bits()),
    };
    let noiseless_db = 10.0 * (es / params.n0()).log10();
    let mut rows = Vec::new();
    for (name, events) in cases {
        let verdicts: Vec<Verdict> = events.iter().map(|e| e.verdict).collect();
        let counts = classify_slot_errors(&schedule, &events)?;
        let decoded = naive_decode(&verdicts, &link, &cfg);
        let tally = Tally::of(counts, &msgs, &decoded, total)?;
        let mut row = make_row(config, &shape, noiseless_db, &tally);
        row.experiment = format!("{}-{name}", config.experiment);
        row.trials = 1;
        rows.push(row);
    }

    // frame scheme: the same swap costs exactly one frame
    let ppm = config.ppm.unwrap_or(PpmConfig::new(8, 2)?);
    let l = ppm.slots() as u64;
    let mut cur = BitCursor::new(seeds.messages);
    let frames: Vec<u64> = (0..k)
        .map(|_| uniform_below(&mut cur, ppm.frame_space()))
        .collect();
    let mut events = Vec::with_capacity(k);
    for (f, &v) in frames.iter().enumerate() {
        let (pos, sym) = ppm_encode(v, &ppm)?;
        events.push(TxEvent {
            slot: SlotIndex(f as u64 * l + u64::from(pos)),
            symbol_index: sym,
        });
    }
    let ppm_schedule = schedule_from_events(events);
    let ppm_total = k as u64 * l;
    let ppm_clean = events_from_verdicts(&verdicts_from_events(&ppm_schedule.events, ppm_total as usize));
    let target = ppm_schedule.events[k / 2];
    let swapped = inject(
        &ppm_clean,
        InjectAction::Swap(target.slot.0, (target.symbol_index + 1) % ppm.symbols()),
    )?;
    let ppm_shape = RowShape {
        scheme: "ppm",
        bits: None,
        symbols: Some(ppm.symbols()),
        frame_slots: Some(ppm.slots()),
        bits_per_message: u64::from(ppm.bits_per_frame()),
    };
    for (name, events) in [("ppm-baseline", ppm_clean), ("ppm-swap", swapped)] {
        let counts = classify_slot_errors(&ppm_schedule, &events)?;
        let decoded = ppm_frames_from_detections(&events, &ppm)?;
        let tally = Tally::of(counts, &frames, &decoded, ppm_total)?;
        let mut row = make_row(config, &ppm_shape, noiseless_db, &tally);
        row.experiment = format!("{}-{name}", config.experiment);
        row.trials = 1;
        rows.push(row);
    }
    Ok(rows)
}

/// Frame values from per-slot verdicts holding one symbol per frame.
pub fn ppm_frames_from_detections(detections: &[DetectionEvent], cfg: &PpmConfig) -> Result<Vec<u64>> {
    let l = cfg.slots() as usize;
    if !detections.len().is_multiple_of(l) {
        return Err(SimError::LengthMismatch {
            expected: detections.len().div_ceil(l) * l,
            actual: detections.len(),
        });
    }
    detections
        .chunks_exact(l)
        .map(|frame| {
            let mut hits = frame
                .iter()
                .enumerate()
                .filter_map(|(p, d)| d.verdict.symbol().map(|s| (p as u32, s)));
            match (hits.next(), hits.next()) {
                (Some((p, s)), None) => Ok(ppm_decode(p, s, cfg)),
                _ => Err(SimError::Injection(
                    "PPM frame must hold exactly one symbol".into(),
                )),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_rnm() -> ExperimentConfig {
        let mut c = ExperimentConfig::rnm("t", RnmConfig::new(5, 2).unwrap(), vec![3.0, 12.0]);
        c.trials = 6;
        c.messages_per_trial = 20;
        c
    }

    #[test]
    fn json_round_trip_and_defaults() {
        let c = ExperimentConfig::from_json(
            r#"{"scheme":"rnm","rnm":{"bits":8,"symbols":4},"snr_db_list":[10]}"#,
        )
        .unwrap();
        assert_eq!(c.trials, 10);
        assert_eq!(c.detector, DetectorKind::Ml);
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn invalid_configs() {
        for text in [
            r#"{"scheme":"rnm","snr_db_list":[10]}"#,
            r#"{"scheme":"rnm","rnm":{"bits":8,"symbols":4},"snr_db_list":[1],"max_slots":0}"#,
            r#"{"scheme":"rnm","rnm":{"bits":2,"symbols":4},"snr_db_list":[1]}"#,
            r#"{"scheme":"rnm","rnm":{"bits":8,"symbols":4},"snr_db_list":[1],"trials":0}"#,
            r#"{"scheme":"ppm","ppm":{"slots":3,"symbols":2},"snr_db_list":[1]}"#,
            r#"{"scheme":"rnm","rnm":{"bits":8,"symbols":4},"snr_db_list":[1],"bogus":1}"#,
            r#"{"scheme":"ppm","ppm":{"slots":4,"symbols":2},"snr_db_list":[1],"receiver":"sequence"}"#,
            "not json",
        ] {
            assert!(
                matches!(ExperimentConfig::from_json(text), Err(SimError::Config(_))),
                "{text}"
            );
        }
    }

    #[test]
    fn channel_runs_need_snr_points() {
        let mut c = small_rnm();
        c.snr_db_list.clear();
        assert!(c.validate().is_ok());
        assert!(matches!(run(&c, Execution::Sequential), Err(SimError::Config(_))));
    }

    #[test]
    fn rows_are_consistent() {
        let mut c = small_rnm();
        c.receiver = ReceiverKind::Both;
        let rows = run(&c, Execution::Sequential).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            assert!(r.counts.is_consistent());
            assert_eq!(r.counts.total_slots, r.slots);
            assert_eq!(r.messages, 120);
            assert!((0.0..=1.0).contains(&r.positional_mer));
            assert!(r.aligned_mer <= r.positional_mer);
        }
        assert_eq!(rows[0].scheme, "rnm");
        assert_eq!(rows[1].scheme, "rnm-seq");
        // paired receivers see the same slots
        assert_eq!(rows[0].slots, rows[1].slots);
    }

    #[test]
    fn noiseless_run_is_clean() {
        let mut c = small_rnm();
        c.snr_db_list = vec![120.0];
        let rows = run(&c, Execution::Sequential).unwrap();
        assert_eq!(rows[0].counts.errors(), 0);
        assert_eq!(rows[0].positional_mer, 0.0);
        assert_eq!(rows[0].aligned_mer, 0.0);
    }

    #[test]
    fn output_is_thread_independent() {
        let c = small_rnm();
        let a = results_csv_string(&run(&c, Execution::Sequential).unwrap()).unwrap();
        let b = results_csv_string(&run(&c, Execution::Threads(4)).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(&RESULT_COLUMNS.join(",")));
    }

    #[test]
    fn budget_errors_surface() {
        let mut c = small_rnm();
        c.max_slots = 10;
        assert!(matches!(
            run(&c, Execution::Sequential),
            Err(SimError::SlotBudgetExceeded { max_slots: 10 })
        ));
    }

    #[test]
    fn ppm_rows() {
        let mut c = ExperimentConfig::ppm("p", PpmConfig::new(4, 2).unwrap(), vec![120.0, 0.0]);
        c.trials = 3;
        c.messages_per_trial = 50;
        let rows = run(&c, Execution::Sequential).unwrap();
        assert_eq!(rows[0].positional_mer, 0.0);
        assert!(rows[1].positional_mer > 0.0);
        assert!(rows[1].aligned_mer <= rows[1].positional_mer);
        assert_eq!(rows[1].counts.insertions, rows[1].counts.deletions);
        assert_eq!(rows[0].frame_slots, Some(4));
    }

    #[test]
    fn energy_rows_cover_the_grid() {
        let c = small_rnm();
        let rows = run_energy(&c).unwrap();
        assert_eq!(rows.len(), standard_grid().len());
        let csv = results_csv_string(&rows).unwrap();
        assert!(csv.lines().nth(1).unwrap().starts_with("t,rnm,2,2,,,,0,0,"));
    }

    #[test]
    fn spectrum_summary_csv() {
        let mut c = small_rnm();
        c.rnm = Some(RnmConfig::new(4, 2).unwrap());
        c.continuous_order = 2;
        c.spectrum.total_samples = 1 << 13;
        c.spectrum.segment_len = 256;
        let s = run_spectrum(&c).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(3).unwrap().starts_with("t,expansion_factor,"));
    }

    #[test]
    fn inject_rules() {
        let ev = events_from_verdicts(&[Verdict::Empty, Verdict::Symbol(1)]);
        assert_eq!(
            inject(&ev, InjectAction::Drop(1)).unwrap()[1].verdict,
            Verdict::Empty
        );
        assert_eq!(
            inject(&ev, InjectAction::Add(0, 3)).unwrap()[0].verdict,
            Verdict::Symbol(3)
        );
        assert_eq!(
            inject(&ev, InjectAction::Swap(1, 0)).unwrap()[1].verdict,
            Verdict::Symbol(0)
        );
        assert!(inject(&ev, InjectAction::Drop(0)).is_err());
        assert!(inject(&ev, InjectAction::Add(1, 0)).is_err());
        assert!(inject(&ev, InjectAction::Swap(1, 1)).is_err());
        assert!(inject(&ev, InjectAction::Swap(0, 1)).is_err());
        assert!(inject(&ev, InjectAction::Drop(5)).is_err());

        let single = events_from_verdicts(&[Verdict::Symbol(0)]);
        let dropped = inject(&single, InjectAction::Drop(0)).unwrap();
        assert!(dropped.iter().all(|d| d.verdict.is_empty()));
    }

    #[test]
    fn demo_rows_show_each_error_type() {
        let mut c = small_rnm();
        c.rnm = Some(RnmConfig::new(8, 4).unwrap());
        c.messages_per_trial = 60;
        let rows = inject_demo(&c).unwrap();
        let by = |s: &str| rows.iter().find(|r| r.experiment.ends_with(s)).unwrap();
        assert_eq!(by("-baseline").counts.errors(), 0);
        let d = by("-drop");
        assert_eq!((d.counts.deletions, d.counts.errors()), (1, 1));
        assert_eq!(d.max_burst, 30);
        let a = by("-add");
        assert_eq!((a.counts.insertions, a.counts.errors()), (1, 1));
        let s = by("t-swap");
        assert_eq!(s.scheme, "rnm");
        assert_eq!((s.counts.substitutions, s.counts.errors()), (1, 1));
        assert_eq!(s.max_burst, 1);
        let p = by("ppm-swap");
        assert_eq!(p.max_burst, 1);
        assert!((p.positional_mer - 1.0 / 60.0).abs() < 1e-12);
    }
}
