//! On/off waveform synthesis and Welch spectral estimates.
//!
//! Frequencies are in cycles per sample, fft-shifted to `[-0.5, 0.5)`.
//! [`PsdEstimate::to_cycles_per_slot`] rescales them for a given oversampling.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel_model::{ComplexSample, Constellation};
use crate::error::{Result, SimError};
use crate::rnm_codec::{match_slot, Message, RnmConfig};
use crate::sync_rng::{derive_substream, uniform_below, BitCursor, RngSeed, SlotWords, SyncRng};

/// Oversampling `Q` and on/off ramp length as a fraction of a slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformParams {
    pub samples_per_slot: usize,
    pub ramp_fraction: f64,
}

impl WaveformParams {
    pub fn new(samples_per_slot: usize, ramp_fraction: f64) -> Result<Self> {
        if samples_per_slot < 2 {
            return Err(SimError::config("need at least 2 samples per slot"));
        }
        if !(0.0..=0.5).contains(&ramp_fraction) {
            return Err(SimError::config(format!(
                "ramp fraction must be in [0, 0.5], got {ramp_fraction}"
            )));
        }
        Ok(Self {
            samples_per_slot,
            ramp_fraction,
        })
    }

    /// Samples spent ramping at each transition, `round(Q * rho)`.
    pub fn ramp_samples(&self) -> usize {
        (self.samples_per_slot as f64 * self.ramp_fraction).round() as usize
    }
}

/// Raised-cosine ramp `(1 - cos(pi u)) / 2` evaluated at sample midpoints.
fn ramp_gain(j: usize, ramp: usize) -> f64 {
    let u = (j as f64 + 0.5) / ramp as f64;
    0.5 * (1.0 - (PI * u).cos())
}

/// Holds each slot value for `Q` samples, ramping in and out of silence.
///
/// Turn-on ramps occupy the first `round(Q rho)` samples of a non-zero slot
/// that follows a zero slot (or the start); turn-off ramps mirror them at
/// the end of a non-zero slot followed by a zero slot (or the end).
pub fn synthesize(slot_symbols: &[ComplexSample], params: &WaveformParams) -> Vec<ComplexSample> {
    let q = params.samples_per_slot;
    let ramp = params.ramp_samples().min(q / 2);
    let zero = |k: usize| slot_symbols[k] == Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(slot_symbols.len() * q);
    for (k, &s) in slot_symbols.iter().enumerate() {
        if zero(k) || ramp == 0 {
            out.extend(std::iter::repeat_n(s, q));
            continue;
        }
        let rise = k == 0 || zero(k - 1);
        let fall = k + 1 == slot_symbols.len() || zero(k + 1);
        for j in 0..q {
            let mut g = 1.0;
            if rise && j < ramp {
                g = ramp_gain(j, ramp);
            }
            if fall && q - 1 - j < ramp {
                g = g.min(ramp_gain(q - 1 - j, ramp));
            }
            out.push(s * g);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs: Vec<f64>,
    pub psd: Vec<f64>,
    /// Bin spacing.
    pub resolution: f64,
    pub segment_count: usize,
    /// Mean of `|x|^2` over the samples the segments cover.
    pub mean_power: f64,
}

impl PsdEstimate {
    /// `sum(psd) * df`.
    pub fn total_power(&self) -> f64 {
        self.psd.iter().sum::<f64>() * self.resolution
    }

    pub fn to_cycles_per_slot(&self, samples_per_slot: usize) -> PsdEstimate {
        let q = samples_per_slot as f64;
        PsdEstimate {
            freqs: self.freqs.iter().map(|f| f * q).collect(),
            psd: self.psd.iter().map(|p| p / q).collect(),
            resolution: self.resolution * q,
            segment_count: self.segment_count,
            mean_power: self.mean_power,
        }
    }

    /// CSV with columns freq_norm,psd_db.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["freq_norm", "psd_db"])?;
        for (f, p) in self.freqs.iter().zip(&self.psd) {
            let db = if *p > 0.0 {
                10.0 * p.log10()
            } else {
                f64::NEG_INFINITY
            };
            w.write_record([format!("{f:.8}"), format!("{db:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn hann(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Welch estimate with Hann windows and 50% overlap.
///
/// The averaged periodogram is calibrated so that `sum(psd) * df` equals the
/// mean power of the analysed samples.
pub fn welch_psd(samples: &[ComplexSample], segment_len: usize) -> Result<PsdEstimate> {
    if segment_len < 2 || !segment_len.is_power_of_two() {
        return Err(SimError::config(format!(
            "segment length must be a power of two >= 2, got {segment_len}"
        )));
    }
    if samples.len() < segment_len {
        return Err(SimError::TooFewSamples {
            needed: segment_len,
            got: samples.len(),
        });
    }
    let hop = segment_len / 2;
    let segments = (samples.len() - segment_len) / hop + 1;
    let window = hann(segment_len);
    let fft = FftPlanner::new().plan_fft_forward(segment_len);

    let mut acc = vec![0.0f64; segment_len];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment_len];
    for s in 0..segments {
        let seg = &samples[s * hop..s * hop + segment_len];
        for ((b, &x), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = x * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let covered = &samples[..(segments - 1) * hop + segment_len];
    let mean_power = covered.iter().map(|x| x.norm_sqr()).sum::<f64>() / covered.len() as f64;
    let df = 1.0 / segment_len as f64;
    let raw_power = acc.iter().sum::<f64>() * df;
    let scale = if raw_power > 0.0 {
        mean_power / raw_power
    } else {
        0.0
    };

    // fft-shift: bin k of the output is frequency (k - L/2) / L
    let half = segment_len / 2;
    let psd = (0..segment_len)
        .map(|k| acc[(k + half) % segment_len] * scale)
        .collect();
    let freqs = (0..segment_len).map(|k| (k as f64 - half as f64) * df).collect();
    Ok(PsdEstimate {
        freqs,
        psd,
        resolution: df,
        segment_count: segments,
        mean_power,
    })
}

/// Width of the smallest band, symmetric about the power centroid, holding
/// at least `fraction` of the power. Counted in whole bins.
pub fn occupied_bandwidth(psd: &PsdEstimate, fraction: f64) -> Result<f64> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(SimError::config(format!(
            "fraction must be in (0, 1), got {fraction}"
        )));
    }
    let total: f64 = psd.psd.iter().sum();
    if total <= 0.0 || !total.is_finite() {
        return Err(SimError::DegeneratePsd);
    }
    let centroid = psd.freqs.iter().zip(&psd.psd).map(|(f, p)| f * p).sum::<f64>() / total;
    let mut order: Vec<usize> = (0..psd.psd.len()).collect();
    order.sort_by(|&a, &b| {
        (psd.freqs[a] - centroid)
            .abs()
            .total_cmp(&(psd.freqs[b] - centroid).abs())
            .then(a.cmp(&b))
    });
    let target = fraction * total;
    let mut acc = 0.0;
    let mut bins = 0usize;
    let mut k = 0;
    while k < order.len() {
        // bins at the same distance enter together so the band stays symmetric
        let d = (psd.freqs[order[k]] - centroid).abs();
        while k < order.len() && (psd.freqs[order[k]] - centroid).abs() == d {
            acc += psd.psd[order[k]];
            bins += 1;
            k += 1;
        }
        if acc >= target {
            break;
        }
    }
    Ok(bins as f64 * psd.resolution)
}

/// Ratio of the occupied bandwidths of two sample streams.
pub fn obw_ratio(a: &[ComplexSample], b: &[ComplexSample], segment_len: usize, fraction: f64) -> Result<f64> {
    let wa = occupied_bandwidth(&welch_psd(a, segment_len)?, fraction)?;
    let wb = occupied_bandwidth(&welch_psd(b, segment_len)?, fraction)?;
    Ok(wa / wb)
}

/// Scales a stream to unit mean power (all-zero streams are left alone).
pub fn normalize_power(samples: &mut [ComplexSample]) {
    let p = samples.iter().map(|x| x.norm_sqr()).sum::<f64>() / samples.len().max(1) as f64;
    if p > 0.0 {
        let g = 1.0 / p.sqrt();
        samples.iter_mut().for_each(|x| *x *= g);
    }
}

/// Setup shared by both waveforms of an expansion measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpansionSetup {
    /// Oversampling of the RNM slot clock.
    pub samples_per_slot: usize,
    pub ramp_fraction: f64,
    pub total_samples: usize,
    pub segment_len: usize,
    pub fraction: f64,
    pub seed: u64,
}

impl Default for ExpansionSetup {
    fn default() -> Self {
        Self {
            samples_per_slot: 8,
            ramp_fraction: 0.0,
            total_samples: 1 << 16,
            segment_len: 1024,
            fraction: 0.99,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionReport {
    pub factor: f64,
    pub obw_rnm: f64,
    pub obw_continuous: f64,
    /// Samples per continuous symbol giving the same bit rate.
    pub continuous_samples_per_symbol: usize,
    pub rnm_psd: PsdEstimate,
    pub continuous_psd: PsdEstimate,
}

/// Samples per continuous M'-PSK symbol that match the RNM bit rate:
/// `Q * 2^B * log2 M' / (M * B)`, which must be an integer.
pub fn equal_rate_oversampling(cfg: &RnmConfig, order: u32, samples_per_slot: usize) -> Result<usize> {
    if order < 2 || !order.is_power_of_two() {
        return Err(SimError::config(format!(
            "continuous order must be a power of two >= 2, got {order}"
        )));
    }
    let num = samples_per_slot as u128 * (1u128 << cfg.bits()) * u128::from(order.ilog2());
    let den = u128::from(cfg.symbols()) * u128::from(cfg.bits());
    if !num.is_multiple_of(den) {
        return Err(SimError::config(format!(
            "no integer oversampling gives equal bit rates (Q={samples_per_slot}, B={}, M={}, M'={order})",
            cfg.bits(),
            cfg.symbols()
        )));
    }
    usize::try_from(num / den).map_err(|_| SimError::config("oversampling overflow"))
}

/// Slot values of an RNM stream filling exactly `n_slots` slots.
pub fn rnm_slot_values(cfg: &RnmConfig, seed: RngSeed, n_slots: usize) -> Result<Vec<ComplexSample>> {
    let constellation = Constellation::psk(cfg.symbols(), 1.0)?;
    let link = SyncRng::new(derive_substream(seed, 1));
    let mut msgs = BitCursor::new(derive_substream(seed, 0));
    let mut draw = || Message(uniform_below(&mut msgs, cfg.message_space()) as u32);
    let mut pending = draw();
    Ok((0..n_slots as u64)
        .map(|t| match match_slot(pending, link.bits(t, cfg.bits()), cfg) {
            Some(i) => {
                pending = draw();
                constellation.point(i)
            }
            None => Complex64::new(0.0, 0.0),
        })
        .collect())
}

/// Random M'-PSK symbol values, one per symbol period.
pub fn continuous_symbol_values(order: u32, seed: RngSeed, n_symbols: usize) -> Result<Vec<ComplexSample>> {
    let constellation = Constellation::psk(order, 1.0)?;
    let mut cur = BitCursor::new(derive_substream(seed, 2));
    Ok((0..n_symbols)
        .map(|_| constellation.point(uniform_below(&mut cur, u64::from(order)) as u32))
        .collect())
}

/// Occupied-bandwidth ratio of RNM to continuous M'-PSK at equal bit rate
/// and equal mean power.
pub fn expansion_factor(cfg: &RnmConfig, order: u32, setup: &ExpansionSetup) -> Result<ExpansionReport> {
    let q_rnm = setup.samples_per_slot;
    let q_cont = equal_rate_oversampling(cfg, order, q_rnm)?;
    let n = setup.total_samples;
    if n < q_cont {
        return Err(SimError::TooFewSamples {
            needed: q_cont,
            got: n,
        });
    }
    let seed = RngSeed(setup.seed);

    let rnm_params = WaveformParams::new(q_rnm, setup.ramp_fraction)?;
    let mut rnm = synthesize(&rnm_slot_values(cfg, seed, n.div_ceil(q_rnm))?, &rnm_params);
    rnm.truncate(n);
    normalize_power(&mut rnm);

    let cont_params = WaveformParams::new(q_cont, 0.0)?;
    let mut cont = synthesize(
        &continuous_symbol_values(order, seed, n.div_ceil(q_cont))?,
        &cont_params,
    );
    cont.truncate(n);
    normalize_power(&mut cont);

    let rnm_psd = welch_psd(&rnm, setup.segment_len)?;
    let continuous_psd = welch_psd(&cont, setup.segment_len)?;
    let obw_rnm = occupied_bandwidth(&rnm_psd, setup.fraction)?;
    let obw_continuous = occupied_bandwidth(&continuous_psd, setup.fraction)?;
    Ok(ExpansionReport {
        factor: obw_rnm / obw_continuous,
        obw_rnm,
        obw_continuous,
        continuous_samples_per_symbol: q_cont,
        rnm_psd,
        continuous_psd,
    })
}
