//! Overhead + RF energy per bit and the latency it costs.
//!
//! Overhead power is drawn for the whole time the link is on, waiting slots
//! included. Symbol energy `Es` is the same for every scheme.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::rnm_codec::{expected_wait_slots, RnmConfig, TxSchedule};

/// Label attached to every energy table.
pub const OVERHEAD_MODEL: &str = "constant overhead power while on (waiting and transmitting)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnergyParams")]
pub struct EnergyParams {
    overhead_power: f64,
    slot_duration: f64,
    symbol_energy: f64,
}

#[derive(Deserialize)]
struct RawEnergyParams {
    overhead_power: f64,
    slot_duration: f64,
    symbol_energy: f64,
}

impl TryFrom<RawEnergyParams> for EnergyParams {
    type Error = SimError;
    fn try_from(r: RawEnergyParams) -> Result<Self> {
        EnergyParams::new(r.overhead_power, r.slot_duration, r.symbol_energy)
    }
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            overhead_power: 1.0,
            slot_duration: 1.0,
            symbol_energy: 1.0,
        }
    }
}

impl EnergyParams {
    pub fn new(overhead_power: f64, slot_duration: f64, symbol_energy: f64) -> Result<Self> {
        let finite = overhead_power.is_finite() && slot_duration.is_finite() && symbol_energy.is_finite();
        if !finite || overhead_power < 0.0 || slot_duration <= 0.0 || symbol_energy <= 0.0 {
            return Err(SimError::config(format!(
                "need P_oh >= 0, T_s > 0, Es > 0 (got {overhead_power}, {slot_duration}, {symbol_energy})"
            )));
        }
        Ok(Self {
            overhead_power,
            slot_duration,
            symbol_energy,
        })
    }

    pub fn overhead_power(&self) -> f64 {
        self.overhead_power
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn symbol_energy(&self) -> f64 {
        self.symbol_energy
    }

    pub fn with_overhead_power(self, overhead_power: f64) -> Result<Self> {
        Self::new(overhead_power, self.slot_duration, self.symbol_energy)
    }
}

/// Per-bit energy and latency.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub e_rf_per_bit: f64,
    pub e_oh_per_bit: f64,
    pub e_total_per_bit: f64,
    pub latency_per_bit: f64,
}

impl EnergyBreakdown {
    fn from_rf_and_latency(params: &EnergyParams, e_rf: f64, latency: f64) -> Self {
        let e_oh = params.overhead_power * latency;
        Self {
            e_rf_per_bit: e_rf,
            e_oh_per_bit: e_oh,
            e_total_per_bit: e_rf + e_oh,
            latency_per_bit: latency,
        }
    }
}

/// Expected RNM cost: one symbol per `B` bits after `2^B / M` slots on average.
pub fn rnm_energy(params: &EnergyParams, cfg: &RnmConfig) -> EnergyBreakdown {
    let b = f64::from(cfg.bits());
    EnergyBreakdown::from_rf_and_latency(
        params,
        params.symbol_energy / b,
        params.slot_duration * expected_wait_slots(cfg) / b,
    )
}

/// Continuous M'-PSK: one symbol in every slot.
pub fn continuous_energy(params: &EnergyParams, order: u32) -> Result<EnergyBreakdown> {
    if order < 2 {
        return Err(SimError::config(format!("M' must be >= 2, got {order}")));
    }
    let bits = f64::from(order).log2();
    Ok(EnergyBreakdown::from_rf_and_latency(
        params,
        params.symbol_energy / bits,
        params.slot_duration / bits,
    ))
}

/// Pulse-position frame: one symbol per `L` slots carrying `log2 L + log2 M` bits.
pub fn ppm_energy(params: &EnergyParams, cfg: &crate::rnm_codec::PpmConfig) -> EnergyBreakdown {
    let bits = f64::from(cfg.bits_per_frame());
    EnergyBreakdown::from_rf_and_latency(
        params,
        params.symbol_energy / bits,
        params.slot_duration * f64::from(cfg.slots()) / bits,
    )
}

/// Energy actually spent by a simulated schedule carrying `bits_per_message` each.
pub fn measured_energy(params: &EnergyParams, slots: u64, emissions: u64, bits: u64) -> EnergyBreakdown {
    if bits == 0 {
        return EnergyBreakdown::default();
    }
    let bits = bits as f64;
    EnergyBreakdown::from_rf_and_latency(
        params,
        params.symbol_energy * emissions as f64 / bits,
        params.slot_duration * slots as f64 / bits,
    )
}

/// [`measured_energy`] for an RNM schedule.
pub fn schedule_energy(params: &EnergyParams, cfg: &RnmConfig, schedule: &TxSchedule) -> EnergyBreakdown {
    measured_energy(
        params,
        schedule.total_slots,
        schedule.events.len() as u64,
        schedule.events.len() as u64 * u64::from(cfg.bits()),
    )
}

/// Overhead power `P*` at which RNM and continuous M'-PSK cost the same per bit.
///
/// `None` when the two latencies coincide.
pub fn break_even_overhead(params: &EnergyParams, cfg: &RnmConfig, order: u32) -> Result<Option<f64>> {
    let rnm = rnm_energy(params, cfg);
    let cont = continuous_energy(params, order)?;
    let d_latency = rnm.latency_per_bit - cont.latency_per_bit;
    if d_latency == 0.0 {
        return Ok(None);
    }
    Ok(Some((cont.e_rf_per_bit - rnm.e_rf_per_bit) / d_latency))
}

/// A point of the trade-off grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Rnm { bits: u32, symbols: u32 },
    Continuous { order: u32 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Rnm { .. } => "rnm",
            Scheme::Continuous { .. } => "continuous",
        }
    }

    /// `(B, M)`; a continuous M'-PSK entry reports `(log2 M', M')`.
    pub fn bits_and_symbols(&self) -> (u32, u32) {
        match *self {
            Scheme::Rnm { bits, symbols } => (bits, symbols),
            Scheme::Continuous { order } => (order.ilog2(), order),
        }
    }

    pub fn energy(&self, params: &EnergyParams) -> Result<EnergyBreakdown> {
        match *self {
            Scheme::Rnm { bits, symbols } => Ok(rnm_energy(params, &RnmConfig::new(bits, symbols)?)),
            Scheme::Continuous { order } => continuous_energy(params, order),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeoffRow {
    pub scheme: Scheme,
    pub energy: EnergyBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TradeoffTable {
    pub rows: Vec<TradeoffRow>,
    /// Index of the minimum-total-energy row.
    pub argmin: usize,
}

impl TradeoffTable {
    pub fn best(&self) -> &TradeoffRow {
        &self.rows[self.argmin]
    }

    /// Minimum-latency row; ties go to lower RF energy, then smaller `(B, M)`.
    pub fn fastest(&self) -> &TradeoffRow {
        self.rows
            .iter()
            .min_by(|a, b| {
                a.energy
                    .latency_per_bit
                    .total_cmp(&b.energy.latency_per_bit)
                    .then(a.energy.e_rf_per_bit.total_cmp(&b.energy.e_rf_per_bit))
                    .then(a.scheme.bits_and_symbols().cmp(&b.scheme.bits_and_symbols()))
            })
            .expect("non-empty table")
    }

    /// CSV with columns scheme,B,M,e_rf_per_bit,e_oh_per_bit,e_total_per_bit,latency_per_bit.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "scheme",
            "B",
            "M",
            "e_rf_per_bit",
            "e_oh_per_bit",
            "e_total_per_bit",
            "latency_per_bit",
        ])?;
        for row in &self.rows {
            let (b, m) = row.scheme.bits_and_symbols();
            let e = row.energy;
            w.write_record([
                row.scheme.name().to_string(),
                b.to_string(),
                m.to_string(),
                fmt_f64(e.e_rf_per_bit),
                fmt_f64(e.e_oh_per_bit),
                fmt_f64(e.e_total_per_bit),
                fmt_f64(e.latency_per_bit),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.10e}")
}

fn cmp_rows(a: &TradeoffRow, b: &TradeoffRow) -> Ordering {
    a.energy
        .e_total_per_bit
        .total_cmp(&b.energy.e_total_per_bit)
        .then(a.scheme.bits_and_symbols().cmp(&b.scheme.bits_and_symbols()))
}

/// Evaluates every scheme and picks the minimum total energy per bit.
pub fn tradeoff_sweep(params: &EnergyParams, grid: &[Scheme]) -> Result<TradeoffTable> {
    if grid.is_empty() {
        return Err(SimError::config("trade-off grid is empty"));
    }
    let rows = grid
        .iter()
        .map(|&scheme| {
            Ok(TradeoffRow {
                scheme,
                energy: scheme.energy(params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmin = (0..rows.len())
        .min_by(|&a, &b| cmp_rows(&rows[a], &rows[b]))
        .unwrap();
    Ok(TradeoffTable { rows, argmin })
}

/// Smallest overhead power above which the minimum-energy entry of `grid`
/// is its minimum-latency entry.
pub fn latency_dominance_threshold(params: &EnergyParams, grid: &[Scheme]) -> Result<f64> {
    let table = tradeoff_sweep(params, grid)?;
    let fast = table.fastest().energy;
    let mut threshold = 0.0f64;
    for row in &table.rows {
        let d_lat = row.energy.latency_per_bit - fast.latency_per_bit;
        let d_rf = fast.e_rf_per_bit - row.energy.e_rf_per_bit;
        if d_lat > 0.0 && d_rf > 0.0 {
            threshold = threshold.max(d_rf / d_lat);
        }
    }
    Ok(threshold)
}

/// RNM grid `B x M` (pairs with `M >= 2^B` skipped) plus continuous M'-PSK entries.
pub fn default_grid(bits: &[u32], symbols: &[u32], continuous: &[u32]) -> Vec<Scheme> {
    let mut grid: Vec<Scheme> = bits
        .iter()
        .flat_map(|&b| {
            symbols
                .iter()
                .filter(move |&&m| RnmConfig::new(b, m).is_ok())
                .map(move |&m| Scheme::Rnm { bits: b, symbols: m })
        })
        .collect();
    grid.extend(continuous.iter().map(|&order| Scheme::Continuous { order }));
    grid
}

/// Grid used by the `energy` experiment.
pub fn standard_grid() -> Vec<Scheme> {
    default_grid(&[2, 4, 6, 8, 10, 12], &[2, 4, 8], &[2, 4, 8, 16])
}
