//! Zero-extended M-PSK constellation and the AWGN slot channel.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Result, SimError};
use crate::sync_rng::{unit_fraction, WordStream};

/// Matched-filter output of one slot.
pub type ComplexSample = Complex64;

/// M-PSK points `sqrt(Es) * exp(j 2 pi k / M)` plus the zero symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    energy: f64,
    points: Vec<ComplexSample>,
}

impl Constellation {
    pub fn psk(order: u32, symbol_energy: f64) -> Result<Self> {
        if order < 2 {
            return Err(SimError::config(format!("PSK order must be >= 2, got {order}")));
        }
        if !(symbol_energy > 0.0 && symbol_energy.is_finite()) {
            return Err(SimError::config("symbol energy must be positive and finite"));
        }
        let amp = symbol_energy.sqrt();
        let points = (0..order)
            .map(|k| match (order, k) {
                // keep BPSK exactly on the real axis
                (2, 0) => Complex64::new(amp, 0.0),
                (2, _) => Complex64::new(-amp, 0.0),
                _ => Complex64::from_polar(amp, 2.0 * PI * f64::from(k) / f64::from(order)),
            })
            .collect();
        Ok(Self {
            energy: symbol_energy,
            points,
        })
    }

    pub fn order(&self) -> u32 {
        self.points.len() as u32
    }

    pub fn symbol_energy(&self) -> f64 {
        self.energy
    }

    pub fn points(&self) -> &[ComplexSample] {
        &self.points
    }

    #[inline]
    pub fn point(&self, k: u32) -> ComplexSample {
        self.points[k as usize]
    }

    /// Slot value for an optional symbol, zero when the slot is empty.
    #[inline]
    pub fn slot_value(&self, symbol: Option<u32>) -> ComplexSample {
        symbol.map_or(Complex64::new(0.0, 0.0), |k| self.point(k))
    }
}

/// One-sided noise spectral density `N0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    n0: f64,
}

impl ChannelParams {
    pub fn new(n0: f64) -> Result<Self> {
        if !(n0 > 0.0 && n0.is_finite()) {
            return Err(SimError::config(format!("N0 must be positive, got {n0}")));
        }
        Ok(Self { n0 })
    }

    /// Noise level giving `Es/N0 = snr_db` for the given symbol energy.
    pub fn from_snr_db(symbol_energy: f64, snr_db: f64) -> Result<Self> {
        Self::new(symbol_energy / 10f64.powf(snr_db / 10.0))
    }

    pub fn n0(&self) -> f64 {
        self.n0
    }

    pub fn snr(&self, symbol_energy: f64) -> f64 {
        symbol_energy / self.n0
    }
}

/// Two independent standard normal deviates by Box-Muller.
pub fn gaussian_pair<S: WordStream + ?Sized>(src: &mut S) -> (f64, f64) {
    let mut u1 = unit_fraction(src);
    let u2 = unit_fraction(src);
    if u1 == 0.0 {
        u1 = f64::EPSILON / 2.0; // 2^-53
    }
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (2.0 * PI * u2).sin_cos();
    (r * c, r * s)
}

/// `x` plus circularly symmetric Gaussian noise of total variance `N0`.
#[inline]
pub fn awgn<S: WordStream + ?Sized>(x: ComplexSample, params: &ChannelParams, src: &mut S) -> ComplexSample {
    let sigma = (params.n0 / 2.0).sqrt();
    let (a, b) = gaussian_pair(src);
    Complex64::new(x.re + sigma * a, x.im + sigma * b)
}

/// Passes every slot value through [`awgn`] in order.
pub fn awgn_stream<S: WordStream + ?Sized>(
    xs: &[ComplexSample],
    params: &ChannelParams,
    src: &mut S,
) -> Vec<ComplexSample> {
    xs.iter().map(|&x| awgn(x, params, src)).collect()
}
