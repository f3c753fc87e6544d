//! LoRa frame airtime and data-rate arithmetic.
//!
//! Airtime follows the Semtech modem formula: a preamble of
//! `preamble_symbols + 4.25` symbols followed by
//!
//! ```text
//! 8 + max(ceil((8·PL − 4·SF + 28 + 16·CRC − 20·IH) / (4·(SF − 2·DE))) · CR, 0)
//! ```
//!
//! payload symbols. Durations are carried as integer microseconds so that the
//! simulator never accumulates floating-point drift.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simulation and airtime clock unit.
pub type Micros = u64;

pub const MICROS_PER_SEC: u64 = 1_000_000;

/// Channel bandwidths a LoRa modem can be configured with, in Hz.
pub const BANDWIDTHS_HZ: [u32; 10] = [7_800, 10_400, 15_600, 20_800, 31_200, 41_700, 62_500, 125_000, 250_000, 500_000];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SpreadingFactor(u8);

impl SpreadingFactor {
    pub const SF7: Self = Self(7);
    pub const SF8: Self = Self(8);
    pub const SF9: Self = Self(9);
    pub const SF10: Self = Self(10);
    pub const SF11: Self = Self(11);
    pub const SF12: Self = Self(12);

    pub const ALL: [Self; 6] = [Self::SF7, Self::SF8, Self::SF9, Self::SF10, Self::SF11, Self::SF12];

    pub fn new(sf: u8) -> Result<Self> {
        if (7..=12).contains(&sf) {
            Ok(Self(sf))
        } else {
            Err(Error::SpreadingFactor(sf))
        }
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Position in [`SpreadingFactor::ALL`], 0 for SF7.
    pub fn index(self) -> usize {
        usize::from(self.0 - 7)
    }

    pub fn from_index(index: usize) -> Option<Self> {
        Self::ALL.get(index).copied()
    }
}

impl TryFrom<u8> for SpreadingFactor {
    type Error = Error;

    fn try_from(sf: u8) -> Result<Self> {
        Self::new(sf)
    }
}

impl From<SpreadingFactor> for u8 {
    fn from(sf: SpreadingFactor) -> u8 {
        sf.0
    }
}

impl fmt::Display for SpreadingFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SF{}", self.0)
    }
}

/// Radio parameters of a single LoRa frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TransmissionProfile {
    pub sf: SpreadingFactor,
    pub bandwidth_hz: u32,
    /// 5..=8, i.e. coding rate 4/5..4/8.
    pub coding_rate_denominator: u8,
    pub preamble_symbols: u16,
    pub explicit_header: bool,
    pub crc_enabled: bool,
    pub low_dr_optimize: bool,
    pub payload_bytes: usize,
}

impl TransmissionProfile {
    /// 125 kHz, CR 4/5, 8 preamble symbols, explicit header, CRC on, and
    /// low data-rate optimisation for SF11/SF12.
    pub fn new(sf: SpreadingFactor, payload_bytes: usize) -> Self {
        Self {
            sf,
            bandwidth_hz: 125_000,
            coding_rate_denominator: 5,
            preamble_symbols: 8,
            explicit_header: true,
            crc_enabled: true,
            low_dr_optimize: default_low_dr_optimize(sf, 125_000),
            payload_bytes,
        }
    }

    /// Changes the bandwidth and re-derives the low data-rate flag.
    pub fn with_bandwidth(mut self, bandwidth_hz: u32) -> Self {
        self.bandwidth_hz = bandwidth_hz;
        self.low_dr_optimize = default_low_dr_optimize(self.sf, bandwidth_hz);
        self
    }

    pub fn with_coding_rate(mut self, denominator: u8) -> Self {
        self.coding_rate_denominator = denominator;
        self
    }

    pub fn with_preamble(mut self, symbols: u16) -> Self {
        self.preamble_symbols = symbols;
        self
    }

    pub fn with_payload(mut self, payload_bytes: usize) -> Self {
        self.payload_bytes = payload_bytes;
        self
    }

    /// Checks the field ranges only; `payload_bytes` may be zero, which is how
    /// downlink acknowledgements are modelled.
    fn validate_radio(&self) -> Result<()> {
        if !BANDWIDTHS_HZ.contains(&self.bandwidth_hz) {
            return Err(Error::Bandwidth(self.bandwidth_hz));
        }
        if !(5..=8).contains(&self.coding_rate_denominator) {
            return Err(Error::CodingRate(self.coding_rate_denominator));
        }
        if self.preamble_symbols == 0 {
            return Err(Error::Preamble);
        }
        let max = max_payload(self.sf);
        if self.payload_bytes > max {
            return Err(Error::Payload { sf: self.sf.value(), payload: self.payload_bytes, max });
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_radio()?;
        if self.payload_bytes == 0 {
            return Err(Error::Payload { sf: self.sf.value(), payload: 0, max: max_payload(self.sf) });
        }
        Ok(())
    }

    /// Number of payload symbols, always `8 + k·CR` for some `k ≥ 0`.
    pub fn payload_symbols(&self) -> u32 {
        let sf = i64::from(self.sf.value());
        let pl = self.payload_bytes as i64;
        let crc = i64::from(self.crc_enabled);
        let ih = i64::from(!self.explicit_header);
        let de = i64::from(self.low_dr_optimize);
        let numerator = 8 * pl - 4 * sf + 28 + 16 * crc - 20 * ih;
        let denominator = 4 * (sf - 2 * de);
        let blocks = if numerator > 0 { (numerator + denominator - 1) / denominator } else { 0 };
        8 + (blocks as u32) * u32::from(self.coding_rate_denominator)
    }

    /// Frame length in quarter symbols (the preamble contributes a 0.25).
    fn quarter_symbols(&self) -> u64 {
        4 * u64::from(self.preamble_symbols) + 17 + 4 * u64::from(self.payload_symbols())
    }
}

/// DE is mandated once a symbol lasts 16 ms or more, which at the standard
/// bandwidths means SF11 and SF12 at 125 kHz and below.
pub fn default_low_dr_optimize(sf: SpreadingFactor, bandwidth_hz: u32) -> bool {
    sf.value() >= 11 && bandwidth_hz <= 125_000
}

/// Symbol duration `2^SF / BW` in seconds.
pub fn symbol_duration(sf: u8, bandwidth_hz: u32) -> Result<f64> {
    let sf = SpreadingFactor::new(sf)?;
    if bandwidth_hz == 0 {
        return Err(Error::Bandwidth(bandwidth_hz));
    }
    Ok(f64::from(1u32 << sf.value()) / f64::from(bandwidth_hz))
}

/// Frame airtime in seconds, evaluated without rounding.
pub fn time_on_air(profile: &TransmissionProfile) -> Result<f64> {
    profile.validate()?;
    Ok(airtime_secs_unchecked(profile))
}

/// Frame airtime in whole microseconds, rounded up so that a frame never
/// occupies the channel for less than its true duration.
pub fn airtime_us(profile: &TransmissionProfile) -> Result<Micros> {
    profile.validate()?;
    Ok(airtime_us_unchecked(profile))
}

/// Airtime of a frame that may carry an empty payload (downlink ACKs).
pub fn frame_airtime_us(profile: &TransmissionProfile) -> Result<Micros> {
    profile.validate_radio()?;
    Ok(airtime_us_unchecked(profile))
}

fn airtime_secs_unchecked(profile: &TransmissionProfile) -> f64 {
    let chips = profile.quarter_symbols() << profile.sf.value();
    chips as f64 / (4.0 * f64::from(profile.bandwidth_hz))
}

fn airtime_us_unchecked(profile: &TransmissionProfile) -> Micros {
    let chips = u128::from(profile.quarter_symbols() << profile.sf.value());
    let numerator = chips * u128::from(MICROS_PER_SEC);
    let denominator = 4 * u128::from(profile.bandwidth_hz);
    numerator.div_ceil(denominator) as Micros
}

/// Coded bit rate `SF · BW/2^SF · 4/CR` in bit/s.
pub fn bit_rate(profile: &TransmissionProfile) -> Result<f64> {
    profile.validate_radio()?;
    Ok(raw_bit_rate(profile)? * 4.0 / f64::from(profile.coding_rate_denominator))
}

/// Chip-limited bit rate `SF · BW/2^SF`, without the coding overhead.
pub fn raw_bit_rate(profile: &TransmissionProfile) -> Result<f64> {
    profile.validate_radio()?;
    let sf = profile.sf.value();
    Ok(f64::from(sf) * f64::from(profile.bandwidth_hz) / f64::from(1u32 << sf))
}

/// Maximum application payload per SF (EU868 regional parameters).
pub fn max_payload(sf: SpreadingFactor) -> usize {
    match sf.value() {
        7 | 8 => 222,
        9 => 115,
        _ => 51,
    }
}
