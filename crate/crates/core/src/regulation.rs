//! Duty-cycle accounting and the daily fair-access budget.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::phy::{Micros, MICROS_PER_SEC};

pub const HOUR_US: Micros = 3_600 * MICROS_PER_SEC;
pub const DAY_US: Micros = 24 * HOUR_US;

fn check_duty_cycle(d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(Error::DutyCycle(d))
    }
}

/// How channels are grouped into regulatory sub-bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SubBandMapping {
    /// Each channel is accounted separately; a device may then sustain
    /// `n·d/T_a` frames per second.
    #[default]
    PerChannel,
    /// All channels share one sub-band (EU868 default channels).
    Shared,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub channel_bandwidth_hz: u32,
    pub duty_cycle: f64,
    /// Sub-band id of every channel; its length is the channel count.
    sub_band_of: Vec<usize>,
}

impl ChannelPlan {
    pub fn new(n_channels: usize, channel_bandwidth_hz: u32, duty_cycle: f64, mapping: SubBandMapping) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::NonPositive { what: "n_channels", value: 0.0 });
        }
        check_duty_cycle(duty_cycle)?;
        let sub_band_of = match mapping {
            SubBandMapping::PerChannel => (0..n_channels).collect(),
            SubBandMapping::Shared => vec![0; n_channels],
        };
        Ok(Self { channel_bandwidth_hz, duty_cycle, sub_band_of })
    }

    /// Three 125 kHz channels at 1 %, each its own sub-band.
    pub fn eu868_default() -> Self {
        Self::new(3, 125_000, 0.01, SubBandMapping::PerChannel).expect("valid plan")
    }

    pub fn n_channels(&self) -> usize {
        self.sub_band_of.len()
    }

    pub fn n_sub_bands(&self) -> usize {
        self.sub_band_of.iter().max().map_or(0, |m| m + 1)
    }

    pub fn sub_band(&self, channel: usize) -> Option<usize> {
        self.sub_band_of.get(channel).copied()
    }

    pub fn mapping(&self) -> SubBandMapping {
        if self.n_channels() > 1 && self.n_sub_bands() == 1 {
            SubBandMapping::Shared
        } else {
            SubBandMapping::PerChannel
        }
    }
}

/// Mandatory silence after a transmission: `toa·(1/d − 1)` seconds.
pub fn off_period(toa: f64, d: f64) -> Result<f64> {
    check_duty_cycle(d)?;
    if !(toa > 0.0 && toa.is_finite()) {
        return Err(Error::NonPositive { what: "toa", value: toa });
    }
    Ok(toa * (1.0 / d - 1.0))
}

/// Off-period in microseconds, rounded to the nearest microsecond.
pub fn off_period_us(toa_us: Micros, d: f64) -> Result<Micros> {
    check_duty_cycle(d)?;
    Ok((toa_us as f64 * (1.0 / d - 1.0)).round() as Micros)
}

/// Highest sustainable frame rate `n·d/toa` in frames per second.
pub fn max_packet_rate(n_channels: usize, d: f64, toa: f64) -> f64 {
    n_channels as f64 * d / toa
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct SubBandState {
    last_end: Micros,
    blocked_until: Micros,
}

/// Per-transmitter duty-cycle state across sub-bands, plus the trailing-day
/// airtime history used by the fair-access check.
#[derive(Debug, Clone, PartialEq)]
pub struct AirtimeLedger {
    sub_bands: Vec<SubBandState>,
    /// (start, airtime) of transmissions that may still fall in the day window.
    history: VecDeque<(Micros, Micros)>,
    track_history: bool,
}

impl AirtimeLedger {
    pub fn new(n_sub_bands: usize) -> Self {
        Self { sub_bands: vec![SubBandState::default(); n_sub_bands], history: VecDeque::new(), track_history: true }
    }

    /// A ledger that enforces off-periods only; its trailing-day airtime
    /// always reads zero.
    pub fn duty_cycle_only(n_sub_bands: usize) -> Self {
        Self { track_history: false, ..Self::new(n_sub_bands) }
    }

    fn state(&self, sub_band: usize) -> Result<&SubBandState> {
        self.sub_bands.get(sub_band).ok_or(Error::UnknownSubBand(sub_band))
    }

    pub fn blocked_until(&self, sub_band: usize) -> Result<Micros> {
        Ok(self.state(sub_band)?.blocked_until)
    }

    pub fn last_end(&self, sub_band: usize) -> Result<Micros> {
        Ok(self.state(sub_band)?.last_end)
    }

    /// Transmission is allowed from `blocked_until` onwards, inclusive.
    pub fn can_transmit(&self, sub_band: usize, at: Micros) -> Result<bool> {
        Ok(at >= self.state(sub_band)?.blocked_until)
    }

    pub fn record_tx(&mut self, sub_band: usize, start: Micros, toa: Micros, d: f64) -> Result<()> {
        check_duty_cycle(d)?;
        let blocked_until = self.state(sub_band)?.blocked_until;
        if start < blocked_until {
            return Err(Error::LedgerBlocked { sub_band, at: start, blocked_until });
        }
        let end = start + toa;
        let state = &mut self.sub_bands[sub_band];
        state.last_end = end;
        state.blocked_until = end + off_period_us(toa, d)?;
        if !self.track_history {
            return Ok(());
        }
        let horizon = start.saturating_sub(DAY_US);
        while self.history.front().is_some_and(|&(s, t)| s + t <= horizon) {
            self.history.pop_front();
        }
        self.history.push_back((start, toa));
        Ok(())
    }

    /// Airtime falling inside `(at − 24 h, at]`.
    pub fn trailing_day_airtime(&self, at: Micros) -> Micros {
        let window_start = at.saturating_sub(DAY_US);
        self.history
            .iter()
            .map(|&(s, t)| {
                let lo = s.max(window_start);
                let hi = (s + t).min(at);
                hi.saturating_sub(lo)
            })
            .sum()
    }

    pub fn fair_access_allows(&self, policy: &FairAccessPolicy, toa: Micros, at: Micros) -> bool {
        self.trailing_day_airtime(at) + toa <= policy.daily_budget_us()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FairAccessPolicy {
    pub daily_airtime_budget_s: f64,
}

impl FairAccessPolicy {
    pub fn new(daily_airtime_budget_s: f64) -> Result<Self> {
        if !(daily_airtime_budget_s > 0.0 && daily_airtime_budget_s.is_finite()) {
            return Err(Error::NonPositive { what: "daily_airtime_budget_s", value: daily_airtime_budget_s });
        }
        Ok(Self { daily_airtime_budget_s })
    }

    pub fn daily_budget_us(&self) -> Micros {
        (self.daily_airtime_budget_s * MICROS_PER_SEC as f64).round() as Micros
    }
}

impl Default for FairAccessPolicy {
    fn default() -> Self {
        Self { daily_airtime_budget_s: 30.0 }
    }
}

/// Largest airtime any window `[t, t + window)` collects from a trace of
/// non-overlapping `(start, airtime)` intervals sorted by start.
pub fn max_window_airtime(trace: &[(Micros, Micros)], window: Micros) -> Micros {
    // Some maximal window starts exactly at a frame start.
    let mut best = 0;
    let mut full = 0; // airtime of frames i..j, all ending inside the window
    let mut j = 0;
    for i in 0..trace.len() {
        let window_end = trace[i].0 + window;
        if j < i {
            j = i;
            full = 0;
        }
        while j < trace.len() && trace[j].0 + trace[j].1 <= window_end {
            full += trace[j].1;
            j += 1;
        }
        let partial = trace.get(j).map_or(0, |&(s, _)| window_end.saturating_sub(s));
        best = best.max(full + partial);
        if j > i {
            full -= trace[i].1;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SF12_10B_US: Micros = 991_232;
    const SF7_10B_US: Micros = 41_216;

    #[test]
    fn off_period_values() {
        let ta = 0.25;
        assert!((off_period(ta, 0.5).unwrap() - ta).abs() < 1e-15);
        assert_eq!(off_period(ta, 1.0).unwrap(), 0.0);
        // 99 · 0.991232 s
        assert!((off_period(0.991232, 0.01).unwrap() - 98.131968).abs() < 1e-9);
        assert_eq!(off_period(1.0, 0.0), Err(Error::DutyCycle(0.0)));
        assert_eq!(off_period(1.0, 1.5), Err(Error::DutyCycle(1.5)));
        assert_eq!(off_period_us(SF12_10B_US, 0.01).unwrap(), 98_131_968);
    }

    #[test]
    fn packet_rate_caps() {
        let sf7 = max_packet_rate(3, 0.01, SF7_10B_US as f64 * 1e-6);
        assert!((sf7 - 0.03 / 0.041216).abs() < 1e-12);
        assert!((sf7 * 3600.0 - 2620.34).abs() < 0.01);
        let sf12 = max_packet_rate(3, 0.01, SF12_10B_US as f64 * 1e-6) * 3600.0;
        assert!((sf12 - 108.95).abs() < 0.01);
        // n·d/T · T / n = d, i.e. 36 s per hour per sub-band at 1 %.
        let per_band_airtime = sf12 * SF12_10B_US as f64 * 1e-6 / 3.0;
        assert!((per_band_airtime - 36.0).abs() < 1e-9);
    }

    #[test]
    fn ledger_blocks_for_off_period() {
        let mut ledger = AirtimeLedger::new(3);
        for band in 0..3 {
            assert!(ledger.can_transmit(band, 0).unwrap());
        }
        ledger.record_tx(1, 5_000_000, MICROS_PER_SEC, 0.01).unwrap();
        let end = 6_000_000;
        assert!(!ledger.can_transmit(1, end).unwrap());
        assert!(!ledger.can_transmit(1, end + 99 * MICROS_PER_SEC - 1).unwrap());
        assert!(ledger.can_transmit(1, end + 99 * MICROS_PER_SEC).unwrap());
        assert!(ledger.can_transmit(0, end).unwrap());
        assert_eq!(ledger.last_end(1).unwrap(), end);
        assert_eq!(ledger.blocked_until(1).unwrap(), end + 99 * MICROS_PER_SEC);
        assert_eq!(ledger.trailing_day_airtime(end), MICROS_PER_SEC);
    }

    #[test]
    fn ledger_errors() {
        let mut ledger = AirtimeLedger::new(1);
        assert_eq!(ledger.can_transmit(4, 0), Err(Error::UnknownSubBand(4)));
        ledger.record_tx(0, 0, 1_000, 0.01).unwrap();
        assert_eq!(
            ledger.record_tx(0, 50_000, 1_000, 0.01),
            Err(Error::LedgerBlocked { sub_band: 0, at: 50_000, blocked_until: 100_000 })
        );
        ledger.record_tx(0, 100_000, 1_000, 0.01).unwrap();
    }

    #[test]
    fn fair_access_budget() {
        let policy = FairAccessPolicy::default();
        let mut ledger = AirtimeLedger::new(1);
        assert!(ledger.fair_access_allows(&policy, MICROS_PER_SEC, 0));
        let mut t = 0;
        for _ in 0..30 {
            ledger.record_tx(0, t, MICROS_PER_SEC, 1.0).unwrap();
            t += 60 * MICROS_PER_SEC;
        }
        assert!(!ledger.fair_access_allows(&policy, MICROS_PER_SEC, t));
        assert!(ledger.fair_access_allows(&policy, MICROS_PER_SEC, DAY_US + 60 * MICROS_PER_SEC + 1));
        assert!(FairAccessPolicy::new(0.0).is_err());
    }

    #[test]
    fn fair_access_sf12_frames() {
        // 30 · 0.991232 = 29.74 s fits, a 31st frame would not.
        let policy = FairAccessPolicy::default();
        let mut ledger = AirtimeLedger::new(1);
        let mut t = 0;
        let mut sent = 0;
        while ledger.fair_access_allows(&policy, SF12_10B_US, t) {
            ledger.record_tx(0, t, SF12_10B_US, 0.01).unwrap();
            t = ledger.blocked_until(0).unwrap();
            sent += 1;
        }
        assert_eq!(sent, 30);
        assert!(t < DAY_US);
    }

    #[test]
    fn window_airtime_examples() {
        assert_eq!(max_window_airtime(&[], 10), 0);
        assert_eq!(max_window_airtime(&[(0, 5)], 10), 5);
        assert_eq!(max_window_airtime(&[(0, 5), (8, 5)], 10), 7);
        assert_eq!(max_window_airtime(&[(0, 5), (8, 5), (30, 2)], 100), 12);
        assert_eq!(max_window_airtime(&[(0, 20)], 10), 10);
    }

    fn brute_window(trace: &[(Micros, Micros)], window: Micros) -> Micros {
        let horizon = trace.last().map_or(0, |&(s, t)| s + t);
        (0..=horizon)
            .map(|t0| trace.iter().map(|&(s, a)| (s + a).min(t0 + window).saturating_sub(s.max(t0))).sum())
            .max()
            .unwrap_or(0)
    }

    proptest! {
        #[test]
        fn window_scan_matches_brute_force(
            gaps in prop::collection::vec((0u64..30, 1u64..15), 0..12),
            window in 1u64..60,
        ) {
            let mut trace = Vec::new();
            let mut t = 0;
            for (gap, len) in gaps {
                t += gap;
                trace.push((t, len));
                t += len;
            }
            prop_assert_eq!(max_window_airtime(&trace, window), brute_window(&trace, window));
        }

        #[test]
        fn greedy_ledger_respects_hourly_budget(
            toas in prop::collection::vec(1_000u64..2_000_000, 1..200),
            d in prop::sample::select(vec![0.001, 0.01, 0.1, 0.5]),
        ) {
            let mut ledger = AirtimeLedger::new(1);
            let mut trace = Vec::new();
            let mut t = 0;
            for toa in &toas {
                ledger.record_tx(0, t, *toa, d).unwrap();
                trace.push((t, *toa));
                t = ledger.blocked_until(0).unwrap();
            }
            let max_toa = *toas.iter().max().unwrap();
            let limit = (d * HOUR_US as f64) as Micros + max_toa;
            prop_assert!(max_window_airtime(&trace, HOUR_US) <= limit);
        }

        #[test]
        fn greedy_rate_approaches_cap(n in 1usize..6, horizon_s in 600u64..20_000) {
            // Always transmitting on the first free channel at its unblock time.
            let toa = SF7_10B_US;
            let d = 0.01;
            let horizon = horizon_s * MICROS_PER_SEC;
            let mut ledger = AirtimeLedger::new(n);
            let mut t = 0;
            let mut sent = 0u64;
            loop {
                let (band, free_at) = (0..n)
                    .map(|b| (b, ledger.blocked_until(b).unwrap()))
                    .min_by_key(|&(_, at)| at)
                    .unwrap();
                t = t.max(free_at);
                if t >= horizon {
                    break;
                }
                ledger.record_tx(band, t, toa, d).unwrap();
                t += toa;
                sent += 1;
            }
            let cap = max_packet_rate(n, d, toa as f64 * 1e-6) * horizon_s as f64;
            prop_assert!((sent as f64 - cap).abs() <= n as f64 + 1.0, "{} vs {}", sent, cap);
        }

        #[test]
        fn off_period_linear_and_decreasing(toa in 0.001f64..5.0, d1 in 0.001f64..1.0, d2 in 0.001f64..1.0) {
            let twice = off_period(2.0 * toa, d1).unwrap();
            prop_assert!((twice - 2.0 * off_period(toa, d1).unwrap()).abs() < 1e-9 * twice.max(1.0));
            if d1 < d2 {
                prop_assert!(off_period(toa, d1).unwrap() > off_period(toa, d2).unwrap());
            }
        }
    }
}
