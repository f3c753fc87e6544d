//! Per-event trace records and the duty-cycle audit run over them.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Write};

use super::event::EventKind;
use crate::phy::{Micros, SpreadingFactor};
use crate::regulation::{max_window_airtime, HOUR_US};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Transmitted,
    DutyBlocked,
    PolicyBlocked,
    RadioBusy,
    Delivered,
    Collided,
    GatewayLost,
    Scheduled,
    Unavailable,
    Received,
    Missed,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Self::Transmitted => "transmitted",
            Self::DutyBlocked => "duty_blocked",
            Self::PolicyBlocked => "policy_blocked",
            Self::RadioBusy => "radio_busy",
            Self::Delivered => "delivered",
            Self::Collided => "collided",
            Self::GatewayLost => "gateway_lost",
            Self::Scheduled => "scheduled",
            Self::Unavailable => "unavailable",
            Self::Received => "received",
            Self::Missed => "missed",
        }
    }
}

/// One trace line. For downlink events `channel` is the downlink channel,
/// where the RX2 channel is numbered after the uplink channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub time_us: Micros,
    pub kind: EventKind,
    pub device: u32,
    pub channel: Option<u16>,
    pub sf: SpreadingFactor,
    pub outcome: Outcome,
    /// Airtime for frame and downlink starts; not written to the trace file.
    pub airtime_us: Micros,
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},", self.time_us, self.kind.name(), self.device)?;
        if let Some(c) = self.channel {
            write!(f, "{c}")?;
        }
        write!(f, ",{},{}", self.sf.value(), self.outcome.name())
    }
}

pub const TRACE_HEADER: &str = "time_us,kind,device,channel,sf,outcome";

pub fn write_trace<W: Write>(mut out: W, records: &[TraceRecord]) -> io::Result<()> {
    writeln!(out, "#schema=1")?;
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(out, "{r}")?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditViolation {
    /// `None` for the gateway.
    pub device: Option<u32>,
    pub sub_band: usize,
    pub airtime_us: Micros,
    pub limit_us: Micros,
}

impl fmt::Display for AuditViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.device {
            Some(d) => write!(f, "device {d}")?,
            None => write!(f, "gateway")?,
        }
        write!(f, " sub-band {}: {} us in one hour exceeds {} us", self.sub_band, self.airtime_us, self.limit_us)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AuditSummary {
    pub transmitters_checked: usize,
    /// Largest hourly airtime over the per-transmitter limit, ≤ 1 on success.
    pub worst_fill: f64,
}

/// Sub-band accounting used by [`audit_trace`].
#[derive(Debug, Clone)]
pub struct AuditRules {
    /// Uplink channel → sub-band.
    pub uplink_sub_band: Vec<usize>,
    pub uplink_duty_cycle: f64,
    /// Downlink channel → (gateway sub-band, duty cycle).
    pub downlink_sub_band: Vec<(usize, f64)>,
}

/// Checks that every device and the gateway kept each sub-band's airtime in
/// any sliding hour within `d·3600 s` plus one maximal frame.
pub fn audit_trace(records: &[TraceRecord], rules: &AuditRules) -> Result<AuditSummary, AuditViolation> {
    let mut uplinks: BTreeMap<(u32, usize), Vec<(Micros, Micros)>> = BTreeMap::new();
    let mut downlinks: BTreeMap<usize, (f64, Vec<(Micros, Micros)>)> = BTreeMap::new();
    for r in records {
        match (r.kind, r.outcome, r.channel) {
            (EventKind::FrameStart, Outcome::Transmitted, Some(c)) => {
                let band = rules.uplink_sub_band[usize::from(c)];
                uplinks.entry((r.device, band)).or_default().push((r.time_us, r.airtime_us));
            }
            (EventKind::AckStart, Outcome::Transmitted, Some(c)) => {
                let (band, d) = rules.downlink_sub_band[usize::from(c)];
                downlinks.entry(band).or_insert_with(|| (d, Vec::new())).1.push((r.time_us, r.airtime_us));
            }
            _ => {}
        }
    }

    let mut summary = AuditSummary::default();
    let mut check = |device: Option<u32>, sub_band: usize, d: f64, trace: &mut Vec<(Micros, Micros)>| {
        trace.sort_unstable();
        let max_toa = trace.iter().map(|t| t.1).max().unwrap_or(0);
        let limit_us = (d * HOUR_US as f64).floor() as Micros + max_toa;
        let airtime_us = max_window_airtime(trace, HOUR_US);
        summary.transmitters_checked += 1;
        summary.worst_fill = summary.worst_fill.max(airtime_us as f64 / limit_us as f64);
        if airtime_us > limit_us {
            Err(AuditViolation { device, sub_band, airtime_us, limit_us })
        } else {
            Ok(())
        }
    };
    for ((device, band), trace) in &mut uplinks {
        check(Some(*device), *band, rules.uplink_duty_cycle, trace)?;
    }
    for (band, (d, trace)) in &mut downlinks {
        check(None, *band, *d, trace)?;
    }
    Ok(summary)
}
