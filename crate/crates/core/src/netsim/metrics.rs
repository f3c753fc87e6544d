//! Run counters and the rates derived from them.

use std::fmt::Write as _;
use std::ops::AddAssign;

use crate::phy::{Micros, SpreadingFactor, MICROS_PER_SEC};

/// Per-device event counters; summed for SF and network totals.
///
/// Every generated frame is either attempted or dropped for one of three
/// reasons, and every attempted frame ends delivered, collided or lost to a
/// transmitting half-duplex gateway.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Counters {
    pub generated: u64,
    pub attempted: u64,
    pub delivered: u64,
    pub collided: u64,
    pub gateway_lost: u64,
    pub duty_blocked: u64,
    pub policy_blocked: u64,
    pub radio_busy: u64,
    pub ack_requested: u64,
    pub ack_rx1: u64,
    pub ack_rx2: u64,
    pub ack_missed: u64,
}

impl Counters {
    pub fn ack_received(&self) -> u64 {
        self.ack_rx1 + self.ack_rx2
    }

    /// `generated = attempted + dropped` and `attempted = delivered + lost`.
    pub fn is_conserved(&self) -> bool {
        self.generated == self.attempted + self.duty_blocked + self.policy_blocked + self.radio_busy
            && self.attempted == self.delivered + self.collided + self.gateway_lost
    }
}

impl AddAssign for Counters {
    fn add_assign(&mut self, o: Self) {
        self.generated += o.generated;
        self.attempted += o.attempted;
        self.delivered += o.delivered;
        self.collided += o.collided;
        self.gateway_lost += o.gateway_lost;
        self.duty_blocked += o.duty_blocked;
        self.policy_blocked += o.policy_blocked;
        self.radio_busy += o.radio_busy;
        self.ack_requested += o.ack_requested;
        self.ack_rx1 += o.ack_rx1;
        self.ack_rx2 += o.ack_rx2;
        self.ack_missed += o.ack_missed;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupMetrics {
    /// `None` for the whole network.
    pub sf: Option<SpreadingFactor>,
    pub devices: u32,
    pub counters: Counters,
    pub uplink_airtime_us: Micros,
}

impl GroupMetrics {
    /// Delivered over transmitted frames.
    pub fn success_ratio(&self) -> f64 {
        ratio(self.counters.delivered, self.counters.attempted)
    }

    /// Delivered over generated frames.
    pub fn delivery_ratio(&self) -> f64 {
        ratio(self.counters.delivered, self.counters.generated)
    }

    pub fn collision_ratio(&self) -> f64 {
        ratio(self.counters.collided, self.counters.attempted)
    }

    /// Uplink airtime per channel per unit time, in Erlang.
    pub fn offered_load(&self, duration_us: Micros, n_channels: usize) -> f64 {
        self.uplink_airtime_us as f64 / (duration_us as f64 * n_channels as f64)
    }

    /// Load produced by everyone but one device of the group.
    pub fn interferer_load(&self, duration_us: Micros, n_channels: usize) -> f64 {
        if self.devices == 0 {
            return 0.0;
        }
        let share = f64::from(self.devices - 1) / f64::from(self.devices);
        self.offered_load(duration_us, n_channels) * share
    }

    pub fn per_node_packets_per_hour(&self, duration_us: Micros) -> f64 {
        if self.devices == 0 {
            return 0.0;
        }
        self.counters.delivered as f64 / f64::from(self.devices) / hours(duration_us)
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn hours(us: Micros) -> f64 {
    us as f64 / (3600.0 * MICROS_PER_SEC as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    pub seed: u64,
    pub duration_us: Micros,
    pub n_channels: usize,
    pub payload_bytes: usize,
    /// One entry per SF, SF7 first, including unused SFs.
    pub per_sf: Vec<GroupMetrics>,
    pub total: GroupMetrics,
    pub gateway_airtime_us: Micros,
    /// Time from the first generated frame to the end of the last uplink.
    pub drain_time_us: Micros,
}

impl SimMetrics {
    pub fn sf(&self, sf: SpreadingFactor) -> &GroupMetrics {
        &self.per_sf[sf.index()]
    }

    pub fn per_node_packets_per_hour(&self) -> f64 {
        self.total.per_node_packets_per_hour(self.duration_us)
    }

    pub fn per_node_bytes_per_hour(&self) -> f64 {
        self.per_node_packets_per_hour() * self.payload_bytes as f64
    }

    /// Uplink frames delivered per hour over the whole network.
    pub fn goodput_per_hour(&self) -> f64 {
        self.total.counters.delivered as f64 / hours(self.duration_us)
    }

    pub fn ack_success_ratio(&self) -> f64 {
        let c = &self.total.counters;
        ratio(c.ack_received(), c.ack_requested)
    }

    pub fn gateway_utilization(&self) -> f64 {
        self.gateway_airtime_us as f64 / self.duration_us as f64
    }

    fn groups(&self) -> impl Iterator<Item = &GroupMetrics> {
        self.per_sf.iter().chain(std::iter::once(&self.total))
    }

    /// Rows for [`SimMetrics::CSV_HEADER`], one per SF then the total.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for g in self.groups() {
            let c = &g.counters;
            let scope = g.sf.map_or_else(|| "all".to_string(), |sf| sf.value().to_string());
            let per_node = g.per_node_packets_per_hour(self.duration_us);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
                self.seed,
                scope,
                g.devices,
                c.generated,
                c.attempted,
                c.delivered,
                c.collided,
                c.gateway_lost,
                c.duty_blocked,
                c.policy_blocked,
                c.radio_busy,
                c.ack_requested,
                c.ack_rx1,
                c.ack_rx2,
                c.ack_missed,
                g.success_ratio(),
                g.offered_load(self.duration_us, self.n_channels),
                per_node,
                per_node * self.payload_bytes as f64,
                if g.sf.is_none() { self.gateway_utilization() } else { 0.0 },
                if g.sf.is_none() { self.ack_success_ratio() } else { ratio(c.ack_received(), c.ack_requested) },
                if g.sf.is_none() { self.drain_time_us as f64 / MICROS_PER_SEC as f64 } else { 0.0 },
            );
        }
        out
    }

    pub const CSV_HEADER: &'static str = "seed,sf,devices,generated,attempted,delivered,collided,gateway_lost,\
duty_blocked,policy_blocked,radio_busy,ack_requested,ack_rx1,ack_rx2,ack_missed,success_ratio,\
offered_load,per_node_pkt_per_h,per_node_bytes_per_h,gateway_utilization,ack_success_ratio,drain_time_s";
}

/// Pooled per-SF success against the pure-ALOHA prediction `exp(-2G)`, with
/// `G` the measured load of the other devices on the same SF and channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlohaCheck {
    pub sf: SpreadingFactor,
    pub devices: u32,
    pub attempted: u64,
    pub delivered: u64,
    pub interferer_load: f64,
    pub empirical: f64,
    pub predicted: f64,
    /// Deviation in binomial standard errors of the prediction.
    pub z: f64,
}

/// Pools runs of one scenario (different seeds) into one check per used SF.
pub fn aloha_check(runs: &[SimMetrics]) -> Vec<AlohaCheck> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let duration: Micros = runs.iter().map(|m| m.duration_us).sum();
    SpreadingFactor::ALL
        .iter()
        .filter_map(|&sf| {
            let devices = first.sf(sf).devices;
            let (mut attempted, mut delivered, mut airtime) = (0u64, 0u64, 0u64);
            for m in runs {
                let g = m.sf(sf);
                attempted += g.counters.attempted;
                delivered += g.counters.delivered;
                airtime += g.uplink_airtime_us;
            }
            if devices == 0 || attempted == 0 {
                return None;
            }
            let pooled = GroupMetrics {
                sf: Some(sf),
                devices,
                counters: Counters { attempted, delivered, ..Counters::default() },
                uplink_airtime_us: airtime,
            };
            let interferer_load = pooled.interferer_load(duration, first.n_channels);
            let predicted = (-2.0 * interferer_load).exp();
            let empirical = delivered as f64 / attempted as f64;
            let se = (predicted * (1.0 - predicted) / attempted as f64).sqrt();
            let z = if se > 0.0 { (empirical - predicted) / se } else { 0.0 };
            Some(AlohaCheck { sf, devices, attempted, delivered, interferer_load, empirical, predicted, z })
        })
        .collect()
}
