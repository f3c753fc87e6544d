//! Gateway downlink side: Class A receive windows under the gateway's own
//! duty-cycle ledgers.

use crate::error::Result;
use crate::phy::{frame_airtime_us, Micros, SpreadingFactor, TransmissionProfile, MICROS_PER_SEC};
use crate::regulation::{AirtimeLedger, ChannelPlan};

#[derive(Debug, Clone, PartialEq)]
pub struct GatewayConfig {
    /// A transmitting gateway hears nothing.
    pub half_duplex: bool,
    /// Duty cycle on the uplink sub-bands, used for RX1 replies.
    pub rx1_duty_cycle: f64,
    /// Duty cycle of the dedicated RX2 sub-band.
    pub rx2_duty_cycle: f64,
    pub rx1_delay_us: Micros,
    pub rx2_delay_us: Micros,
    /// RX2 runs at the lowest data rate.
    pub rx2_sf: SpreadingFactor,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        Self {
            half_duplex: false,
            rx1_duty_cycle: 0.01,
            rx2_duty_cycle: 0.1,
            rx1_delay_us: MICROS_PER_SEC,
            rx2_delay_us: 2 * MICROS_PER_SEC,
            rx2_sf: SpreadingFactor::SF12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AckPlan {
    Rx1 { start: Micros, airtime: Micros },
    Rx2 { start: Micros, airtime: Micros },
    Missed,
}

#[derive(Debug, Clone)]
pub struct GatewayState {
    pub config: GatewayConfig,
    bandwidth_hz: u32,
    rx1_ledgers: AirtimeLedger,
    rx2_ledger: AirtimeLedger,
    /// Committed downlink intervals that have not finished yet.
    reservations: Vec<(Micros, Micros)>,
    pub airtime_us: Micros,
}

impl GatewayState {
    pub fn new(config: GatewayConfig, plan: &ChannelPlan) -> Self {
        Self {
            config,
            bandwidth_hz: plan.channel_bandwidth_hz,
            rx1_ledgers: AirtimeLedger::duty_cycle_only(plan.n_sub_bands()),
            rx2_ledger: AirtimeLedger::duty_cycle_only(1),
            reservations: Vec::new(),
            airtime_us: 0,
        }
    }

    /// Airtime of an empty downlink frame.
    pub fn ack_airtime(&self, sf: SpreadingFactor) -> Result<Micros> {
        let mut profile = TransmissionProfile::new(sf, 0).with_bandwidth(self.bandwidth_hz);
        profile.crc_enabled = false;
        frame_airtime_us(&profile)
    }

    fn radio_free(&self, start: Micros, airtime: Micros) -> bool {
        let end = start + airtime;
        self.reservations.iter().all(|&(s, e)| e <= start || s >= end)
    }

    /// True if a committed downlink covers `at`.
    pub fn transmitting_at(&self, at: Micros) -> bool {
        self.reservations.iter().any(|&(s, e)| s <= at && at < e)
    }

    /// Chooses the receive window for an acknowledgement of an uplink that
    /// ended at `uplink_end`, and commits the downlink if one is possible.
    ///
    /// RX1 reuses the uplink channel and SF. If the gateway is still in its
    /// off-period there (or already busy), RX2 on the dedicated sub-band at
    /// the lowest data rate is tried instead.
    pub fn schedule_class_a_downlink(
        &mut self,
        sub_band: usize,
        sf: SpreadingFactor,
        uplink_end: Micros,
    ) -> Result<AckPlan> {
        self.reservations.retain(|&(_, e)| e > uplink_end);

        let start = uplink_end + self.config.rx1_delay_us;
        let airtime = self.ack_airtime(sf)?;
        if self.rx1_ledgers.can_transmit(sub_band, start)? && self.radio_free(start, airtime) {
            self.rx1_ledgers.record_tx(sub_band, start, airtime, self.config.rx1_duty_cycle)?;
            self.commit(start, airtime);
            return Ok(AckPlan::Rx1 { start, airtime });
        }

        let start = uplink_end + self.config.rx2_delay_us;
        let airtime = self.ack_airtime(self.config.rx2_sf)?;
        if self.rx2_ledger.can_transmit(0, start)? && self.radio_free(start, airtime) {
            self.rx2_ledger.record_tx(0, start, airtime, self.config.rx2_duty_cycle)?;
            self.commit(start, airtime);
            return Ok(AckPlan::Rx2 { start, airtime });
        }
        Ok(AckPlan::Missed)
    }

    fn commit(&mut self, start: Micros, airtime: Micros) {
        self.reservations.push((start, start + airtime));
        self.airtime_us += airtime;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gateway() -> GatewayState {
        GatewayState::new(GatewayConfig::default(), &ChannelPlan::eu868_default())
    }

    #[test]
    fn sparse_traffic_acks_in_rx1() {
        let mut gw = gateway();
        let airtime = gw.ack_airtime(SpreadingFactor::SF7).unwrap();
        assert_eq!(
            gw.schedule_class_a_downlink(0, SpreadingFactor::SF7, 5_000_000).unwrap(),
            AckPlan::Rx1 { start: 6_000_000, airtime }
        );
        assert!(gw.transmitting_at(6_000_000));
        assert!(!gw.transmitting_at(6_000_000 + airtime));
    }

    #[test]
    fn off_period_pushes_to_rx2_then_misses() {
        let mut gw = gateway();
        assert!(matches!(gw.schedule_class_a_downlink(1, SpreadingFactor::SF9, 0).unwrap(), AckPlan::Rx1 { .. }));
        // Same sub-band a moment later: RX1 blocked by the 1 % off-period.
        let second = gw.schedule_class_a_downlink(1, SpreadingFactor::SF9, 500_000).unwrap();
        let rx2_airtime = gw.ack_airtime(SpreadingFactor::SF12).unwrap();
        assert_eq!(second, AckPlan::Rx2 { start: 2_500_000, airtime: rx2_airtime });
        // RX2 now in its 10 % off-period as well.
        assert_eq!(gw.schedule_class_a_downlink(1, SpreadingFactor::SF9, 600_000).unwrap(), AckPlan::Missed);
        // Another sub-band's RX1 is unaffected.
        assert!(matches!(gw.schedule_class_a_downlink(2, SpreadingFactor::SF9, 600_000).unwrap(), AckPlan::Rx1 { .. }));
    }

    #[test]
    fn single_radio_never_overlaps_downlinks() {
        let mut gw = gateway();
        let a = gw.schedule_class_a_downlink(0, SpreadingFactor::SF12, 0).unwrap();
        let b = gw.schedule_class_a_downlink(1, SpreadingFactor::SF12, 10).unwrap();
        let AckPlan::Rx1 { start: s1, airtime: t1 } = a else { panic!() };
        match b {
            AckPlan::Rx1 { start, .. } | AckPlan::Rx2 { start, .. } => assert!(start >= s1 + t1),
            AckPlan::Missed => {}
        }
    }
}
