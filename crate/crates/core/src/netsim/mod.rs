//! Discrete-event simulator of Class A end-devices around one gateway.
//!
//! Devices generate frames, pick a channel uniformly at random, drop the frame
//! if that channel's sub-band is still in its off-period, and otherwise
//! transmit with pure ALOHA. Frames overlapping in time on the same
//! (channel, SF) are all lost. Delivered frames flagged as confirmed
//! get an acknowledgement in RX1 or RX2 if the gateway's own duty-cycle
//! ledgers allow it.

mod event;
mod gateway;
mod metrics;
mod trace;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;

pub use event::{EventKind, EventQueue, SimEvent};
pub use gateway::{AckPlan, GatewayConfig, GatewayState};
pub use metrics::{aloha_check, AlohaCheck, Counters, GroupMetrics, SimMetrics};
pub use trace::{
    audit_trace, write_trace, AuditRules, AuditSummary, AuditViolation, Outcome, TraceRecord, TRACE_HEADER,
};

use crate::analytic::ScenarioSpec;
use crate::error::{Error, Result};
use crate::phy::{airtime_us, Micros, SpreadingFactor, MICROS_PER_SEC};
use crate::regulation::{AirtimeLedger, FairAccessPolicy};
use crate::rng::{self, Domain};

/// Shortest accepted run.
pub const MIN_DURATION_US: Micros = 600 * MICROS_PER_SEC;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Traffic {
    /// Exponential inter-arrival times at the scenario's `λ`.
    Poisson,
    /// Fixed period with a uniformly random phase per device.
    Periodic { period_us: Micros },
    /// Exactly one frame per device at `trigger + U[0, jitter]`.
    Avalanche { trigger_us: Micros, jitter_us: Micros },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub spec: ScenarioSpec,
    pub traffic: Traffic,
    /// Probability that a frame asks for an acknowledgement.
    pub ack_fraction: f64,
    /// Frames are generated in `[0, duration)`; in-flight exchanges finish.
    pub duration_us: Micros,
    pub seed: u64,
    pub gateway: GatewayConfig,
    pub fair_access: Option<FairAccessPolicy>,
    /// Explicit SF per device; otherwise the SF mix is split by largest remainder.
    pub device_sfs: Option<Vec<SpreadingFactor>>,
    pub record_trace: bool,
}

impl SimConfig {
    pub fn new(spec: ScenarioSpec, duration_us: Micros, seed: u64) -> Self {
        Self {
            spec,
            traffic: Traffic::Poisson,
            ack_fraction: 0.0,
            duration_us,
            seed,
            gateway: GatewayConfig::default(),
            fair_access: None,
            device_sfs: None,
            record_trace: false,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if !(0.0..=1.0).contains(&self.ack_fraction) {
            return Err(Error::Scenario(format!("ack_fraction {} outside [0, 1]", self.ack_fraction)));
        }
        if self.duration_us < MIN_DURATION_US {
            return Err(Error::Scenario(format!(
                "duration {} s is shorter than the 600 s minimum",
                self.duration_us / MICROS_PER_SEC
            )));
        }
        if let Some(sfs) = &self.device_sfs {
            if sfs.len() != self.spec.n_devices as usize {
                return Err(Error::Scenario(format!(
                    "{} device SFs given for {} devices",
                    sfs.len(),
                    self.spec.n_devices
                )));
            }
        }
        match self.traffic {
            Traffic::Periodic { period_us: 0 } => Err(Error::Scenario("period must be positive".into())),
            Traffic::Avalanche { trigger_us, jitter_us } => {
                let last = trigger_us.checked_add(jitter_us).ok_or(Error::EventHorizon)?;
                if last >= self.duration_us {
                    Err(Error::Scenario("avalanche must fall inside the run".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Device SFs: explicit, or `N·p_i` rounded by largest remainder.
    pub fn device_sfs(&self) -> Vec<SpreadingFactor> {
        if let Some(sfs) = &self.device_sfs {
            return sfs.clone();
        }
        let counts = largest_remainder(self.spec.n_devices, &self.spec.sf_probabilities);
        SpreadingFactor::ALL.iter().zip(counts).flat_map(|(&sf, c)| std::iter::repeat_n(sf, c as usize)).collect()
    }

    pub fn audit_rules(&self) -> AuditRules {
        let plan = &self.spec.plan;
        let n_bands = plan.n_sub_bands();
        let mut downlink: Vec<(usize, f64)> =
            (0..plan.n_channels()).map(|c| (plan.sub_band(c).unwrap_or(0), self.gateway.rx1_duty_cycle)).collect();
        downlink.push((n_bands, self.gateway.rx2_duty_cycle));
        AuditRules {
            uplink_sub_band: (0..plan.n_channels()).map(|c| plan.sub_band(c).unwrap_or(0)).collect(),
            uplink_duty_cycle: plan.duty_cycle,
            downlink_sub_band: downlink,
        }
    }
}

/// Integer counts summing to `n` that are closest to `n·p_i`, remainders
/// handed out largest first (ties to the lower SF).
pub fn largest_remainder(n: u32, p: &[f64; 6]) -> [u32; 6] {
    let exact: Vec<f64> = p.iter().map(|&x| x * f64::from(n)).collect();
    let mut counts: [u32; 6] = std::array::from_fn(|i| exact[i].floor() as u32);
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(n.saturating_sub(assigned) as usize) {
        counts[i] += 1;
    }
    counts
}

/// All devices fire once around `trigger_us`, spread over `jitter_us`.
pub fn avalanche_preset(spec: &ScenarioSpec, trigger_us: Micros, jitter_us: Micros, seed: u64) -> SimConfig {
    let duration_us = (trigger_us + jitter_us + 60 * MICROS_PER_SEC).max(MIN_DURATION_US);
    SimConfig {
        traffic: Traffic::Avalanche { trigger_us, jitter_us },
        ..SimConfig::new(spec.clone(), duration_us, seed)
    }
}

struct Device {
    sf: SpreadingFactor,
    airtime: Micros,
    ledger: AirtimeLedger,
    rng: ChaCha8Rng,
    /// Radio occupied (transmitting or waiting for an acknowledgement).
    busy_until: Micros,
    counters: Counters,
    uplink_airtime: Micros,
}

struct Frame {
    device: u32,
    channel: u16,
    sf: SpreadingFactor,
    end: Micros,
    confirmed: bool,
    collided: bool,
    gateway_lost: bool,
    ack: AckPlan,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub metrics: SimMetrics,
    pub trace: Vec<TraceRecord>,
}

struct Simulator<'a> {
    config: &'a SimConfig,
    queue: EventQueue,
    devices: Vec<Device>,
    frames: Vec<Frame>,
    /// Frames in flight per (channel, SF).
    active: Vec<Vec<u32>>,
    gateway: GatewayState,
    trace: Vec<TraceRecord>,
    first_generation: Option<Micros>,
    last_uplink_end: Micros,
}

/// Runs one seeded simulation.
pub fn run(config: &SimConfig) -> Result<SimMetrics> {
    Ok(run_with_trace(config)?.metrics)
}

/// Runs one seeded simulation, keeping the event trace if requested.
pub fn run_with_trace(config: &SimConfig) -> Result<SimOutput> {
    config.validate()?;
    let mut sim = Simulator::new(config)?;
    sim.seed_traffic()?;
    while let Some(event) = sim.queue.pop() {
        sim.handle(event)?;
    }
    Ok(sim.finish())
}

/// Independent runs over `seeds`, executed in parallel, returned in seed order.
pub fn run_seeds(config: &SimConfig, seeds: &[u64]) -> Result<Vec<SimMetrics>> {
    seeds.par_iter().map(|&s| run(&config.with_seed(s))).collect()
}

impl<'a> Simulator<'a> {
    fn new(config: &'a SimConfig) -> Result<Self> {
        let plan = &config.spec.plan;
        let devices = config
            .device_sfs()
            .into_iter()
            .enumerate()
            .map(|(id, sf)| {
                let ledger = if config.fair_access.is_some() {
                    AirtimeLedger::new(plan.n_sub_bands())
                } else {
                    AirtimeLedger::duty_cycle_only(plan.n_sub_bands())
                };
                Ok(Device {
                    sf,
                    airtime: airtime_us(&config.spec.profile(sf))?,
                    ledger,
                    rng: rng::stream(config.seed, Domain::Device, id as u64),
                    busy_until: 0,
                    counters: Counters::default(),
                    uplink_airtime: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            config,
            queue: EventQueue::default(),
            devices,
            frames: Vec::new(),
            active: vec![Vec::new(); plan.n_channels() * 6],
            gateway: GatewayState::new(config.gateway.clone(), plan),
            trace: Vec::new(),
            first_generation: None,
            last_uplink_end: 0,
        })
    }

    fn poisson_gap(&mut self, device: usize) -> Option<Micros> {
        let lambda = self.config.spec.lambda_per_hour;
        if !(lambda > 0.0) {
            return None;
        }
        let mean_us = 3600.0 * MICROS_PER_SEC as f64 / lambda;
        let draw: f64 = Exp1.sample(&mut self.devices[device].rng);
        Some((draw * mean_us).round().max(1.0) as Micros)
    }

    fn seed_traffic(&mut self) -> Result<()> {
        for id in 0..self.devices.len() {
            let first = match self.config.traffic {
                Traffic::Poisson => self.poisson_gap(id),
                Traffic::Periodic { period_us } => Some(self.devices[id].rng.gen_range(0..period_us)),
                Traffic::Avalanche { trigger_us, jitter_us } => {
                    Some(trigger_us + self.devices[id].rng.gen_range(0..=jitter_us))
                }
            };
            if let Some(t) = first.filter(|&t| t < self.config.duration_us) {
                self.queue.push(t, EventKind::Generate, id as u32, 0);
            }
        }
        Ok(())
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        time_us: Micros,
        kind: EventKind,
        device: u32,
        channel: Option<u16>,
        sf: SpreadingFactor,
        outcome: Outcome,
        airtime_us: Micros,
    ) {
        if self.config.record_trace {
            self.trace.push(TraceRecord { time_us, kind, device, channel, sf, outcome, airtime_us });
        }
    }

    fn handle(&mut self, event: SimEvent) -> Result<()> {
        match event.kind {
            EventKind::Generate => self.on_generate(event.time, event.subject),
            EventKind::FrameEnd => self.on_frame_end(event.time, event.frame),
            EventKind::Rx1Open | EventKind::Rx2Open => self.on_window_open(event),
            EventKind::AckStart => self.on_ack_start(event.time, event.frame),
            EventKind::AckEnd => self.on_ack_end(event.time, event.frame),
            EventKind::FrameStart => unreachable!("frame starts are not queued"),
        }
    }

    fn on_generate(&mut self, now: Micros, id: u32) -> Result<()> {
        let idx = id as usize;
        self.first_generation.get_or_insert(now);
        self.devices[idx].counters.generated += 1;

        let gap = match self.config.traffic {
            Traffic::Poisson => self.poisson_gap(idx),
            Traffic::Periodic { period_us } => Some(period_us),
            Traffic::Avalanche { .. } => None,
        };
        if let Some(gap) = gap {
            let t = now.checked_add(gap).ok_or(Error::EventHorizon)?;
            if t < self.config.duration_us {
                self.queue.push(t, EventKind::Generate, id, 0);
            }
        }

        // Draws happen unconditionally so that runs differing only in
        // ack_fraction see identical arrival sequences.
        let (channel_draw, ack_draw): (f64, f64) = {
            let rng = &mut self.devices[idx].rng;
            (rng.gen(), rng.gen())
        };
        let sf = self.devices[idx].sf;

        if now < self.devices[idx].busy_until {
            self.devices[idx].counters.radio_busy += 1;
            self.record(now, EventKind::Generate, id, None, sf, Outcome::RadioBusy, 0);
            return Ok(());
        }

        let plan = &self.config.spec.plan;
        let channel = ((channel_draw * plan.n_channels() as f64) as usize).min(plan.n_channels() - 1);
        let band = plan.sub_band(channel).expect("channel in plan");
        if self.config.spec.enforce_duty_cycle && !self.devices[idx].ledger.can_transmit(band, now)? {
            self.devices[idx].counters.duty_blocked += 1;
            self.record(now, EventKind::Generate, id, None, sf, Outcome::DutyBlocked, 0);
            return Ok(());
        }
        let channel = channel as u16;
        let airtime = self.devices[idx].airtime;
        if let Some(policy) = &self.config.fair_access {
            if !self.devices[idx].ledger.fair_access_allows(policy, airtime, now) {
                self.devices[idx].counters.policy_blocked += 1;
                self.record(now, EventKind::Generate, id, None, sf, Outcome::PolicyBlocked, 0);
                return Ok(());
            }
        }
        let confirmed = ack_draw < self.config.ack_fraction;
        self.record(now, EventKind::Generate, id, Some(channel), sf, Outcome::Transmitted, 0);
        self.start_frame(now, id, channel, confirmed)
    }

    fn start_frame(&mut self, now: Micros, id: u32, channel: u16, confirmed: bool) -> Result<()> {
        let idx = id as usize;
        let plan = &self.config.spec.plan;
        let band = plan.sub_band(usize::from(channel)).expect("channel in plan");
        let device = &mut self.devices[idx];
        let airtime = device.airtime;
        let sf = device.sf;
        let duty = if self.config.spec.enforce_duty_cycle { plan.duty_cycle } else { 1.0 };
        device.ledger.record_tx(band, now, airtime, duty)?;
        device.counters.attempted += 1;
        device.uplink_airtime += airtime;
        let end = now.checked_add(airtime).ok_or(Error::EventHorizon)?;
        device.busy_until = if confirmed {
            // Listening until RX2 has had time to carry an acknowledgement.
            end + self.config.gateway.rx2_delay_us + self.gateway.ack_airtime(self.config.gateway.rx2_sf)?
        } else {
            end
        };
        if confirmed {
            device.counters.ack_requested += 1;
        }

        let frame_id = self.frames.len() as u32;
        let slot = usize::from(channel) * 6 + sf.index();
        let collided = !self.active[slot].is_empty();
        for &other in &self.active[slot] {
            self.frames[other as usize].collided = true;
        }
        self.active[slot].push(frame_id);
        let gateway_lost = self.config.gateway.half_duplex && self.gateway.transmitting_at(now);
        self.frames.push(Frame {
            device: id,
            channel,
            sf,
            end,
            confirmed,
            collided,
            gateway_lost,
            ack: AckPlan::Missed,
        });
        self.record(now, EventKind::FrameStart, id, Some(channel), sf, Outcome::Transmitted, airtime);
        self.queue.push(end, EventKind::FrameEnd, id, frame_id);
        Ok(())
    }

    fn on_frame_end(&mut self, now: Micros, frame_id: u32) -> Result<()> {
        let (device, channel, sf, collided, gateway_lost, confirmed) = {
            let f = &self.frames[frame_id as usize];
            (f.device, f.channel, f.sf, f.collided, f.gateway_lost, f.confirmed)
        };
        let slot = usize::from(channel) * 6 + sf.index();
        self.active[slot].retain(|&f| f != frame_id);
        self.last_uplink_end = self.last_uplink_end.max(now);

        let counters = &mut self.devices[device as usize].counters;
        let outcome = if collided {
            counters.collided += 1;
            Outcome::Collided
        } else if gateway_lost {
            counters.gateway_lost += 1;
            Outcome::GatewayLost
        } else {
            counters.delivered += 1;
            Outcome::Delivered
        };
        self.record(now, EventKind::FrameEnd, device, Some(channel), sf, outcome, 0);

        if confirmed {
            let plan = if outcome == Outcome::Delivered {
                let band = self.config.spec.plan.sub_band(usize::from(channel)).expect("channel in plan");
                self.gateway.schedule_class_a_downlink(band, sf, now)?
            } else {
                AckPlan::Missed
            };
            self.frames[frame_id as usize].ack = plan;
            let rx1 = now + self.config.gateway.rx1_delay_us;
            self.queue.push(rx1, EventKind::Rx1Open, device, frame_id);
        }
        Ok(())
    }

    fn on_window_open(&mut self, event: SimEvent) -> Result<()> {
        let f = &self.frames[event.frame as usize];
        let (device, channel, sf, plan, end) = (f.device, f.channel, f.sf, f.ack, f.end);
        let rx2_channel = self.config.spec.plan.n_channels() as u16;
        let rx2_sf = self.config.gateway.rx2_sf;
        match (event.kind, plan) {
            (EventKind::Rx1Open, AckPlan::Rx1 { start, .. }) => {
                self.record(event.time, EventKind::Rx1Open, device, Some(channel), sf, Outcome::Scheduled, 0);
                self.queue.push(start, EventKind::AckStart, device, event.frame);
            }
            (EventKind::Rx1Open, _) => {
                self.record(event.time, EventKind::Rx1Open, device, Some(channel), sf, Outcome::Unavailable, 0);
                self.queue.push(end + self.config.gateway.rx2_delay_us, EventKind::Rx2Open, device, event.frame);
            }
            (EventKind::Rx2Open, AckPlan::Rx2 { start, .. }) => {
                self.record(event.time, EventKind::Rx2Open, device, Some(rx2_channel), rx2_sf, Outcome::Scheduled, 0);
                self.queue.push(start, EventKind::AckStart, device, event.frame);
            }
            (EventKind::Rx2Open, _) => {
                self.record(event.time, EventKind::Rx2Open, device, Some(rx2_channel), rx2_sf, Outcome::Missed, 0);
                self.devices[device as usize].counters.ack_missed += 1;
            }
            _ => unreachable!("only receive-window events reach here"),
        }
        Ok(())
    }

    fn downlink_of(&self, frame_id: u32) -> (u32, u16, SpreadingFactor, Micros) {
        let f = &self.frames[frame_id as usize];
        match f.ack {
            AckPlan::Rx1 { airtime, .. } => (f.device, f.channel, f.sf, airtime),
            AckPlan::Rx2 { airtime, .. } => {
                (f.device, self.config.spec.plan.n_channels() as u16, self.config.gateway.rx2_sf, airtime)
            }
            AckPlan::Missed => unreachable!("missed acknowledgements are never transmitted"),
        }
    }

    fn on_ack_start(&mut self, now: Micros, frame_id: u32) -> Result<()> {
        let (device, channel, sf, airtime) = self.downlink_of(frame_id);
        if self.config.gateway.half_duplex {
            for slot in &self.active {
                for &f in slot {
                    self.frames[f as usize].gateway_lost = true;
                }
            }
        }
        self.record(now, EventKind::AckStart, device, Some(channel), sf, Outcome::Transmitted, airtime);
        self.queue.push(now + airtime, EventKind::AckEnd, device, frame_id);
        Ok(())
    }

    fn on_ack_end(&mut self, now: Micros, frame_id: u32) -> Result<()> {
        let (device, channel, sf, _) = self.downlink_of(frame_id);
        let state = &mut self.devices[device as usize];
        match self.frames[frame_id as usize].ack {
            AckPlan::Rx1 { .. } => state.counters.ack_rx1 += 1,
            _ => state.counters.ack_rx2 += 1,
        }
        state.busy_until = state.busy_until.min(now);
        self.record(now, EventKind::AckEnd, device, Some(channel), sf, Outcome::Received, 0);
        Ok(())
    }

    fn finish(self) -> SimOutput {
        let mut per_sf: Vec<GroupMetrics> = SpreadingFactor::ALL
            .iter()
            .map(|&sf| GroupMetrics { sf: Some(sf), devices: 0, counters: Counters::default(), uplink_airtime_us: 0 })
            .collect();
        let mut total = GroupMetrics { sf: None, devices: 0, counters: Counters::default(), uplink_airtime_us: 0 };
        for d in &self.devices {
            for g in [&mut per_sf[d.sf.index()], &mut total] {
                g.devices += 1;
                g.counters += d.counters;
                g.uplink_airtime_us += d.uplink_airtime;
            }
        }
        let drain_time_us = self.first_generation.map_or(0, |t0| self.last_uplink_end.saturating_sub(t0));
        SimOutput {
            metrics: SimMetrics {
                seed: self.config.seed,
                duration_us: self.config.duration_us,
                n_channels: self.config.spec.plan.n_channels(),
                payload_bytes: self.config.spec.payload_bytes,
                per_sf,
                total,
                gateway_airtime_us: self.gateway.airtime_us,
                drain_time_us,
            },
            trace: self.trace,
        }
    }
}

#[cfg(test)]
mod tests;
