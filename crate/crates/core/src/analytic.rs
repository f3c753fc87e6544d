//! Closed-form capacity model.
//!
//! The network is treated as independent pure-ALOHA systems, one per
//! (channel, SF) pair. A device using SF `i` generates Poisson traffic at `λ`
//! but can send at most `n_sub_bands·d/T_i` frames per second, so its
//! effective rate is `min(λ, cap_i)`. The interfering load seen by one of the
//! `N_i = N·p_i` devices on one channel is
//!
//! ```text
//! G_i = (N_i − 1)·λ_eff,i·T_i / n
//! ```
//!
//! and a frame survives with probability `exp(−2·G_i)` (two-frame
//! vulnerability window, no capture).

use crate::error::{Error, Result};
use crate::geometry::CellPreset;
use crate::phy::{self, max_payload, SpreadingFactor, TransmissionProfile};
use crate::regulation::{max_packet_rate, ChannelPlan};

/// Inputs shared by the analytic model and the simulator.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub n_devices: u32,
    pub plan: ChannelPlan,
    pub payload_bytes: usize,
    /// Per-device generation rate in packets per hour.
    pub lambda_per_hour: f64,
    /// Indexed by [`SpreadingFactor::index`].
    pub sf_probabilities: [f64; 6],
    pub coding_rate_denominator: u8,
    pub preamble_symbols: u16,
    /// When false the duty-cycle rate cap is lifted (plain ALOHA).
    pub enforce_duty_cycle: bool,
}

impl ScenarioSpec {
    /// Three 1 % channels at 125 kHz, CR 4/5, and the urban SF mix.
    pub fn eu868(n_devices: u32, payload_bytes: usize, lambda_per_hour: f64) -> Self {
        Self {
            n_devices,
            plan: ChannelPlan::eu868_default(),
            payload_bytes,
            lambda_per_hour,
            sf_probabilities: CellPreset::PaperUrban.cell().probabilities,
            coding_rate_denominator: 5,
            preamble_symbols: 8,
            enforce_duty_cycle: true,
        }
    }

    pub fn with_lambda(&self, lambda_per_hour: f64) -> Self {
        Self { lambda_per_hour, ..self.clone() }
    }

    pub fn with_devices(&self, n_devices: u32) -> Self {
        Self { n_devices, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 {
            return Err(Error::Scenario("n_devices must be at least 1".into()));
        }
        if !(self.lambda_per_hour >= 0.0) {
            return Err(Error::Scenario(format!("lambda_per_hour {} must be nonnegative", self.lambda_per_hour)));
        }
        validate_probabilities(&self.sf_probabilities)?;
        for sf in self.used_sfs() {
            self.profile(sf).validate()?;
        }
        Ok(())
    }

    /// SFs with nonzero probability.
    pub fn used_sfs(&self) -> impl Iterator<Item = SpreadingFactor> + '_ {
        SpreadingFactor::ALL.into_iter().filter(|sf| self.sf_probabilities[sf.index()] > 0.0)
    }

    pub fn profile(&self, sf: SpreadingFactor) -> TransmissionProfile {
        TransmissionProfile::new(sf, self.payload_bytes)
            .with_bandwidth(self.plan.channel_bandwidth_hz)
            .with_coding_rate(self.coding_rate_denominator)
            .with_preamble(self.preamble_symbols)
    }

    pub fn airtime_s(&self, sf: SpreadingFactor) -> Result<f64> {
        phy::time_on_air(&self.profile(sf))
    }

    /// Duty-cycle ceiling on a single device's frame rate, frames per second.
    pub fn rate_cap(&self, sf: SpreadingFactor) -> Result<f64> {
        if !self.enforce_duty_cycle {
            return Ok(f64::INFINITY);
        }
        Ok(max_packet_rate(self.plan.n_sub_bands(), self.plan.duty_cycle, self.airtime_s(sf)?))
    }

    pub fn devices_using(&self, sf: SpreadingFactor) -> f64 {
        f64::from(self.n_devices) * self.sf_probabilities[sf.index()]
    }
}

pub fn validate_probabilities(p: &[f64; 6]) -> Result<()> {
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(Error::Probabilities(format!("entries must lie in [0, 1]: {p:?}")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Probabilities(format!("entries sum to {sum}")));
    }
    Ok(())
}

/// `min(λ, cap)` in packets per second for a device using `sf`.
pub fn effective_rate(lambda_per_s: f64, sf: SpreadingFactor, spec: &ScenarioSpec) -> Result<f64> {
    if !(lambda_per_s >= 0.0) {
        return Err(Error::Scenario(format!("rate {lambda_per_s} must be nonnegative")));
    }
    Ok(lambda_per_s.min(spec.rate_cap(sf)?))
}

/// Interfering offered load per channel seen by one SF-`sf` device, Erlang.
pub fn offered_load(spec: &ScenarioSpec, sf: SpreadingFactor) -> Result<f64> {
    let lambda_eff = effective_rate(spec.lambda_per_hour / 3600.0, sf, spec)?;
    let interferers = (spec.devices_using(sf) - 1.0).max(0.0);
    Ok(interferers * lambda_eff * spec.airtime_s(sf)? / spec.plan.n_channels() as f64)
}

/// Probability that a transmitted SF-`sf` frame escapes collision.
pub fn success_probability(spec: &ScenarioSpec, sf: SpreadingFactor) -> Result<f64> {
    Ok((-2.0 * offered_load(spec, sf)?).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfCapacity {
    pub sf: SpreadingFactor,
    pub probability: f64,
    /// `N·p_i`, not rounded.
    pub devices: f64,
    pub airtime_s: f64,
    pub lambda_eff_per_hour: f64,
    pub offered_load: f64,
    pub success_probability: f64,
    /// Frames delivered per hour by one device of this SF.
    pub delivered_per_hour: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub n_devices: u32,
    pub payload_bytes: usize,
    pub lambda_per_hour: f64,
    pub per_sf: Vec<SfCapacity>,
    pub per_node_packets_per_hour: f64,
    pub per_node_bytes_per_hour: f64,
    pub network_packets_per_hour: f64,
    /// Delivered over generated frames.
    pub delivery_ratio: f64,
    /// Delivered over transmitted frames.
    pub attempt_success: f64,
}

/// Per-SF and aggregate throughput at the scenario's generation rate.
pub fn per_node_throughput(spec: &ScenarioSpec) -> Result<CapacityReport> {
    spec.validate()?;
    let mut per_sf = Vec::new();
    let mut per_node = 0.0;
    let mut attempted = 0.0;
    for sf in spec.used_sfs() {
        let probability = spec.sf_probabilities[sf.index()];
        let lambda_eff = effective_rate(spec.lambda_per_hour / 3600.0, sf, spec)?;
        let g = offered_load(spec, sf)?;
        let success = (-2.0 * g).exp();
        let delivered_per_hour = lambda_eff * success * 3600.0;
        per_node += probability * delivered_per_hour;
        attempted += probability * lambda_eff * 3600.0;
        per_sf.push(SfCapacity {
            sf,
            probability,
            devices: spec.devices_using(sf),
            airtime_s: spec.airtime_s(sf)?,
            lambda_eff_per_hour: lambda_eff * 3600.0,
            offered_load: g,
            success_probability: success,
            delivered_per_hour,
        });
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 1.0 };
    Ok(CapacityReport {
        n_devices: spec.n_devices,
        payload_bytes: spec.payload_bytes,
        lambda_per_hour: spec.lambda_per_hour,
        per_node_packets_per_hour: per_node,
        per_node_bytes_per_hour: per_node * spec.payload_bytes as f64,
        network_packets_per_hour: per_sf.iter().map(|s| s.devices * s.delivered_per_hour).sum(),
        delivery_ratio: ratio(per_node, spec.lambda_per_hour),
        attempt_success: ratio(per_node, attempted),
        per_sf,
    })
}

/// Throughput at each generation rate in `lambdas_per_hour`.
pub fn throughput_curve(spec: &ScenarioSpec, lambdas_per_hour: &[f64]) -> Result<Vec<CapacityReport>> {
    lambdas_per_hour.iter().map(|&l| per_node_throughput(&spec.with_lambda(l))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationPoint {
    pub n_devices: u32,
    pub network_packets_per_hour: f64,
    pub per_node_packets_per_hour: f64,
}

/// Received frames when every device sends at its duty-cycle ceiling.
pub fn network_received_at_max_rate(template: &ScenarioSpec, n_values: &[u32]) -> Result<Vec<SaturationPoint>> {
    if !template.enforce_duty_cycle {
        return Err(Error::Scenario("saturation curve needs the duty-cycle cap".into()));
    }
    n_values
        .iter()
        .map(|&n| {
            let report = per_node_throughput(&template.with_devices(n).with_lambda(f64::INFINITY))?;
            Ok(SaturationPoint {
                n_devices: n,
                network_packets_per_hour: report.network_packets_per_hour,
                per_node_packets_per_hour: report.per_node_packets_per_hour,
            })
        })
        .collect()
}

/// Search range and resolution for the throughput-maximising rate.
pub const SEARCH_MIN_PER_HOUR: f64 = 1.0;
pub const SEARCH_MAX_PER_HOUR: f64 = 1e5;
pub const SEARCH_POINTS_PER_DECADE: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub lambda_star_per_hour: f64,
    pub report: CapacityReport,
}

/// Maximises per-node throughput over `λ`.
///
/// Scans a logarithmic grid plus every SF's rate cap (where the curve has
/// kinks), refines the best bracket by golden-section search, and reports the
/// smallest rate that attains the maximum so that a plateau resolves to the
/// rate at which it begins.
pub fn maximize_throughput(spec: &ScenarioSpec) -> Result<Optimum> {
    spec.validate()?;
    let eval = |l: f64| -> Result<f64> { Ok(per_node_throughput(&spec.with_lambda(l))?.per_node_packets_per_hour) };

    let decades = (SEARCH_MAX_PER_HOUR / SEARCH_MIN_PER_HOUR).log10();
    let steps = (decades * SEARCH_POINTS_PER_DECADE as f64).round() as usize;
    let mut grid: Vec<f64> =
        (0..=steps).map(|k| SEARCH_MIN_PER_HOUR * 10f64.powf(k as f64 / SEARCH_POINTS_PER_DECADE as f64)).collect();
    for sf in spec.used_sfs() {
        let cap = spec.rate_cap(sf)? * 3600.0;
        if cap.is_finite() && (SEARCH_MIN_PER_HOUR..=SEARCH_MAX_PER_HOUR).contains(&cap) {
            grid.push(cap);
        }
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let mut candidates = grid.iter().map(|&l| Ok((l, eval(l)?))).collect::<Result<Vec<_>>>()?;
    let best = candidates
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .expect("grid is not empty");

    let lo = candidates[best.saturating_sub(1)].0;
    let hi = candidates[(best + 1).min(candidates.len() - 1)].0;
    let refined = golden_section_max(|x| eval(x.exp()), lo.ln(), hi.ln(), 1e-10)?.exp();
    candidates.push((refined, eval(refined)?));

    let top = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let lambda_star =
        candidates.iter().filter(|c| c.1 >= top * (1.0 - 1e-9)).map(|c| c.0).fold(f64::INFINITY, f64::min);
    Ok(Optimum { lambda_star_per_hour: lambda_star, report: per_node_throughput(&spec.with_lambda(lambda_star))? })
}

fn golden_section_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while (b - a).abs() > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok((a + b) / 2.0)
}

/// One deployment column of the maximum-throughput table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table1Row {
    pub n_devices: u32,
    pub payload_bytes: usize,
    pub max_packets_per_hour: f64,
    pub max_bytes_per_hour: f64,
    pub lambda_star_per_hour: f64,
    /// Delivered over generated frames at `λ*`.
    pub success_probability: f64,
    /// Delivered over transmitted frames at `λ*`.
    pub attempt_success: f64,
}

impl Table1Row {
    pub fn from_optimum(opt: &Optimum) -> Self {
        let r = &opt.report;
        Self {
            n_devices: r.n_devices,
            payload_bytes: r.payload_bytes,
            max_packets_per_hour: r.per_node_packets_per_hour,
            max_bytes_per_hour: r.per_node_bytes_per_hour,
            lambda_star_per_hour: opt.lambda_star_per_hour,
            success_probability: r.delivery_ratio,
            attempt_success: r.attempt_success,
        }
    }
}

/// Maximum throughput for `n_devices` on the EU868 urban template.
pub fn table1(n_devices: u32, payload_bytes: usize) -> Result<Table1Row> {
    table1_for(&ScenarioSpec::eu868(n_devices, payload_bytes, 0.0))
}

/// Maximum throughput for an arbitrary template (its `lambda` is ignored).
pub fn table1_for(spec: &ScenarioSpec) -> Result<Table1Row> {
    for sf in spec.used_sfs() {
        let max = max_payload(sf);
        if spec.payload_bytes > max || spec.payload_bytes == 0 {
            return Err(Error::Payload { sf: sf.value(), payload: spec.payload_bytes, max });
        }
    }
    Ok(Table1Row::from_optimum(&maximize_throughput(spec)?))
}
