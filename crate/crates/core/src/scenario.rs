//! TOML scenario files.
//!
//! ```toml
//! [phy]
//! payload_bytes = 10
//!
//! [regulation]
//! n_channels = 3
//! duty_cycle = 0.01
//!
//! [cell]
//! preset = "paper-urban"
//!
//! [traffic]
//! n_devices = 1000
//! lambda_per_hour = 670.0
//! duration_s = 3600
//! seeds = [1, 2, 3]
//! ```
//!
//! Every section is optional and falls back to the EU868 defaults. Unknown
//! keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::analytic::{validate_probabilities, ScenarioSpec};
use crate::error::{Error, Result};
use crate::geometry::{CellModel, CellPreset, PathLossModel, SensitivityTable};
use crate::netsim::{GatewayConfig, SimConfig, Traffic};
use crate::phy::{Micros, MICROS_PER_SEC};
use crate::regulation::{ChannelPlan, FairAccessPolicy, SubBandMapping};

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioFile {
    pub phy: PhySection,
    pub regulation: RegulationSection,
    pub cell: CellSection,
    pub traffic: TrafficSection,
    pub gateway: GatewaySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhySection {
    pub bandwidth_hz: u32,
    pub coding_rate_denominator: u8,
    pub preamble_symbols: u16,
    pub payload_bytes: usize,
}

impl Default for PhySection {
    fn default() -> Self {
        Self { bandwidth_hz: 125_000, coding_rate_denominator: 5, preamble_symbols: 8, payload_bytes: 10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MappingName {
    #[default]
    PerChannel,
    Shared,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegulationSection {
    pub n_channels: usize,
    /// Fraction in (0, 1].
    pub duty_cycle: f64,
    pub sub_band_mapping: MappingName,
    pub enforce_duty_cycle: bool,
    pub fair_access: bool,
    pub fair_access_budget_s: f64,
}

impl Default for RegulationSection {
    fn default() -> Self {
        Self {
            n_channels: 3,
            duty_cycle: 0.01,
            sub_band_mapping: MappingName::PerChannel,
            enforce_duty_cycle: true,
            fair_access: false,
            fair_access_budget_s: 30.0,
        }
    }
}

/// Either a preset, an explicit radio model, or a literal SF mix.
#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CellSection {
    pub preset: Option<String>,
    pub frequency_mhz: Option<f64>,
    pub base_height_m: Option<f64>,
    pub mobile_height_m: Option<f64>,
    pub tx_power_dbm: Option<f64>,
    /// SF7 first.
    pub sensitivity_dbm: Option<[f64; 6]>,
    pub radius_km: Option<f64>,
    /// SF7 first.
    pub sf_probabilities: Option<[f64; 6]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrafficKind {
    #[default]
    Poisson,
    Periodic,
    Avalanche,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrafficSection {
    pub kind: TrafficKind,
    pub n_devices: u32,
    pub lambda_per_hour: f64,
    pub period_s: f64,
    pub trigger_s: f64,
    pub jitter_s: f64,
    pub ack_fraction: f64,
    pub duration_s: f64,
    pub seeds: Vec<u64>,
}

impl Default for TrafficSection {
    fn default() -> Self {
        Self {
            kind: TrafficKind::Poisson,
            n_devices: 100,
            lambda_per_hour: 10.0,
            period_s: 3600.0,
            trigger_s: 60.0,
            jitter_s: 10.0,
            ack_fraction: 0.0,
            duration_s: 3600.0,
            seeds: vec![1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GatewaySection {
    pub half_duplex: bool,
    pub rx1_duty_cycle: f64,
    pub rx2_duty_cycle: f64,
}

impl Default for GatewaySection {
    fn default() -> Self {
        let g = GatewayConfig::default();
        Self { half_duplex: g.half_duplex, rx1_duty_cycle: g.rx1_duty_cycle, rx2_duty_cycle: g.rx2_duty_cycle }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub metrics_path: Option<PathBuf>,
    pub trace_path: Option<PathBuf>,
}

fn seconds_to_us(what: &str, s: f64) -> Result<Micros> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(Error::Scenario(format!("{what} must be a nonnegative number of seconds")));
    }
    Ok((s * MICROS_PER_SEC as f64).round() as Micros)
}

fn check_duty(what: &str, d: f64) -> Result<()> {
    if d > 0.0 && d <= 1.0 {
        Ok(())
    } else {
        Err(Error::Scenario(format!("{what} {d} outside (0, 1]")))
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self> {
        let file: Self = toml::from_str(text).map_err(|e| Error::Scenario(e.message().to_string()))?;
        file.validate()?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Builds everything once so that errors surface at load time.
    pub fn validate(&self) -> Result<()> {
        if self.traffic.seeds.is_empty() {
            return Err(Error::Scenario("traffic.seeds must list at least one seed".into()));
        }
        check_duty("gateway.rx1_duty_cycle", self.gateway.rx1_duty_cycle)?;
        check_duty("gateway.rx2_duty_cycle", self.gateway.rx2_duty_cycle)?;
        self.sim_config(self.traffic.seeds[0])?.validate()
    }

    pub fn cell(&self) -> Result<Option<CellModel>> {
        let c = &self.cell;
        let explicit = c.frequency_mhz.is_some()
            || c.base_height_m.is_some()
            || c.mobile_height_m.is_some()
            || c.tx_power_dbm.is_some()
            || c.sensitivity_dbm.is_some()
            || c.radius_km.is_some();
        let sources =
            usize::from(c.preset.is_some()) + usize::from(explicit) + usize::from(c.sf_probabilities.is_some());
        if sources > 1 {
            return Err(Error::Scenario(
                "cell takes one of: preset, an explicit radio model, or sf_probabilities".into(),
            ));
        }
        if let Some(name) = &c.preset {
            let preset =
                CellPreset::from_name(name).ok_or_else(|| Error::Scenario(format!("unknown cell preset {name:?}")))?;
            return Ok(Some(preset.cell()));
        }
        if explicit {
            let missing = |k: &str| Error::Scenario(format!("cell.{k} is required for an explicit model"));
            let model = PathLossModel::new(
                c.frequency_mhz.ok_or_else(|| missing("frequency_mhz"))?,
                c.base_height_m.ok_or_else(|| missing("base_height_m"))?,
                c.mobile_height_m.ok_or_else(|| missing("mobile_height_m"))?,
            )?;
            let sens = SensitivityTable::new(
                c.sensitivity_dbm.ok_or_else(|| missing("sensitivity_dbm"))?,
                c.tx_power_dbm.ok_or_else(|| missing("tx_power_dbm"))?,
            )?;
            return CellModel::build(&model, &sens, c.radius_km.ok_or_else(|| missing("radius_km"))?).map(Some);
        }
        Ok(None)
    }

    pub fn sf_probabilities(&self) -> Result<[f64; 6]> {
        if let Some(p) = self.cell.sf_probabilities {
            self.cell()?;
            validate_probabilities(&p)?;
            return Ok(p);
        }
        Ok(self.cell()?.unwrap_or_else(|| CellPreset::PaperUrban.cell()).probabilities)
    }

    pub fn channel_plan(&self) -> Result<ChannelPlan> {
        let r = &self.regulation;
        let mapping = match r.sub_band_mapping {
            MappingName::PerChannel => SubBandMapping::PerChannel,
            MappingName::Shared => SubBandMapping::Shared,
        };
        ChannelPlan::new(r.n_channels, self.phy.bandwidth_hz, r.duty_cycle, mapping)
    }

    pub fn spec(&self) -> Result<ScenarioSpec> {
        let spec = ScenarioSpec {
            n_devices: self.traffic.n_devices,
            plan: self.channel_plan()?,
            payload_bytes: self.phy.payload_bytes,
            lambda_per_hour: self.traffic.lambda_per_hour,
            sf_probabilities: self.sf_probabilities()?,
            coding_rate_denominator: self.phy.coding_rate_denominator,
            preamble_symbols: self.phy.preamble_symbols,
            enforce_duty_cycle: self.regulation.enforce_duty_cycle,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sim_config(&self, seed: u64) -> Result<SimConfig> {
        let t = &self.traffic;
        let traffic = match t.kind {
            TrafficKind::Poisson => Traffic::Poisson,
            TrafficKind::Periodic => Traffic::Periodic { period_us: seconds_to_us("traffic.period_s", t.period_s)? },
            TrafficKind::Avalanche => Traffic::Avalanche {
                trigger_us: seconds_to_us("traffic.trigger_s", t.trigger_s)?,
                jitter_us: seconds_to_us("traffic.jitter_s", t.jitter_s)?,
            },
        };
        let fair_access = if self.regulation.fair_access {
            Some(FairAccessPolicy::new(self.regulation.fair_access_budget_s)?)
        } else {
            None
        };
        Ok(SimConfig {
            traffic,
            ack_fraction: t.ack_fraction,
            gateway: GatewayConfig {
                half_duplex: self.gateway.half_duplex,
                rx1_duty_cycle: self.gateway.rx1_duty_cycle,
                rx2_duty_cycle: self.gateway.rx2_duty_cycle,
                ..GatewayConfig::default()
            },
            fair_access,
            record_trace: self.output.trace_path.is_some(),
            ..SimConfig::new(self.spec()?, seconds_to_us("traffic.duration_s", t.duration_s)?, seed)
        })
    }
}
