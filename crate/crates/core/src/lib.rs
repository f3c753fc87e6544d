//! Capacity analysis for single-gateway LoRaWAN cells.
//!
//! * [`phy`]: frame airtime and bit rates.
//! * [`geometry`]: path loss, SF rings and deployments.
//! * [`regulation`]: duty-cycle ledgers and the fair-access budget.
//! * [`analytic`]: ALOHA-superposition throughput model.
//! * [`netsim`]: discrete-event simulator of Class A devices.
//! * [`scenario`]: the scenario file format shared by all front ends.

// `!(x > 0.0)` is used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod geometry;
pub mod netsim;
pub mod phy;
pub mod regulation;
pub mod rng;
pub mod scenario;

pub use analytic::{CapacityReport, ScenarioSpec, Table1Row};
pub use error::{Error, Result};
pub use geometry::{CellModel, CellPreset, PathLossModel, SensitivityTable};
pub use netsim::{SimConfig, SimMetrics, Traffic};
pub use phy::{Micros, SpreadingFactor, TransmissionProfile};
pub use regulation::{AirtimeLedger, ChannelPlan, FairAccessPolicy, SubBandMapping};
