use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("spreading factor {0} outside 7..=12")]
    SpreadingFactor(u8),
    #[error("unsupported bandwidth {0} Hz")]
    Bandwidth(u32),
    #[error("coding rate denominator {0} outside 5..=8")]
    CodingRate(u8),
    #[error("preamble must have at least one symbol")]
    Preamble,
    #[error("payload of {payload} B invalid for SF{sf} (allowed 1..={max} B)")]
    Payload { sf: u8, payload: usize, max: usize },
    #[error("duty cycle {0} outside (0, 1]")]
    DutyCycle(f64),
    #[error("{what} must be positive and finite, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("distance {0} km is below the 0.1 km path-loss validity floor")]
    BelowValidityFloor(f64),
    #[error("link budget {budget_db} dB is below the {floor_db} dB loss at the validity floor")]
    BudgetTooSmall { budget_db: f64, floor_db: f64 },
    #[error("frequency {0} MHz outside the 150..=1500 MHz model range")]
    Frequency(f64),
    #[error("sensitivities must strictly decrease with SF")]
    SensitivityOrder,
    #[error("cell radius {radius_km} km exceeds SF12 range; annulus {covered_km}..{radius_km} km uncovered")]
    Coverage { covered_km: f64, radius_km: f64 },
    #[error("invalid SF probability vector: {0}")]
    Probabilities(String),
    #[error("unknown sub-band {0}")]
    UnknownSubBand(usize),
    #[error("sub-band {sub_band} blocked until {blocked_until} us, transmission requested at {at} us")]
    LedgerBlocked { sub_band: usize, at: u64, blocked_until: u64 },
    #[error("invalid scenario: {0}")]
    Scenario(String),
    #[error("event time overflowed the simulation horizon")]
    EventHorizon,
}
