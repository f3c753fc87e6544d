//! Single-gateway disk deployments and their spreading-factor rings.
//!
//! Devices are spread uniformly over a disk of radius `R` around the gateway
//! and pick the lowest SF whose link budget covers their distance under the
//! Okumura-Hata small/medium-city model. Ring `i` is the annulus between the
//! SF(i−1) and SF(i) ranges, so `p_i = (r_i² − r_{i−1}²) / R²`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::phy::SpreadingFactor;
use crate::rng::{self, Domain};

/// Distances below this are outside the Hata model's range.
pub const VALIDITY_FLOOR_KM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Environment {
    #[default]
    UrbanSmallCity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub frequency_mhz: f64,
    pub base_height_m: f64,
    pub mobile_height_m: f64,
    pub environment: Environment,
}

impl PathLossModel {
    pub fn new(frequency_mhz: f64, base_height_m: f64, mobile_height_m: f64) -> Result<Self> {
        if !(150.0..=1500.0).contains(&frequency_mhz) {
            return Err(Error::Frequency(frequency_mhz));
        }
        for (what, value) in [("base_height_m", base_height_m), ("mobile_height_m", mobile_height_m)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositive { what, value });
            }
        }
        Ok(Self { frequency_mhz, base_height_m, mobile_height_m, environment: Environment::UrbanSmallCity })
    }

    /// 868 MHz, 30 m gateway mast, 1.5 m end-device.
    pub fn eu868_urban() -> Self {
        Self::new(868.0, 30.0, 1.5).expect("preset is in range")
    }

    fn mobile_correction_db(&self) -> f64 {
        let lf = self.frequency_mhz.log10();
        match self.environment {
            Environment::UrbanSmallCity => (1.1 * lf - 0.7) * self.mobile_height_m - (1.56 * lf - 0.8),
        }
    }

    /// Loss at 1 km.
    pub fn intercept_db(&self) -> f64 {
        69.55 + 26.16 * self.frequency_mhz.log10() - 13.82 * self.base_height_m.log10() - self.mobile_correction_db()
    }

    /// Loss increase per decade of distance.
    pub fn slope_db_per_decade(&self) -> f64 {
        44.9 - 6.55 * self.base_height_m.log10()
    }

    pub fn path_loss_db(&self, distance_km: f64) -> Result<f64> {
        if !(distance_km >= VALIDITY_FLOOR_KM) {
            return Err(Error::BelowValidityFloor(distance_km));
        }
        Ok(self.intercept_db() + self.slope_db_per_decade() * distance_km.log10())
    }

    /// Loss with distances under the validity floor treated as the floor.
    pub fn path_loss_db_clamped(&self, distance_km: f64) -> f64 {
        self.intercept_db() + self.slope_db_per_decade() * distance_km.max(VALIDITY_FLOOR_KM).log10()
    }

    /// Distance at which the path loss equals `link_budget_db`.
    pub fn max_range_km(&self, link_budget_db: f64) -> Result<f64> {
        let floor_db = self.path_loss_db_clamped(VALIDITY_FLOOR_KM);
        if !(link_budget_db >= floor_db) {
            return Err(Error::BudgetTooSmall { budget_db: link_budget_db, floor_db });
        }
        Ok(10f64.powf((link_budget_db - self.intercept_db()) / self.slope_db_per_decade()))
    }
}

/// Receiver sensitivity per SF and the end-device transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityTable {
    /// Indexed by [`SpreadingFactor::index`].
    pub sensitivity_dbm: [f64; 6],
    pub tx_power_dbm: f64,
}

impl SensitivityTable {
    pub fn new(sensitivity_dbm: [f64; 6], tx_power_dbm: f64) -> Result<Self> {
        if sensitivity_dbm.iter().any(|s| !s.is_finite()) || !tx_power_dbm.is_finite() {
            return Err(Error::SensitivityOrder);
        }
        if sensitivity_dbm.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::SensitivityOrder);
        }
        Ok(Self { sensitivity_dbm, tx_power_dbm })
    }

    /// Sensitivities `first_dbm − k·step_db` for SF7+k.
    pub fn uniform_steps(first_dbm: f64, step_db: f64, tx_power_dbm: f64) -> Result<Self> {
        Self::new(std::array::from_fn(|k| first_dbm - step_db * k as f64), tx_power_dbm)
    }

    pub fn link_budget_db(&self, sf: SpreadingFactor) -> f64 {
        self.tx_power_dbm - self.sensitivity_dbm[sf.index()]
    }
}

/// Outer radius and usage probability of each SF ring.
#[derive(Debug, Clone, PartialEq)]
pub struct CellModel {
    pub radius_km: f64,
    /// Outer radius of each ring, indexed by [`SpreadingFactor::index`];
    /// nondecreasing with the last entry equal to `radius_km`.
    pub ring_radii_km: [f64; 6],
    pub probabilities: [f64; 6],
}

impl CellModel {
    /// Derives the rings. Devices pick the lowest SF that closes the link, and
    /// an SF whose budget does not even reach the validity floor gets no ring.
    pub fn build(model: &PathLossModel, sens: &SensitivityTable, radius_km: f64) -> Result<Self> {
        if !(radius_km > 0.0 && radius_km.is_finite()) {
            return Err(Error::NonPositive { what: "radius_km", value: radius_km });
        }
        let mut radii = [0.0; 6];
        let mut previous = 0.0f64;
        for sf in SpreadingFactor::ALL {
            let reach = model.max_range_km(sens.link_budget_db(sf)).unwrap_or(0.0);
            let r = reach.min(radius_km).max(previous);
            radii[sf.index()] = r;
            previous = r;
        }
        let sf12_reach = model.max_range_km(sens.link_budget_db(SpreadingFactor::SF12)).unwrap_or(0.0);
        // Allow for the round trip through log/pow when R is the SF12 range.
        if sf12_reach < radius_km * (1.0 - 1e-12) {
            return Err(Error::Coverage { covered_km: sf12_reach, radius_km });
        }
        radii[5] = radius_km;
        Ok(Self::from_radii(radius_km, radii))
    }

    fn from_radii(radius_km: f64, ring_radii_km: [f64; 6]) -> Self {
        let area = radius_km * radius_km;
        let mut probabilities = [0.0; 6];
        let mut inner = 0.0;
        for (p, &outer) in probabilities.iter_mut().zip(&ring_radii_km) {
            *p = (outer * outer - inner * inner) / area;
            inner = outer;
        }
        let head: f64 = probabilities[..5].iter().sum();
        probabilities[5] = 1.0 - head;
        Self { radius_km, ring_radii_km, probabilities }
    }

    pub fn probability(&self, sf: SpreadingFactor) -> f64 {
        self.probabilities[sf.index()]
    }

    /// Lowest SF whose ring contains `distance_km`, `None` outside the cell.
    pub fn sf_for_distance(&self, distance_km: f64) -> Option<SpreadingFactor> {
        if distance_km > self.radius_km {
            return None;
        }
        SpreadingFactor::ALL.into_iter().find(|sf| distance_km <= self.ring_radii_km[sf.index()])
    }
}

pub fn build_cell(model: &PathLossModel, sens: &SensitivityTable, radius_km: f64) -> Result<CellModel> {
    CellModel::build(model, sens, radius_km)
}

/// Named cell configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellPreset {
    /// 868 MHz urban cell with 2.5 dB sensitivity steps per SF and radius
    /// equal to the SF12 range. Gives the SF mix
    /// (0.19, 0.08, 0.10, 0.14, 0.20, 0.28).
    PaperUrban,
    /// Same radio, but the radius fits inside the SF7 ring.
    SingleRing,
}

impl CellPreset {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "paper-urban" => Some(Self::PaperUrban),
            "single-ring" => Some(Self::SingleRing),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::PaperUrban => "paper-urban",
            Self::SingleRing => "single-ring",
        }
    }

    pub fn path_loss(self) -> PathLossModel {
        PathLossModel::eu868_urban()
    }

    pub fn sensitivities(self) -> SensitivityTable {
        SensitivityTable::uniform_steps(-123.0, 2.5, 14.0).expect("preset is ordered")
    }

    pub fn radius_km(self) -> f64 {
        let model = self.path_loss();
        let sens = self.sensitivities();
        let sf = match self {
            Self::PaperUrban => SpreadingFactor::SF12,
            Self::SingleRing => SpreadingFactor::SF7,
        };
        model.max_range_km(sens.link_budget_db(sf)).expect("preset budgets exceed the validity floor")
    }

    pub fn cell(self) -> CellModel {
        CellModel::build(&self.path_loss(), &self.sensitivities(), self.radius_km()).expect("preset radius is covered")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub distance_km: f64,
    pub sf: SpreadingFactor,
}

/// Draws `n_devices` positions uniformly over the cell area.
pub fn sample_deployment(cell: &CellModel, n_devices: usize, seed: u64) -> Vec<Placement> {
    let mut rng = rng::stream(seed, Domain::Deployment, 0);
    (0..n_devices)
        .map(|_| {
            let u: f64 = rng.gen();
            let distance_km = cell.radius_km * u.sqrt();
            let sf = cell.sf_for_distance(distance_km).unwrap_or(SpreadingFactor::SF12);
            Placement { distance_km, sf }
        })
        .collect()
}
