//! Deployment description: canyon geometry, antenna arrays and RF constants.

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Planar antenna array laid out on a rectangular grid.
///
/// `orientation` is the outward face normal. Base-station faces use
/// `+x` (east) or `-x` (west); mobile arrays are re-oriented per user
/// toward the serving base station.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
    pub orientation: Vector3<f64>,
}

impl ArrayGeometry {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            spacing: 0.5,
            orientation: Vector3::x(),
        }
    }

    pub fn num_elements(&self) -> usize {
        self.rows * self.cols
    }

    /// Copy of this array with a different face normal.
    pub fn oriented(&self, normal: Vector3<f64>) -> Self {
        Self {
            orientation: normal.normalize(),
            ..self.clone()
        }
    }

    fn validate(&self, which: &str) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::InvalidScenario(format!("{which} array has no elements")));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "{which} element spacing must be positive, got {}",
                self.spacing
            )));
        }
        if !(self.orientation.norm() > 0.0 && self.orientation.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidScenario(format!("{which} orientation is degenerate")));
        }
        Ok(())
    }
}

/// Link-budget constants. Powers are in dBm, losses in dB.
#[derive(Debug, Clone, PartialEq)]
pub struct RfConstants {
    /// Carrier wavelength, meters.
    pub wavelength: f64,
    /// Oxygen absorption, dB/km.
    pub oxygen_absorption_db_per_km: f64,
    /// Loss per reflection, dB.
    pub reflection_loss_db: f64,
    /// Per-subarray transmit power used by the worst-case link budget.
    pub tx_power_dbm: f64,
    pub eirp_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    /// Total system bandwidth in Hz (split across reuse bands).
    pub bandwidth_hz: f64,
    /// Hardware spectral-efficiency ceiling, bits/s/Hz.
    pub max_spectral_efficiency: f64,
}

impl Default for RfConstants {
    fn default() -> Self {
        let eirp_dbm = 40.0;
        Self {
            wavelength: SPEED_OF_LIGHT / 60e9,
            oxygen_absorption_db_per_km: 16.0,
            reflection_loss_db: 10.0,
            // EIRP spread over a full 8x8 array.
            tx_power_dbm: eirp_dbm - 10.0 * 64f64.log10(),
            eirp_dbm,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 6.0,
            bandwidth_hz: 2e9,
            max_spectral_efficiency: 6.0,
        }
    }
}

impl RfConstants {
    pub fn eirp_watts(&self) -> f64 {
        dbm_to_watts(self.eirp_dbm)
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    fn validate(&self) -> Result<()> {
        let fields = [
            ("wavelength", self.wavelength),
            ("oxygen_absorption", self.oxygen_absorption_db_per_km),
            ("reflection_loss", self.reflection_loss_db),
            ("tx_power", self.tx_power_dbm),
            ("eirp", self.eirp_dbm),
            ("noise_psd", self.noise_psd_dbm_hz),
            ("noise_figure", self.noise_figure_db),
            ("bandwidth", self.bandwidth_hz),
            ("max_spectral_efficiency", self.max_spectral_efficiency),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidScenario(format!("rf constant {name} is not finite")));
            }
        }
        if self.wavelength <= 0.0 {
            return Err(Error::InvalidScenario("wavelength must be positive".into()));
        }
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::InvalidScenario("bandwidth must be positive".into()));
        }
        if self.max_spectral_efficiency <= 0.0 {
            return Err(Error::InvalidScenario("max spectral efficiency must be positive".into()));
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Which users a base-station face serves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserAssignment {
    /// Each face serves users dropped anywhere in its picocell.
    WholeCell,
    /// Each face serves only users closer to it than to the opposite face.
    NearestFace,
}

/// Full description of one canyon deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct CanyonScenario {
    pub street_length: f64,
    /// Street width `W`, wall to wall.
    pub street_width: f64,
    /// Picocell width `d` (base-station spacing along the street).
    pub cell_width: f64,
    pub bs_height: f64,
    pub user_height_max: f64,
    pub user_height_min: f64,
    /// Height of the canyon walls; rays rising above it have escaped.
    pub building_height: f64,
    /// Subarrays per base-station face (`K`).
    pub subarrays_per_face: usize,
    /// Users served per face (`Q`).
    pub users_per_face: usize,
    pub tx_array: ArrayGeometry,
    pub rx_array: ArrayGeometry,
    pub rf: RfConstants,
    /// Frequency reuse factor `F`.
    pub reuse: usize,
    pub user_assignment: UserAssignment,
    pub seed: u64,
}

impl Default for CanyonScenario {
    fn default() -> Self {
        Self {
            street_length: 1000.0,
            street_width: 20.0,
            cell_width: 20.0,
            bs_height: 6.0,
            user_height_max: 2.0,
            user_height_min: 1.0,
            building_height: 30.0,
            subarrays_per_face: 2,
            users_per_face: 6,
            tx_array: ArrayGeometry::new(8, 8),
            rx_array: ArrayGeometry::new(4, 4),
            rf: RfConstants::default(),
            reuse: 2,
            user_assignment: UserAssignment::WholeCell,
            seed: 1,
        }
    }
}

impl CanyonScenario {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("street_length", self.street_length),
            ("street_width", self.street_width),
            ("cell_width", self.cell_width),
            ("user_height_min", self.user_height_min),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidScenario(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.bs_height > self.user_height_max) {
            return Err(Error::InvalidScenario(format!(
                "bs_height ({}) must exceed user_height_max ({})",
                self.bs_height, self.user_height_max
            )));
        }
        if self.user_height_max < self.user_height_min {
            return Err(Error::InvalidScenario(format!(
                "user_height_max ({}) below user_height_min ({})",
                self.user_height_max, self.user_height_min
            )));
        }
        if !(self.building_height >= self.bs_height) {
            return Err(Error::InvalidScenario(format!(
                "building_height ({}) below bs_height ({})",
                self.building_height, self.bs_height
            )));
        }
        if self.street_length < self.cell_width {
            return Err(Error::InvalidScenario(format!(
                "street_length ({}) shorter than one picocell ({})",
                self.street_length, self.cell_width
            )));
        }
        if self.subarrays_per_face == 0 {
            return Err(Error::InvalidScenario("K must be at least 1".into()));
        }
        if self.users_per_face == 0 {
            return Err(Error::InvalidScenario("Q must be at least 1".into()));
        }
        if self.reuse == 0 {
            return Err(Error::InvalidScenario("reuse factor must be at least 1".into()));
        }
        self.tx_array.validate("tx")?;
        self.rx_array.validate("rx")?;
        self.rf.validate()
    }

    /// Number of picocells per square kilometer for the Manhattan roll-up:
    /// 15 one-kilometer canyons, each holding `1000 / d` cells.
    pub fn cells_per_km2(&self) -> f64 {
        15.0 * 1000.0 / self.cell_width
    }

    /// Longest serving link inside a picocell (corner to corner, lowest user).
    pub fn max_link_length(&self) -> f64 {
        let dz = self.bs_height - self.user_height_min;
        (self.cell_width.powi(2) + self.street_width.powi(2) + dz * dz).sqrt()
    }
}
