//! Flat INI-style scenario files.
//!
//! ```text
//! [geometry]
//! d = 20
//! K = 2
//! Q = 4
//!
//! [rf]
//! reflection_loss_db = 10
//!
//! [mac]
//! F = 2
//!
//! [experiment]
//! name = ccdf
//! drops = 500
//! seed = 7
//! ```
//!
//! Omitted keys keep their defaults. `#` and `;` start comments.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scenario::{CanyonScenario, UserAssignment, SPEED_OF_LIGHT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentName {
    Ccdf,
    CapacityTable,
    AlphaDecay,
    Theorem1Check,
}

impl ExperimentName {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ccdf" => Some(Self::Ccdf),
            "capacity_table" => Some(Self::CapacityTable),
            "alpha_decay" => Some(Self::AlphaDecay),
            "theorem1_check" => Some(Self::Theorem1Check),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ccdf => "ccdf",
            Self::CapacityTable => "capacity_table",
            Self::AlphaDecay => "alpha_decay",
            Self::Theorem1Check => "theorem1_check",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub name: ExperimentName,
    /// Scenario keys set by the file, as `(section.key, value)` in file order.
    pub overrides: Vec<(String, String)>,
    pub out_dir: PathBuf,
    pub drops: usize,
    pub seed: u64,
    /// Monte Carlo trials for `alpha_decay` and traced beams for `theorem1_check`.
    pub trials: usize,
    /// Largest `c` in `alpha_decay`.
    pub c_max: usize,
    /// Time-split LP: `None` keeps the max-min policy, `Some(r)` re-solves
    /// for sum rate above floor `r` when the max-min rate allows it.
    pub sumrate_floor: Option<f64>,
    /// Max-min SINR grid step, dB.
    pub gamma_step_db: f64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: ExperimentName::Ccdf,
            overrides: Vec::new(),
            out_dir: PathBuf::from("."),
            drops: 500,
            seed: 1,
            trials: 1000,
            c_max: 6,
            sumrate_floor: None,
            gamma_step_db: 0.1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::ConfigParse {
        line,
        message: format!("bad value for {key}: \"{value}\""),
    })
}

/// Parses config text. `line` numbers in errors are 1-based.
pub fn parse_config_str(text: &str) -> Result<(CanyonScenario, ExperimentSpec)> {
    let mut sc = CanyonScenario::default();
    let mut spec = ExperimentSpec::default();
    let mut section: Option<String> = None;
    let mut carrier_hz = SPEED_OF_LIGHT / sc.rf.wavelength;
    let mut tx_power_set = false;

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = match raw.find(['#', ';']) {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::ConfigParse {
                line: lineno,
                message: format!("unterminated section header \"{line}\""),
            })?;
            let name = name.trim();
            if !matches!(name, "geometry" | "rf" | "mac" | "experiment") {
                return Err(Error::ConfigParse {
                    line: lineno,
                    message: format!("unknown section [{name}]"),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::ConfigParse {
            line: lineno,
            message: format!("expected key = value, got \"{line}\""),
        })?;
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.as_deref() else {
            return Err(Error::ConfigParse {
                line: lineno,
                message: format!("key \"{key}\" outside any section"),
            });
        };
        let unknown = || Error::UnknownKey {
            section: sec.to_string(),
            key: key.to_string(),
        };
        let f = |v: &str| parse_num::<f64>(lineno, key, v);
        let u = |v: &str| parse_num::<usize>(lineno, key, v);

        match sec {
            "geometry" => match key {
                "street_length" => sc.street_length = f(value)?,
                "W" | "street_width" => sc.street_width = f(value)?,
                "d" | "picocell_width" => sc.cell_width = f(value)?,
                "H_BS" | "bs_height" => sc.bs_height = f(value)?,
                "h_max" | "user_height_max" => sc.user_height_max = f(value)?,
                "user_height_min" => sc.user_height_min = f(value)?,
                "building_height" => sc.building_height = f(value)?,
                "K" | "subarrays_per_face" => sc.subarrays_per_face = u(value)?,
                "Q" | "users_per_face" => sc.users_per_face = u(value)?,
                "tx_rows" => sc.tx_array.rows = u(value)?,
                "tx_cols" => sc.tx_array.cols = u(value)?,
                "rx_rows" => sc.rx_array.rows = u(value)?,
                "rx_cols" => sc.rx_array.cols = u(value)?,
                "element_spacing" => {
                    let s = f(value)?;
                    sc.tx_array.spacing = s;
                    sc.rx_array.spacing = s;
                }
                "user_assignment" => {
                    sc.user_assignment = match value {
                        "whole_cell" => UserAssignment::WholeCell,
                        "nearest_face" => UserAssignment::NearestFace,
                        _ => {
                            return Err(Error::ConfigParse {
                                line: lineno,
                                message: format!("user_assignment must be whole_cell or nearest_face, got \"{value}\""),
                            })
                        }
                    }
                }
                _ => return Err(unknown()),
            },
            "rf" => match key {
                "carrier_hz" => carrier_hz = f(value)?,
                "oxygen_absorption_db_per_km" | "beta" => sc.rf.oxygen_absorption_db_per_km = f(value)?,
                "reflection_loss_db" => sc.rf.reflection_loss_db = f(value)?,
                "tx_power_dbm" => {
                    sc.rf.tx_power_dbm = f(value)?;
                    tx_power_set = true;
                }
                "eirp_dbm" => sc.rf.eirp_dbm = f(value)?,
                "noise_psd_dbm_hz" => sc.rf.noise_psd_dbm_hz = f(value)?,
                "noise_figure_db" => sc.rf.noise_figure_db = f(value)?,
                "bandwidth_hz" | "B" => sc.rf.bandwidth_hz = f(value)?,
                "s_M" | "max_spectral_efficiency" => sc.rf.max_spectral_efficiency = f(value)?,
                _ => return Err(unknown()),
            },
            "mac" => match key {
                "F" | "reuse" => sc.reuse = u(value)?,
                "gamma_step_db" => spec.gamma_step_db = f(value)?,
                "sumrate_floor" => {
                    spec.sumrate_floor = match value {
                        "off" | "none" => None,
                        v => Some(f(v)?),
                    }
                }
                _ => return Err(unknown()),
            },
            "experiment" => match key {
                "name" => {
                    spec.name = ExperimentName::parse(value).ok_or_else(|| Error::ConfigParse {
                        line: lineno,
                        message: format!(
                            "experiment name must be one of ccdf, capacity_table, alpha_decay, theorem1_check; got \"{value}\""
                        ),
                    })?;
                }
                "drops" => spec.drops = u(value)?,
                "seed" => spec.seed = parse_num(lineno, key, value)?,
                "out" => spec.out_dir = PathBuf::from(value),
                "trials" => spec.trials = u(value)?,
                "c_max" => spec.c_max = u(value)?,
                _ => return Err(unknown()),
            },
            _ => unreachable!("section names are checked on entry"),
        }
        if sec != "experiment" {
            spec.overrides.push((format!("{sec}.{key}"), value.to_string()));
        }
    }

    if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
        return Err(Error::InvalidScenario(format!("carrier_hz must be positive, got {carrier_hz}")));
    }
    sc.rf.wavelength = SPEED_OF_LIGHT / carrier_hz;
    if !tx_power_set {
        sc.rf.tx_power_dbm = sc.rf.eirp_dbm - 10.0 * (sc.tx_array.num_elements().max(1) as f64).log10();
    }
    sc.seed = spec.seed;
    validate_spec(&spec)?;
    sc.validate()?;
    Ok((sc, spec))
}

fn validate_spec(spec: &ExperimentSpec) -> Result<()> {
    if spec.drops == 0 {
        return Err(Error::InvalidScenario("drops must be at least 1".into()));
    }
    if spec.trials == 0 {
        return Err(Error::InvalidScenario("trials must be at least 1".into()));
    }
    if spec.c_max == 0 {
        return Err(Error::InvalidScenario("c_max must be at least 1".into()));
    }
    if !(spec.gamma_step_db > 0.0 && spec.gamma_step_db.is_finite()) {
        return Err(Error::InvalidScenario("gamma_step_db must be positive".into()));
    }
    if let Some(r) = spec.sumrate_floor {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::InvalidScenario("sumrate_floor must be >= 0".into()));
        }
    }
    Ok(())
}

/// Reads and parses a config file.
pub fn parse_config(path: &Path) -> Result<(CanyonScenario, ExperimentSpec)> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::ConfigMissing {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&text)
}
