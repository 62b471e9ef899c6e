//! Monte Carlo simulation of mm-wave picocells along an urban street canyon.
//!
//! The pipeline for one drop: place base stations and users
//! ([`geometry`]), trace rays and build MIMO channels ([`channel`]), solve
//! max-min beamformers per user configuration ([`phy`]), add inter-cell
//! interference ([`interference`]), and split the frame across
//! configurations by LP ([`mac`], [`lp`]). [`sim`] repeats drops and rolls
//! them up into capacity figures; [`config`] and [`experiment`] drive it
//! from files.

pub mod channel;
pub mod config;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod interference;
pub mod lp;
pub mod mac;
pub mod phy;
pub mod scenario;
pub mod sim;

pub use config::{parse_config, parse_config_str, ExperimentName, ExperimentSpec};
pub use error::{Error, Result};
pub use experiment::run_experiment;
pub use scenario::{ArrayGeometry, CanyonScenario, RfConstants, UserAssignment};
