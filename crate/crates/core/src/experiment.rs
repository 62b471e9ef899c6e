//! Named experiments and their CSV artifacts.
//!
//! Every file starts with a `# seed=N` comment line, then a header row.
//! Floats are written with 9 significant digits.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ExperimentName, ExperimentSpec};
use crate::error::{Error, Result};
use crate::geometry::{main_beam_escape_range, sample_user, trace_beam_forward, PathKind};
use crate::interference::{alpha_curve, serving_face};
use crate::phy::MaxMinOptions;
use crate::scenario::{linear_to_db, CanyonScenario};
use crate::sim::{capacity_grid, reproduce_capacity_table, run_monte_carlo, SimOptions};

/// Formats like C's `%.9g`.
pub fn fmt_g9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..9).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{:.*}", (8 - exp) as usize, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Accumulates a CSV body in memory and writes it in one go.
struct Csv {
    text: String,
}

impl Csv {
    fn new(seed: u64, header: &[&str]) -> Self {
        Self {
            text: format!("# seed={seed}\n{}\n", header.join(",")),
        }
    }

    fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).map_err(|source| Error::Output {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn sim_options(spec: &ExperimentSpec) -> SimOptions {
    SimOptions {
        maxmin: MaxMinOptions {
            step_db: spec.gamma_step_db,
            ..Default::default()
        },
        sumrate_floor: spec.sumrate_floor,
    }
}

pub fn ccdf_file_name(scenario: &CanyonScenario) -> String {
    format!(
        "ccdf_{}_{}_{}.csv",
        fmt_g9(scenario.cell_width),
        scenario.subarrays_per_face,
        scenario.users_per_face
    )
}

fn run_ccdf(scenario: &CanyonScenario, spec: &ExperimentSpec) -> Result<Vec<(String, Csv)>> {
    let summary = run_monte_carlo(scenario, spec.drops, spec.seed, &sim_options(spec))?;
    let mut csv = Csv::new(spec.seed, &["rate_bpshz", "ccdf"]);
    for (r, p) in &summary.ccdf {
        csv.row(&[fmt_g9(*r), fmt_g9(*p)]);
    }
    Ok(vec![(ccdf_file_name(scenario), csv)])
}

fn run_capacity(scenario: &CanyonScenario, spec: &ExperimentSpec) -> Result<Vec<(String, Csv)>> {
    let reports = reproduce_capacity_table(scenario, &capacity_grid(), spec.drops, spec.seed, &sim_options(spec))?;
    let mut csv = Csv::new(
        spec.seed,
        &["d_m", "K", "F", "Q", "mean_min_rate", "n_c", "capacity_tbps_km2"],
    );
    for r in &reports {
        csv.row(&[
            fmt_g9(r.cell_width),
            r.subarrays_per_face.to_string(),
            r.reuse.to_string(),
            r.users_per_face.to_string(),
            fmt_g9(r.mean_min_rate),
            fmt_g9(r.n_c),
            fmt_g9(r.capacity_tbps()),
        ]);
    }
    Ok(vec![("capacity.csv".into(), csv)])
}

fn run_alpha(scenario: &CanyonScenario, spec: &ExperimentSpec) -> Result<Vec<(String, Csv)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let alphas = alpha_curve(scenario, spec.c_max, spec.trials, &mut rng)?;
    let mut csv = Csv::new(spec.seed, &["c", "alpha_linear", "alpha_db"]);
    for (i, a) in alphas.iter().enumerate() {
        csv.row(&[(i + 1).to_string(), fmt_g9(*a), fmt_g9(linear_to_db(*a))]);
    }
    Ok(vec![("alpha_decay.csv".into(), csv)])
}

/// One traced main beam: aimed from `BS_0` East at a random in-cell user
/// at up to `h_max`, followed off walls and ground.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Theorem1Trial {
    pub escaped: bool,
    pub max_forward_range: f64,
    pub bound: f64,
}

pub fn theorem1_trials(scenario: &CanyonScenario, trials: usize, seed: u64) -> Result<Vec<Theorem1Trial>> {
    scenario.validate()?;
    let (bound, _) = main_beam_escape_range(scenario.bs_height, scenario.user_height_max, scenario.cell_width)?;
    let face = serving_face(scenario);
    let cell = face.bs_index;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Enough bounces for the shallowest legal aim to leave a tall canyon.
    let max_bounces = 1000;
    Ok((0..trials)
        .map(|_| {
            let mut target = sample_user(scenario, cell, &mut rng);
            // Aim at any height up to h_max, including the ground.
            target.z = rng.random::<f64>() * scenario.user_height_max;
            let paths = crate::geometry::trace_paths(&face.position, &target, scenario);
            let los = paths.iter().find(|p| p.kind == PathKind::LoS).expect("LoS ray");
            let trace = trace_beam_forward(&face.position, &los.departure_dir, scenario, max_bounces);
            Theorem1Trial {
                escaped: trace.escaped(),
                max_forward_range: trace.max_forward_range,
                bound,
            }
        })
        .collect())
}

fn run_theorem1(scenario: &CanyonScenario, spec: &ExperimentSpec) -> Result<Vec<(String, Csv)>> {
    let trials = theorem1_trials(scenario, spec.trials, spec.seed)?;
    let mut csv = Csv::new(spec.seed, &["trial", "escaped", "max_forward_range_m", "bound_m"]);
    for (i, t) in trials.iter().enumerate() {
        csv.row(&[
            i.to_string(),
            t.escaped.to_string(),
            fmt_g9(t.max_forward_range),
            fmt_g9(t.bound),
        ]);
    }
    Ok(vec![("theorem1_check.csv".into(), csv)])
}

/// Runs the experiment named in `spec` and writes its CSVs into
/// `spec.out_dir` (created if missing). Returns the written paths.
pub fn run_experiment(scenario: &CanyonScenario, spec: &ExperimentSpec) -> Result<Vec<PathBuf>> {
    scenario.validate()?;
    let files = match spec.name {
        ExperimentName::Ccdf => run_ccdf(scenario, spec)?,
        ExperimentName::CapacityTable => run_capacity(scenario, spec)?,
        ExperimentName::AlphaDecay => run_alpha(scenario, spec)?,
        ExperimentName::Theorem1Check => run_theorem1(scenario, spec)?,
    };
    std::fs::create_dir_all(&spec.out_dir).map_err(|source| Error::Output {
        path: spec.out_dir.clone(),
        source,
    })?;
    files
        .into_iter()
        .map(|(name, csv)| {
            let path = spec.out_dir.join(name);
            csv.write(&path)?;
            Ok(path)
        })
        .collect()
}
