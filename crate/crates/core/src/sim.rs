//! Monte Carlo drops over the centre picocell and the capacity roll-up.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::build_channel_set;
use crate::error::{Error, Result};
use crate::geometry::drop_face_users;
use crate::interference::{draw_interferers, intercell_interference, serving_face};
use crate::mac::{allocate, build_spectral_efficiency_matrix, enumerate_configurations};
use crate::phy::MaxMinOptions;
use crate::scenario::CanyonScenario;

/// Knobs that are not part of the physical scenario.
#[derive(Debug, Clone, Copy)]
pub struct SimOptions {
    pub maxmin: MaxMinOptions,
    /// When set, a drop whose max-min rate clears this floor is re-solved
    /// for maximum sum rate with every user kept above it.
    pub sumrate_floor: Option<f64>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            maxmin: MaxMinOptions::default(),
            sumrate_floor: None,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of drop `index` under `master`. Distinct indices give
/// statistically independent streams.
pub fn drop_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Per-user rate ceiling `(K/Q) s_M`, or `s_M` when every user fits at once.
pub fn saturation_rate(scenario: &CanyonScenario) -> f64 {
    let k = scenario.subarrays_per_face.min(scenario.users_per_face) as f64;
    k / scenario.users_per_face as f64 * scenario.rf.max_spectral_efficiency
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropResult {
    pub seed: u64,
    /// Per-user rate under the chosen time split, bits/s/Hz.
    pub rates: Vec<f64>,
    /// Max-min rate, bits/s/Hz.
    pub min_rate: f64,
    pub x: Vec<f64>,
    /// SINR of each active user, per configuration (empty for the idle one).
    pub sinrs: Vec<Vec<f64>>,
    /// Inter-cell interference at each user, watts.
    pub intercell: Vec<f64>,
    pub saturated: bool,
}

/// One snapshot: `Q` users for `BS_0` East, fresh interferers, `S`, LP.
pub fn run_drop(scenario: &CanyonScenario, seed: u64, opts: &SimOptions) -> Result<DropResult> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let face = serving_face(scenario);
    let users = drop_face_users(scenario, &face, scenario.users_per_face, &mut rng)?;
    let channels = build_channel_set(scenario, &face, &users);
    let interferers = draw_interferers(scenario, &opts.maxmin, &mut rng)?;
    let intercell: Vec<f64> = channels
        .users
        .iter()
        .map(|u| intercell_interference(u, &face, scenario, &interferers).total)
        .collect();

    let configs = enumerate_configurations(scenario.users_per_face, scenario.subarrays_per_face)?;
    let g_max = scenario.tx_array.num_elements() as f64;
    let (s, details) =
        build_spectral_efficiency_matrix(&configs, &channels, &intercell, &scenario.rf, g_max, &opts.maxmin)?;
    let policy = allocate(&s, opts.sumrate_floor)?;
    let min_rate = policy.min_rate();
    let ceiling = saturation_rate(scenario);
    Ok(DropResult {
        seed,
        saturated: (ceiling - min_rate).abs() <= 1e-6,
        min_rate,
        rates: policy.rates,
        x: policy.x,
        sinrs: details.into_iter().map(|d| d.sinr).collect(),
        intercell,
    })
}

/// Empirical distribution of the max-min rate over drops.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub drops: Vec<DropResult>,
    /// `(rate, fraction of drops with max-min rate >= rate)`, rates ascending,
    /// starting at `(0, 1)`.
    pub ccdf: Vec<(f64, f64)>,
    pub saturation_fraction: f64,
    pub mean_min_rate: f64,
    pub median_min_rate: f64,
}

/// Empirical CCDF `P(X >= r)` at each distinct sample, prefixed by `(0, 1)`.
pub fn empirical_ccdf(samples: &[f64]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<f64> = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut out = vec![(0.0, 1.0)];
    let mut i = 0;
    while i < sorted.len() {
        let r = sorted[i];
        let frac = (sorted.len() - i) as f64 / n;
        if r > 0.0 {
            out.push((r, frac));
        }
        while i < sorted.len() && sorted[i] == r {
            i += 1;
        }
    }
    out
}

fn median(samples: &[f64]) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Runs `n_drops` independent drops in parallel. Drop `i` uses
/// `drop_seed(master_seed, i)`, so results do not depend on scheduling.
pub fn run_monte_carlo(
    scenario: &CanyonScenario,
    n_drops: usize,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<MonteCarloSummary> {
    if n_drops == 0 {
        return Err(Error::InvalidScenario("need at least one drop".into()));
    }
    scenario.validate()?;
    let drops: Vec<DropResult> = (0..n_drops as u64)
        .into_par_iter()
        .map(|i| run_drop(scenario, drop_seed(master_seed, i), opts))
        .collect::<Result<_>>()?;
    let rates: Vec<f64> = drops.iter().map(|d| d.min_rate).collect();
    let n = n_drops as f64;
    Ok(MonteCarloSummary {
        ccdf: empirical_ccdf(&rates),
        saturation_fraction: drops.iter().filter(|d| d.saturated).count() as f64 / n,
        mean_min_rate: rates.iter().sum::<f64>() / n,
        median_min_rate: median(&rates),
        drops,
    })
}

/// Capacity per square kilometer, bits/s:
/// `rate * (B / F) * 2Q * n_c`.
pub fn capacity_per_km2(mean_min_rate: f64, bandwidth_hz: f64, reuse: usize, users_per_face: usize, n_c: f64) -> f64 {
    mean_min_rate * (bandwidth_hz / reuse as f64) * 2.0 * users_per_face as f64 * n_c
}

#[derive(Debug, Clone, PartialEq)]
pub struct CapacityReport {
    pub cell_width: f64,
    pub subarrays_per_face: usize,
    pub reuse: usize,
    pub users_per_face: usize,
    pub mean_min_rate: f64,
    pub median_min_rate: f64,
    pub saturation_fraction: f64,
    pub n_c: f64,
    /// bits/s per km².
    pub capacity: f64,
}

impl CapacityReport {
    pub fn capacity_tbps(&self) -> f64 {
        self.capacity / 1e12
    }
}

/// The `(d, K, F)` cells of the capacity table: `K = 1, 2` at `F = 1` and
/// `K = 1, 2, 4` at `F = 2`, for `d = 100, 50, 20` m.
pub fn capacity_grid() -> Vec<(f64, usize, usize)> {
    let mut grid = Vec::new();
    for d in [100.0, 50.0, 20.0] {
        for k in [1, 2] {
            grid.push((d, k, 1));
        }
        for k in [1, 2, 4] {
            grid.push((d, k, 2));
        }
    }
    grid
}

/// Runs every cell of `grid` on top of `base` and rolls each up into a
/// capacity figure. Every cell reuses the same master seed.
pub fn reproduce_capacity_table(
    base: &CanyonScenario,
    grid: &[(f64, usize, usize)],
    n_drops: usize,
    master_seed: u64,
    opts: &SimOptions,
) -> Result<Vec<CapacityReport>> {
    grid.iter()
        .map(|&(d, k, f)| {
            let scenario = CanyonScenario {
                cell_width: d,
                subarrays_per_face: k,
                reuse: f,
                ..base.clone()
            };
            let summary = run_monte_carlo(&scenario, n_drops, master_seed, opts)?;
            let n_c = scenario.cells_per_km2();
            Ok(CapacityReport {
                cell_width: d,
                subarrays_per_face: k,
                reuse: f,
                users_per_face: scenario.users_per_face,
                mean_min_rate: summary.mean_min_rate,
                median_min_rate: summary.median_min_rate,
                saturation_fraction: summary.saturation_fraction,
                n_c,
                capacity: capacity_per_km2(
                    summary.mean_min_rate,
                    scenario.rf.bandwidth_hz,
                    f,
                    scenario.users_per_face,
                    n_c,
                ),
            })
        })
        .collect()
}
