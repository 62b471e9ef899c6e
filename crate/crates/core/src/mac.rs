//! Time-fraction scheduling over user configurations.
//!
//! A configuration is a set of at most `K` users served together. The
//! PHY solver fixes each configuration's per-user spectral efficiency;
//! the scheduler then splits the frame across configurations by LP.

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome};
use crate::phy::{compute_sinr_with_interference, solve_maxmin_sinr, MaxMinOptions};
use crate::scenario::RfConstants;

/// Every subset of `{0..Q}` of size at most `K`, ordered by size and then
/// lexicographically. The empty configuration comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigurationSet {
    pub num_users: usize,
    pub max_active: usize,
    pub configs: Vec<Vec<usize>>,
}

impl ConfigurationSet {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }
}

fn combinations(n: usize, k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if current.len() == k {
        out.push(current.clone());
        return;
    }
    for i in start..n {
        if n - i < k - current.len() {
            break;
        }
        current.push(i);
        combinations(n, k, i + 1, current, out);
        current.pop();
    }
}

pub fn enumerate_configurations(num_users: usize, max_active: usize) -> Result<ConfigurationSet> {
    if num_users == 0 || max_active == 0 {
        return Err(Error::InvalidScenario("Q and K must both be at least 1".into()));
    }
    let mut configs = Vec::new();
    for size in 0..=max_active.min(num_users) {
        combinations(num_users, size, 0, &mut Vec::new(), &mut configs);
    }
    Ok(ConfigurationSet {
        num_users,
        max_active,
        configs,
    })
}

/// `C x Q` spectral efficiencies, clipped at the hardware ceiling.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEfficiencyMatrix {
    pub rows: Vec<Vec<f64>>,
    pub ceiling: f64,
}

impl SpectralEfficiencyMatrix {
    pub fn num_configs(&self) -> usize {
        self.rows.len()
    }

    pub fn num_users(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// `S^T x`.
    pub fn rates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_users())
            .map(|q| self.rows.iter().zip(x).map(|(row, xc)| row[q] * xc).sum())
            .collect()
    }
}

/// PHY outcome for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigurationResult {
    pub users: Vec<usize>,
    /// Common SINR from the intra-cell solve, before inter-cell interference.
    pub intracell_gamma: f64,
    /// SINR per active user including inter-cell interference.
    pub sinr: Vec<f64>,
}

/// Runs the max-min beamformer for every configuration and converts the
/// resulting SINRs (with `intercell[q]` watts of outside interference
/// added) into clipped spectral efficiencies.
pub fn build_spectral_efficiency_matrix(
    configs: &ConfigurationSet,
    channels: &ChannelSet,
    intercell: &[f64],
    rf: &RfConstants,
    g_max: f64,
    opts: &MaxMinOptions,
) -> Result<(SpectralEfficiencyMatrix, Vec<ConfigurationResult>)> {
    let q_total = channels.len();
    if q_total != configs.num_users || intercell.len() != q_total {
        return Err(Error::Dimension(format!(
            "{} configurations' users, {q_total} channels, {} interference terms",
            configs.num_users,
            intercell.len()
        )));
    }
    let ceiling = rf.max_spectral_efficiency;
    let mut rows = Vec::with_capacity(configs.len());
    let mut details = Vec::with_capacity(configs.len());
    for users in &configs.configs {
        let mut row = vec![0.0; q_total];
        if users.is_empty() {
            rows.push(row);
            details.push(ConfigurationResult {
                users: Vec::new(),
                intracell_gamma: 0.0,
                sinr: Vec::new(),
            });
            continue;
        }
        let (h, noise) = channels.subset(users);
        let sol = solve_maxmin_sinr(&h, &noise, rf, g_max, opts)?;
        let extra: Vec<f64> = users.iter().map(|&q| intercell[q]).collect();
        let sinr = compute_sinr_with_interference(&sol.beamformers, &h, &noise, &extra)?;
        for (&q, s) in users.iter().zip(&sinr) {
            row[q] = (1.0 + s).log2().min(ceiling);
        }
        rows.push(row);
        details.push(ConfigurationResult {
            users: users.clone(),
            intracell_gamma: sol.achieved_gamma,
            sinr,
        });
    }
    Ok((SpectralEfficiencyMatrix { rows, ceiling }, details))
}

/// Time split `x` over configurations and the per-user rates it yields.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPolicy {
    pub x: Vec<f64>,
    pub rates: Vec<f64>,
    pub objective: f64,
}

impl AllocationPolicy {
    pub fn min_rate(&self) -> f64 {
        self.rates.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}

fn validate_matrix(s: &SpectralEfficiencyMatrix) -> Result<()> {
    let q = s.num_users();
    if s.rows.is_empty() || q == 0 {
        return Err(Error::Dimension("empty spectral-efficiency matrix".into()));
    }
    for row in &s.rows {
        if row.len() != q {
            return Err(Error::Dimension("ragged spectral-efficiency matrix".into()));
        }
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::NonFinite("spectral efficiency entries must be finite and >= 0".into()));
        }
    }
    Ok(())
}

fn policy_from(s: &SpectralEfficiencyMatrix, x: &[f64], objective: f64) -> AllocationPolicy {
    let x: Vec<f64> = x[..s.num_configs()].iter().map(|v| v.max(0.0)).collect();
    AllocationPolicy {
        rates: s.rates(&x),
        x,
        objective,
    }
}

/// Maximizes the minimum user rate: maximize `t` subject to
/// `S^T x >= t 1`, `1^T x = 1`, `x >= 0`.
pub fn solve_maxmin_rate(s: &SpectralEfficiencyMatrix) -> Result<AllocationPolicy> {
    validate_matrix(s)?;
    let c = s.num_configs();
    let mut objective = vec![0.0; c + 1];
    objective[c] = 1.0;
    let mut lp = LinearProgram::maximize(objective);
    for q in 0..s.num_users() {
        let mut row: Vec<f64> = s.rows.iter().map(|r| -r[q]).collect();
        row.push(1.0);
        lp = lp.le(row, 0.0);
    }
    let mut simplex = vec![1.0; c];
    simplex.push(0.0);
    lp = lp.eq(simplex, 1.0);
    match solve_lp(&lp)? {
        LpOutcome::Optimal { x, value } => Ok(policy_from(s, &x, value)),
        other => Err(Error::Lp(format!("max-min rate LP returned {other:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SumRateOutcome {
    Optimal(AllocationPolicy),
    Infeasible,
}

/// Maximizes total rate with every user kept at or above `r_min`.
pub fn solve_sumrate_with_floor(s: &SpectralEfficiencyMatrix, r_min: f64) -> Result<SumRateOutcome> {
    validate_matrix(s)?;
    if !(r_min >= 0.0 && r_min.is_finite()) {
        return Err(Error::InvalidScenario(format!("rate floor must be >= 0, got {r_min}")));
    }
    let c = s.num_configs();
    let objective: Vec<f64> = s.rows.iter().map(|r| r.iter().sum()).collect();
    let mut lp = LinearProgram::maximize(objective);
    for q in 0..s.num_users() {
        lp = lp.le(s.rows.iter().map(|r| -r[q]).collect(), -r_min);
    }
    lp = lp.eq(vec![1.0; c], 1.0);
    match solve_lp(&lp)? {
        LpOutcome::Optimal { x, value } => Ok(SumRateOutcome::Optimal(policy_from(s, &x, value))),
        LpOutcome::Infeasible => Ok(SumRateOutcome::Infeasible),
        LpOutcome::Unbounded => Err(Error::Lp("sum-rate LP cannot be unbounded".into())),
    }
}

/// Max-min allocation, refined to a sum-rate allocation when the max-min
/// rate already clears `r_min`.
pub fn allocate(s: &SpectralEfficiencyMatrix, sumrate_floor: Option<f64>) -> Result<AllocationPolicy> {
    let fair = solve_maxmin_rate(s)?;
    match sumrate_floor {
        Some(r_min) if fair.min_rate() > r_min => match solve_sumrate_with_floor(s, r_min)? {
            SumRateOutcome::Optimal(p) => Ok(p),
            SumRateOutcome::Infeasible => Ok(fair),
        },
        _ => Ok(fair),
    }
}
