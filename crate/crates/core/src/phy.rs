//! Multiuser transmit beamforming with power control.
//!
//! The min-power problem (every user at SINR >= gamma) is solved with the
//! LMMSE fixed-point iteration: virtual uplink powers drive MMSE beam
//! directions, and the matching downlink powers are read off the same
//! beams. The max-min problem under per-subarray EIRP limits walks gamma
//! on a multiplicative grid and keeps the last EIRP-feasible solution.
//!
//! Channels are normalized as `h / sigma` before the iteration so that
//! the fixed point reproduces the SINR definition with per-user noise.
//!
//! All beams live in the span of the active users' channels, so the
//! iteration runs on the `K x K` Gram matrix and only materializes
//! length-`N` beamformers at the end.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{CMatrix, CVector};
use crate::error::{Error, Result};
use crate::scenario::RfConstants;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-user SINR `|w_k^H h_k|^2 / (sum_{i != k} |w_i^H h_k|^2 + sigma_k^2)`.
pub fn compute_sinr(beamformers: &[CVector], channels: &[CVector], noise: &[f64]) -> Result<Vec<f64>> {
    compute_sinr_with_interference(beamformers, channels, noise, &vec![0.0; channels.len()])
}

/// SINR with an extra, already-received interference power per user added
/// to the denominator.
pub fn compute_sinr_with_interference(
    beamformers: &[CVector],
    channels: &[CVector],
    noise: &[f64],
    extra: &[f64],
) -> Result<Vec<f64>> {
    let k = channels.len();
    if beamformers.len() != k || noise.len() != k || extra.len() != k {
        return Err(Error::Dimension(format!(
            "{} beamformers, {k} channels, {} noise powers, {} interference terms",
            beamformers.len(),
            noise.len(),
            extra.len()
        )));
    }
    check_lengths(beamformers.iter().chain(channels))?;
    Ok((0..k)
        .map(|q| {
            let h = &channels[q];
            let signal = beamformers[q].dotc(h).norm_sqr();
            let interference: f64 = (0..k)
                .filter(|&i| i != q)
                .map(|i| beamformers[i].dotc(h).norm_sqr())
                .sum();
            let denom = interference + noise[q] + extra[q];
            if signal == 0.0 {
                0.0
            } else {
                signal / denom
            }
        })
        .collect())
}

fn check_lengths<'a>(mut vs: impl Iterator<Item = &'a CVector>) -> Result<usize> {
    let first = vs
        .next()
        .ok_or_else(|| Error::Dimension("no channel vectors".into()))?;
    let n = first.len();
    if !first.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        return Err(Error::NonFinite("channel or beamformer entry".into()));
    }
    for v in vs {
        if v.len() != n {
            return Err(Error::Dimension(format!("vector length {} != {n}", v.len())));
        }
        if !v.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
            return Err(Error::NonFinite("channel or beamformer entry".into()));
        }
    }
    Ok(n)
}

/// Gram matrix `R_ij = h_i^H h_j`.
fn gram(channels: &[CVector]) -> CMatrix {
    let k = channels.len();
    CMatrix::from_fn(k, k, |i, j| channels[i].dotc(&channels[j]))
}

/// A beam expressed over the channel span: `w = sum_j coeffs_j h_j`.
#[derive(Debug, Clone)]
struct SpanBeam {
    coeffs: Vec<Complex64>,
}

impl SpanBeam {
    /// `w^H h_i` for every channel.
    fn responses(&self, gram: &CMatrix) -> Vec<Complex64> {
        let k = self.coeffs.len();
        (0..k)
            .map(|i| (0..k).map(|j| self.coeffs[j].conj() * gram[(j, i)]).sum())
            .collect()
    }

    fn norm_sqr(&self, gram: &CMatrix) -> f64 {
        let k = self.coeffs.len();
        let mut acc = ZERO;
        for j in 0..k {
            for l in 0..k {
                acc += self.coeffs[j].conj() * gram[(j, l)] * self.coeffs[l];
            }
        }
        acc.re
    }

    fn scaled(&self, s: f64) -> SpanBeam {
        SpanBeam {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    fn materialize(&self, channels: &[CVector]) -> CVector {
        let mut w = CVector::zeros(channels[0].len());
        for (c, h) in self.coeffs.iter().zip(channels) {
            w.axpy(*c, h, Complex64::new(1.0, 0.0));
        }
        w
    }
}

/// Minimizer of `sum_{j != k} p_j |w^H h_j|^2 + |w|^2` subject to
/// `w^H h_k = 1`, in span coordinates. With `A = I + sum_{j != k} p_j h_j h_j^H`
/// the solution is `A^-1 h_k / (h_k^H A^-1 h_k)`; `A^-1 h_k` is formed with
/// the Woodbury identity on the interferers' Gram block.
fn lmmse_span(k: usize, gram: &CMatrix, powers: &[f64]) -> SpanBeam {
    let kk = gram.nrows();
    let others: Vec<usize> = (0..kk).filter(|&j| j != k && powers[j] > 0.0).collect();
    let m = others.len();
    let mut coeffs = vec![ZERO; kk];
    coeffs[k] = Complex64::new(1.0, 0.0);
    if m > 0 {
        let sq: Vec<f64> = others.iter().map(|&j| powers[j].sqrt()).collect();
        let g = DMatrix::from_fn(m, m, |a, b| {
            let v = gram[(others[a], others[b])] * (sq[a] * sq[b]);
            if a == b {
                v + 1.0
            } else {
                v
            }
        });
        let rhs = nalgebra::DVector::from_fn(m, |a, _| gram[(others[a], k)] * sq[a]);
        let y = match g.clone().cholesky() {
            Some(ch) => ch.solve(&rhs),
            None => g.lu().solve(&rhs).unwrap_or_else(|| nalgebra::DVector::zeros(m)),
        };
        for (a, &j) in others.iter().enumerate() {
            coeffs[j] = -y[a] * sq[a];
        }
    }
    let beam = SpanBeam { coeffs };
    // h_k^H A^-1 h_k is real and positive.
    let resp = beam.responses(gram)[k];
    let scale = resp.re;
    beam.scaled(1.0 / scale)
}

/// LMMSE transmit beam for user `k` against the other users' normalized
/// channels weighted by their (uplink) powers. Satisfies `w^H h_k = 1`.
pub fn lmmse_beamformer(k: usize, normalized: &[CVector], powers: &[f64]) -> Result<CVector> {
    if k >= normalized.len() || powers.len() != normalized.len() {
        return Err(Error::Dimension(format!(
            "user {k} of {} channels with {} powers",
            normalized.len(),
            powers.len()
        )));
    }
    check_lengths(normalized.iter())?;
    if powers.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(Error::NonFinite("powers must be finite and non-negative".into()));
    }
    let r = gram(normalized);
    Ok(lmmse_span(k, &r, powers).materialize(normalized))
}

#[derive(Debug, Clone, Copy)]
pub struct PowerOptions {
    pub max_iterations: usize,
    /// Stop when every uplink power changes by less than this, relatively.
    pub tolerance: f64,
    /// Total-power level treated as divergence.
    pub power_cap: f64,
}

impl Default for PowerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            tolerance: 1e-8,
            power_cap: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PowerSolution {
    pub beamformers: Vec<CVector>,
    /// Transmit power per stream, `|w_k|^2`.
    pub powers: Vec<f64>,
    /// Fixed-point uplink powers; a good warm start for a nearby gamma.
    pub uplink_powers: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerSolution {
    pub fn total_power(&self) -> f64 {
        self.powers.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub enum PowerOutcome {
    Feasible(PowerSolution),
    Infeasible,
}

struct SpanSolution {
    beams: Vec<SpanBeam>,
    downlink: Vec<f64>,
    uplink: Vec<f64>,
    iterations: usize,
    converged: bool,
}

/// `a[k][j] = |w_k^H h_j|^2`, plus `|w_k|^2`.
fn cross_gains(beams: &[SpanBeam], gram: &CMatrix) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cross = beams
        .iter()
        .map(|b| b.responses(gram).iter().map(|c| c.norm_sqr()).collect())
        .collect();
    let norms = beams.iter().map(|b| b.norm_sqr(gram)).collect();
    (cross, norms)
}

fn solve_span(
    gram: &CMatrix,
    gamma: f64,
    init: &[f64],
    opts: &PowerOptions,
) -> Option<SpanSolution> {
    let k = gram.nrows();
    let mut p: Vec<f64> = init.to_vec();
    let mut iterations = 0;
    let mut converged = false;
    let mut beams: Vec<SpanBeam>;
    loop {
        beams = (0..k).map(|i| lmmse_span(i, gram, &p)).collect();
        if iterations >= opts.max_iterations {
            break;
        }
        let (cross, norms) = cross_gains(&beams, gram);
        let next: Vec<f64> = (0..k)
            .map(|i| {
                let interf: f64 = (0..k).filter(|&j| j != i).map(|j| p[j] * cross[i][j]).sum();
                gamma * (interf + norms[i])
            })
            .collect();
        iterations += 1;
        let total: f64 = next.iter().sum();
        if !total.is_finite() || total > opts.power_cap {
            return None;
        }
        let change = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs() / a.max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        p = next;
        if change < opts.tolerance {
            converged = true;
            beams = (0..k).map(|i| lmmse_span(i, gram, &p)).collect();
            break;
        }
    }

    // Downlink powers for these beams: the limit of the dual update,
    // (I - gamma Psi) p~ = gamma 1 with Psi_kj = |w_j^H h_k|^2.
    let (cross, _) = cross_gains(&beams, gram);
    let a = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            -gamma * cross[j][i]
        }
    });
    let rhs = nalgebra::DVector::from_element(k, gamma);
    let downlink = a.lu().solve(&rhs)?;
    if downlink.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return None;
    }
    Some(SpanSolution {
        beams,
        downlink: downlink.iter().copied().collect(),
        uplink: p,
        iterations,
        converged,
    })
}

fn normalize_channels(channels: &[CVector], noise: &[f64]) -> Result<Vec<CVector>> {
    if channels.len() != noise.len() {
        return Err(Error::Dimension(format!(
            "{} channels but {} noise powers",
            channels.len(),
            noise.len()
        )));
    }
    check_lengths(channels.iter())?;
    if noise.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
        return Err(Error::NonFinite("noise powers must be positive".into()));
    }
    Ok(channels
        .iter()
        .zip(noise)
        .map(|(h, s)| h / Complex64::new(s.sqrt(), 0.0))
        .collect())
}

fn assemble(span: &SpanSolution, normalized: &[CVector], gram: &CMatrix) -> PowerSolution {
    let beams: Vec<SpanBeam> = span
        .beams
        .iter()
        .zip(&span.downlink)
        .map(|(b, p)| b.scaled(p.sqrt()))
        .collect();
    PowerSolution {
        powers: beams.iter().map(|b| b.norm_sqr(gram)).collect(),
        beamformers: beams.iter().map(|b| b.materialize(normalized)).collect(),
        uplink_powers: span.uplink.clone(),
        iterations: span.iterations,
        converged: span.converged,
    }
}

/// Minimum total power meeting `SINR_k >= gamma` for every user, or
/// `Infeasible` when the power iteration diverges past `opts.power_cap`.
pub fn solve_power_problem(
    channels: &[CVector],
    noise: &[f64],
    gamma: f64,
    init_powers: &[f64],
    opts: &PowerOptions,
) -> Result<PowerOutcome> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidScenario(format!("target SINR must be positive, got {gamma}")));
    }
    if init_powers.len() != channels.len() {
        return Err(Error::Dimension("one initial power per user required".into()));
    }
    let normalized = normalize_channels(channels, noise)?;
    let r = gram(&normalized);
    Ok(match solve_span(&r, gamma, init_powers, opts) {
        Some(span) => PowerOutcome::Feasible(assemble(&span, &normalized, &r)),
        None => PowerOutcome::Infeasible,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct MaxMinOptions {
    /// Multiplicative gamma step, dB.
    pub step_db: f64,
    pub power: PowerOptions,
    /// Divergence cap as a multiple of the EIRP-implied total power.
    pub cap_factor: f64,
}

impl Default for MaxMinOptions {
    fn default() -> Self {
        Self {
            step_db: 0.1,
            power: PowerOptions::default(),
            cap_factor: 1e6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BeamformerSolution {
    pub beamformers: Vec<CVector>,
    pub powers: Vec<f64>,
    pub achieved_gamma: f64,
    pub per_user_sinr: Vec<f64>,
    pub converged: bool,
    /// Inner power iterations summed over every gamma tried.
    pub iterations: usize,
}

impl BeamformerSolution {
    fn zero(k: usize, n: usize) -> Self {
        Self {
            beamformers: vec![CVector::zeros(n); k],
            powers: vec![0.0; k],
            achieved_gamma: 0.0,
            per_user_sinr: vec![0.0; k],
            converged: false,
            iterations: 0,
        }
    }
}

/// Largest common SINR under per-subarray EIRP limits.
///
/// Candidate targets sit on the grid `gamma_ub * 10^(-j step/10)`, where
/// `gamma_ub = min_k (EIRP / G_max) |h_k|^2 / sigma_k^2` is the
/// interference-free ceiling. Required power grows with gamma, so the
/// answer is the smallest `j` whose min-power solution keeps every
/// `G_max |w_k|^2 <= EIRP`; it is located by galloping then halving over
/// `j`, which lands on the same grid point as stepping one notch at a time.
pub fn solve_maxmin_sinr(
    channels: &[CVector],
    noise: &[f64],
    rf: &RfConstants,
    g_max: f64,
    opts: &MaxMinOptions,
) -> Result<BeamformerSolution> {
    if channels.is_empty() {
        return Err(Error::Dimension("no channels".into()));
    }
    if !(opts.step_db > 0.0) {
        return Err(Error::InvalidScenario("gamma step must be positive".into()));
    }
    let normalized = normalize_channels(channels, noise)?;
    let k = channels.len();
    let n = channels[0].len();
    let r = gram(&normalized);
    let per_stream = rf.eirp_watts() / g_max;
    let gamma_ub = (0..k)
        .map(|i| per_stream * r[(i, i)].re)
        .fold(f64::INFINITY, f64::min);
    if !(gamma_ub > 0.0 && gamma_ub.is_finite()) {
        return Ok(BeamformerSolution::zero(k, n));
    }

    let power_opts = PowerOptions {
        power_cap: opts.cap_factor * per_stream * k as f64,
        ..opts.power
    };
    let limit = per_stream * (1.0 + 1e-9);
    let mut total_iterations = 0;
    let mut warm = vec![per_stream; k];
    let grid = |j: u64| gamma_ub * 10f64.powf(-(j as f64) * opts.step_db / 10.0);
    let attempt = |j: u64, warm: &[f64], total_iterations: &mut usize| -> Option<SpanSolution> {
        let span = solve_span(&r, grid(j), warm, &power_opts)?;
        *total_iterations += span.iterations;
        let ok = span
            .beams
            .iter()
            .zip(&span.downlink)
            .all(|(b, p)| b.norm_sqr(&r) * p <= limit);
        ok.then_some(span)
    };

    // Below ~1e-30 of the ceiling nothing useful is left.
    let j_floor = (300.0 / opts.step_db).ceil() as u64;
    let (mut bad, mut good) = (None::<u64>, None::<(u64, SpanSolution)>);
    let mut step = 1u64;
    let mut j = 0u64;
    loop {
        match attempt(j, &warm, &mut total_iterations) {
            Some(span) => {
                warm = span.uplink.clone();
                good = Some((j, span));
                break;
            }
            None => {
                bad = Some(j);
                if j >= j_floor {
                    break;
                }
                j = (j + step).min(j_floor);
                step *= 2;
            }
        }
    }
    let Some((mut good_j, mut good_span)) = good else {
        let mut z = BeamformerSolution::zero(k, n);
        z.iterations = total_iterations;
        return Ok(z);
    };
    if let Some(mut bad_j) = bad {
        while good_j - bad_j > 1 {
            let mid = bad_j + (good_j - bad_j) / 2;
            match attempt(mid, &warm, &mut total_iterations) {
                Some(span) => {
                    warm = span.uplink.clone();
                    good_j = mid;
                    good_span = span;
                }
                None => bad_j = mid,
            }
        }
    }

    let sol = assemble(&good_span, &normalized, &r);
    // Beams were built on h / sigma; SINR uses the physical channels.
    let per_user_sinr = compute_sinr(&sol.beamformers, channels, noise)?;
    Ok(BeamformerSolution {
        achieved_gamma: grid(good_j),
        per_user_sinr,
        converged: sol.converged,
        iterations: total_iterations,
        powers: sol.powers,
        beamformers: sol.beamformers,
    })
}

#[derive(Debug, Clone)]
pub struct SumPowerSolution {
    pub gamma: f64,
    pub beamformers: Vec<CVector>,
    pub iterations: usize,
}

/// Balanced uplink SINR for fixed unit-norm receive beams and total power
/// `total`: solves `q = gamma D (Psi q + 1)`, `sum q = total` for gamma.
fn balanced_gamma(cross: &[Vec<f64>], total: f64) -> Option<(f64, Vec<f64>)> {
    let k = cross.len();
    let powers_at = |gamma: f64| -> Option<Vec<f64>> {
        let a = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                1.0
            } else {
                -gamma * cross[i][j] / cross[i][i]
            }
        });
        let rhs = nalgebra::DVector::from_fn(k, |i, _| gamma / cross[i][i]);
        let q = a.lu().solve(&rhs)?;
        q.iter()
            .all(|v| *v >= 0.0 && v.is_finite())
            .then(|| q.iter().copied().collect())
    };
    let excess = |gamma: f64| powers_at(gamma).map(|q| q.iter().sum::<f64>() - total);

    let mut lo = 0.0;
    let mut hi = total * cross.iter().enumerate().map(|(i, c)| c[i]).fold(0.0, f64::max);
    // Interference-free bound is an upper bound; shrink until valid.
    while excess(hi).is_none() {
        hi *= 0.5;
        if hi < 1e-300 {
            return None;
        }
    }
    if excess(hi)? < 0.0 {
        // Can only happen through rounding at K = 1.
        return powers_at(hi).map(|q| (hi, q));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match excess(mid) {
            Some(e) if e < 0.0 => lo = mid,
            _ => hi = mid,
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let gamma = 0.5 * (lo + hi);
    powers_at(gamma).map(|q| (gamma, q))
}

/// Max-min SINR under a single total-power budget, computed through the
/// dual uplink: alternate MMSE receive beams with the balanced power
/// split for those beams until the common SINR stops moving. The
/// downlink beams returned reach that SINR with total power `total`.
pub fn solve_maxmin_sum_power(channels: &[CVector], noise: &[f64], total: f64) -> Result<SumPowerSolution> {
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::InvalidScenario(format!("power budget must be positive, got {total}")));
    }
    let normalized = normalize_channels(channels, noise)?;
    let r = gram(&normalized);
    let k = channels.len();

    let unit = |b: SpanBeam| {
        let nrm = b.norm_sqr(&r).sqrt();
        b.scaled(1.0 / nrm)
    };
    let mut beams: Vec<SpanBeam> = (0..k)
        .map(|i| {
            let mut c = vec![ZERO; k];
            c[i] = Complex64::new(1.0, 0.0);
            unit(SpanBeam { coeffs: c })
        })
        .collect();
    let mut gamma = 0.0;
    let mut iterations = 0;
    for _ in 0..10_000 {
        iterations += 1;
        let (cross, _) = cross_gains(&beams, &r);
        let (g, q) = balanced_gamma(&cross, total)
            .ok_or_else(|| Error::NonFinite("power balancing failed".into()))?;
        let done = (g - gamma).abs() <= 1e-14 * g;
        gamma = g;
        beams = (0..k).map(|i| unit(lmmse_span(i, &r, &q))).collect();
        if done {
            break;
        }
    }

    // Downlink powers for the final beams at the same budget.
    let (cross, _) = cross_gains(&beams, &r);
    let dl_cross: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| cross[j][i]).collect()).collect();
    let (gamma, p) = balanced_gamma(&dl_cross, total)
        .ok_or_else(|| Error::NonFinite("downlink power balancing failed".into()))?;
    let beamformers = beams
        .iter()
        .zip(&p)
        .map(|(b, pk)| b.scaled(pk.sqrt()).materialize(&normalized))
        .collect();
    Ok(SumPowerSolution {
        gamma,
        beamformers,
        iterations,
    })
}
