//! Independent oracles shared by the integration tests and the acceptance run.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use picocell::channel::CVector;
use picocell::lp::LinearProgram;
use picocell::mac::SpectralEfficiencyMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rand_chacha::ChaCha8Rng;

pub fn gaussian_channels(rng: &mut ChaCha8Rng, k: usize, n: usize) -> Vec<CVector> {
    (0..k)
        .map(|_| CVector::from_fn(n, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)))
        .collect()
}

/// Bounded random LP: `n` variables in a box, `m` random `<=` rows and an
/// optional equality. Some instances are infeasible.
pub fn random_lp(rng: &mut ChaCha8Rng, n: usize, m: usize, with_eq: bool) -> LinearProgram {
    let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.random::<f64>();
    let objective: Vec<f64> = (0..n).map(|_| u(-1.0, 1.0)).collect();
    let mut lp = if u(0.0, 1.0) < 0.5 {
        LinearProgram::minimize(objective)
    } else {
        LinearProgram::maximize(objective)
    };
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        lp = lp.le(row, u(0.5, 3.0));
    }
    for _ in 0..m {
        let row: Vec<f64> = (0..n).map(|_| u(-1.0, 1.0)).collect();
        lp = lp.le(row, u(-0.5, 1.5));
    }
    if with_eq {
        let row: Vec<f64> = (0..n).map(|_| u(0.0, 1.0)).collect();
        lp = lp.eq(row, u(0.0, 1.5));
    }
    lp
}

fn for_each_subset(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Optimal value by enumerating every vertex of a bounded LP with
/// `x >= lower`. `None` when no vertex is feasible.
pub fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
    let n = lp.num_vars();
    // All constraints as rows a.x (<= or =) b; lower bounds as -x_i <= -l_i.
    let mut rows: Vec<(Vec<f64>, f64)> = lp.a_ub.iter().cloned().zip(lp.b_ub.iter().cloned()).collect();
    for i in 0..n {
        let mut r = vec![0.0; n];
        r[i] = -1.0;
        rows.push((r, -lp.lower[i]));
    }
    let eqs: Vec<(Vec<f64>, f64)> = lp.a_eq.iter().cloned().zip(lp.b_eq.iter().cloned()).collect();
    let free = n.checked_sub(eqs.len())?;
    let maximize = matches!(lp.sense, picocell::lp::Sense::Maximize);
    let mut best: Option<f64> = None;
    for_each_subset(rows.len(), free, &mut |active| {
        let system: Vec<&(Vec<f64>, f64)> = eqs.iter().chain(active.iter().map(|&i| &rows[i])).collect();
        let a = DMatrix::from_fn(n, n, |i, j| system[i].0[j]);
        let b = DVector::from_fn(n, |i, _| system[i].1);
        let lu = a.lu();
        if lu.determinant().abs() < 1e-12 {
            return;
        }
        let Some(x) = lu.solve(&b) else { return };
        let x: Vec<f64> = x.iter().copied().collect();
        if lp.violation(&x) > 1e-9 {
            return;
        }
        let v = lp.objective_value(&x);
        best = Some(match best {
            None => v,
            Some(b) if maximize => b.max(v),
            Some(b) => b.min(v),
        });
    });
    best
}

fn min_rate(s: &SpectralEfficiencyMatrix, x: &[f64]) -> f64 {
    s.rates(x).into_iter().fold(f64::INFINITY, f64::min)
}

/// Calls `f` on every composition of `m` into `parts` non-negative parts.
fn for_each_composition(m: usize, parts: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(left: usize, idx: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if idx + 1 == cur.len() {
            cur[idx] = left;
            f(cur);
            return;
        }
        for v in 0..=left {
            cur[idx] = v;
            rec(left - v, idx + 1, cur, f);
        }
    }
    rec(m, 0, &mut vec![0; parts], f);
}

pub fn composition_count(m: usize, parts: usize) -> usize {
    // C(m + parts - 1, parts - 1)
    let (top, k) = (m + parts - 1, parts - 1);
    (0..k).fold(1usize, |acc, i| acc * (top - i) / (i + 1))
}

/// Best max-min rate over the primal simplex grid with spacing `1/m`.
/// Every grid point is a valid time split, so this is a lower bound.
/// Returns `(value, grid points evaluated)`.
pub fn maxmin_primal_grid(s: &SpectralEfficiencyMatrix, m: usize) -> (f64, usize) {
    let c = s.num_configs();
    let mut best = f64::NEG_INFINITY;
    let mut evaluated = 0;
    let mut x = vec![0.0; c];
    for_each_composition(m, c, &mut |comp| {
        for (xi, &k) in x.iter_mut().zip(comp) {
            *xi = k as f64 / m as f64;
        }
        evaluated += 1;
        best = best.max(min_rate(s, &x));
    });
    (best, evaluated)
}

/// `max_c sum_q S[c][q] mu_q`.
fn best_response(s: &SpectralEfficiencyMatrix, mu: &[f64]) -> f64 {
    s.rows
        .iter()
        .map(|r| r.iter().zip(mu).map(|(a, b)| a * b).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Max-min rate through the minimax dual
/// `min over user weights mu of max_c (S mu)_c`, searched on the simplex
/// grid with spacing `1/m` and then on full local lattices around the
/// incumbent, halving the radius whenever a lattice brings no improvement. Every evaluated point is an upper bound.
/// Returns `(value, grid points evaluated)`.
pub fn maxmin_dual_grid(s: &SpectralEfficiencyMatrix, m: usize) -> (f64, usize) {
    let q = s.num_users();
    let mut best_mu = vec![0.0; q];
    let mut best = f64::INFINITY;
    let mut evaluated = 0;
    let mut mu = vec![0.0; q];
    for_each_composition(m, q, &mut |comp| {
        for (v, &k) in mu.iter_mut().zip(comp) {
            *v = k as f64 / m as f64;
        }
        evaluated += 1;
        let v = best_response(s, &mu);
        if v < best {
            best = v;
            best_mu.copy_from_slice(&mu);
        }
    });
    if q == 1 {
        return (best, evaluated);
    }

    // Local lattice points per axis: keep each level near 10^5 points.
    let n = ((1e5f64).powf(1.0 / (q - 1) as f64) / 2.0).floor().max(1.0) as i64;
    let mut r = 4.0 / m as f64;
    while r > 1e-13 {
        let anchor = best_mu.clone();
        let before = best;
        let mut steps = vec![-n; q - 1];
        loop {
            mu.copy_from_slice(&anchor);
            for (i, &k) in steps.iter().enumerate() {
                let d = r * k as f64 / n as f64;
                mu[i] += d;
                mu[q - 1] -= d;
            }
            if mu.iter().all(|v| *v >= 0.0) {
                let v = best_response(s, &mu);
                if v < best {
                    best = v;
                    best_mu.copy_from_slice(&mu);
                }
            }
            let Some(pos) = steps.iter().position(|k| *k < n) else { break };
            steps[pos] += 1;
            steps[..pos].iter_mut().for_each(|k| *k = -n);
        }
        if best >= before {
            r *= 0.5;
        }
    }
    (best, evaluated)
}

/// Minimum total power reaching SINR `gamma` at every user when the beam
/// directions are fixed to the unit vectors `u`; `None` if unreachable.
pub fn fixed_direction_power(u: &[CVector], h: &[CVector], noise: &[f64], gamma: f64) -> Option<f64> {
    let k = h.len();
    let g = |i: usize, j: usize| u[i].dotc(&h[j]).norm_sqr();
    // p_k g_kk - gamma sum_{i != k} p_i g_ik = gamma sigma_k
    let a = DMatrix::from_fn(k, k, |row, col| if row == col { g(row, row) } else { -gamma * g(col, row) });
    let b = DVector::from_fn(k, |row, _| gamma * noise[row]);
    let p = a.lu().solve(&b)?;
    p.iter().all(|v| *v > 0.0 && v.is_finite()).then(|| p.iter().sum())
}

pub fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    let v = CVector::from_fn(n, |_, _| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)));
    let nrm = v.norm();
    v / Complex64::new(nrm, 0.0)
}
