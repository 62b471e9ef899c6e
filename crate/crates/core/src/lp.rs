//! Dense two-phase primal simplex.
//!
//! Bland's rule (lowest-index entering column, lowest-index leaving basic
//! variable on ratio ties) guarantees termination on degenerate problems.
//! Problem sizes here are tiny, so a full tableau is fine.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-10;
const COST_EPS: f64 = 1e-10;
const MAX_PIVOTS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

/// `opt c^T x` subject to `A_eq x = b_eq`, `A_ub x <= b_ub`, `x >= lower`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
    pub a_ub: Vec<Vec<f64>>,
    pub b_ub: Vec<f64>,
    pub lower: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            sense,
            objective,
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            a_ub: Vec::new(),
            b_ub: Vec::new(),
            lower: vec![0.0; n],
        }
    }

    pub fn minimize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Minimize, objective)
    }

    pub fn maximize(objective: Vec<f64>) -> Self {
        Self::new(Sense::Maximize, objective)
    }

    /// Adds `row . x <= rhs`.
    pub fn le(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_ub.push(row);
        self.b_ub.push(rhs);
        self
    }

    /// Adds `row . x = rhs`.
    pub fn eq(mut self, row: Vec<f64>, rhs: f64) -> Self {
        self.a_eq.push(row);
        self.b_eq.push(rhs);
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if self.lower.len() != n {
            return Err(Error::Dimension(format!("{} lower bounds for {n} variables", self.lower.len())));
        }
        if self.a_eq.len() != self.b_eq.len() || self.a_ub.len() != self.b_ub.len() {
            return Err(Error::Dimension("constraint rows and right-hand sides differ in count".into()));
        }
        for row in self.a_eq.iter().chain(&self.a_ub) {
            if row.len() != n {
                return Err(Error::Dimension(format!("constraint row of length {} for {n} variables", row.len())));
            }
            if !finite(row) {
                return Err(Error::NonFinite("constraint coefficient".into()));
            }
        }
        if !(finite(&self.objective) && finite(&self.b_eq) && finite(&self.b_ub) && finite(&self.lower)) {
            return Err(Error::NonFinite("objective, bound or right-hand side".into()));
        }
        Ok(())
    }

    /// Largest violation of any constraint at `x` (zero when feasible).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let dot = |r: &[f64]| r.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let eq = self.a_eq.iter().zip(&self.b_eq).map(|(r, b)| (dot(r) - b).abs());
        let ub = self.a_ub.iter().zip(&self.b_ub).map(|(r, b)| (dot(r) - b).max(0.0));
        let lb = self.lower.iter().zip(x).map(|(l, v)| (l - v).max(0.0));
        eq.chain(ub).chain(lb).fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    /// Reduced costs for the real objective; last entry is minus its value.
    cost: Vec<f64>,
    /// Reduced costs for the sum of artificials.
    aux: Vec<f64>,
    basis: Vec<usize>,
    width: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.width]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<f64>| {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.cost);
        eliminate(&mut self.aux);
        self.basis[r] = c;
    }

    /// Runs Bland-rule simplex on `cost` (phase 2) or `aux` (phase 1)
    /// over columns `< allowed`. Returns false if unbounded.
    fn optimize(&mut self, phase_one: bool, allowed: usize, pivots: &mut usize) -> Result<bool> {
        loop {
            let costs = if phase_one { &self.aux } else { &self.cost };
            let Some(enter) = (0..allowed).find(|&j| costs[j] < -COST_EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 * lr.abs().max(1.0)
                                || ((ratio - lr).abs() <= 1e-12 * lr.abs().max(1.0) && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter);
            *pivots += 1;
            if *pivots > MAX_PIVOTS {
                return Err(Error::Lp("pivot limit exceeded".into()));
            }
        }
    }
}

/// Recomputes the basic variables from the original rows, undoing the
/// roundoff accumulated over many pivots. Nonbasic variables stay at zero.
fn refine_basic_solution(std_rows: &[(Vec<f64>, f64)], basis: &[usize], n_std: usize, x_std: &mut [f64]) {
    let cols: Vec<usize> = basis.iter().copied().filter(|&b| b < n_std).collect();
    if cols.is_empty() {
        return;
    }
    let a = DMatrix::from_fn(std_rows.len(), cols.len(), |i, j| std_rows[i].0[cols[j]]);
    let b = DVector::from_iterator(std_rows.len(), std_rows.iter().map(|(_, b)| *b));
    let Ok(sol) = a.svd(true, true).solve(&b, 1e-12) else {
        return;
    };
    if sol.iter().all(|v| v.is_finite()) {
        for (&c, v) in cols.iter().zip(sol.iter()) {
            x_std[c] = v.max(0.0);
        }
    }
}

/// Solves `lp` with the two-phase simplex method.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;
    let n = lp.num_vars();
    let n_ub = lp.a_ub.len();
    let n_eq = lp.a_eq.len();
    let m = n_ub + n_eq;

    // Shift x = lower + x', x' >= 0.
    let shift = |row: &[f64], b: f64| b - row.iter().zip(&lp.lower).map(|(a, l)| a * l).sum::<f64>();

    // Rows in standard form over [x' | slacks]; mark which need an artificial.
    let n_std = n + n_ub;
    let mut std_rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(m);
    for (i, (row, b)) in lp.a_ub.iter().zip(&lp.b_ub).enumerate() {
        let mut r = row.clone();
        r.resize(n_std, 0.0);
        r[n + i] = 1.0;
        std_rows.push((r, shift(row, *b)));
    }
    for (row, b) in lp.a_eq.iter().zip(&lp.b_eq) {
        let mut r = row.clone();
        r.resize(n_std, 0.0);
        std_rows.push((r, shift(row, *b)));
    }

    let mut needs_art = vec![false; m];
    for (i, (r, b)) in std_rows.iter_mut().enumerate() {
        if *b < 0.0 {
            r.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
        }
        needs_art[i] = i >= n_ub || r[n + i] < 0.0;
    }
    let n_art = needs_art.iter().filter(|x| **x).count();
    let width = n_std + n_art;

    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let mut art_col = n_std;
    for (i, (r, b)) in std_rows.iter().enumerate() {
        let mut row = r.clone();
        row.resize(width + 1, 0.0);
        row[width] = *b;
        if needs_art[i] {
            row[art_col] = 1.0;
            basis.push(art_col);
            art_col += 1;
        } else {
            basis.push(n + i);
        }
        rows.push(row);
    }

    let sign = match lp.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let mut cost = vec![0.0; width + 1];
    for (j, c) in lp.objective.iter().enumerate() {
        cost[j] = sign * c;
    }
    let mut aux = vec![0.0; width + 1];
    for j in n_std..width {
        aux[j] = 1.0;
    }
    let mut t = Tableau {
        rows,
        cost,
        aux,
        basis,
        width,
    };
    // Price out the starting basis.
    for i in 0..m {
        let b = t.basis[i];
        let (fc, fa) = (t.cost[b], t.aux[b]);
        let row = &t.rows[i];
        for j in 0..=width {
            t.cost[j] -= fc * row[j];
            t.aux[j] -= fa * row[j];
        }
    }

    let mut pivots = 0;
    if n_art > 0 {
        t.optimize(true, width, &mut pivots)?;
        let infeasibility = -t.aux[width];
        let scale = 1.0 + std_rows.iter().map(|(_, b)| b.abs()).fold(0.0, f64::max);
        if infeasibility > 1e-9 * scale {
            return Ok(LpOutcome::Infeasible);
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= n_std {
                match (0..n_std).find(|&j| t.rows[i][j].abs() > 1e-9) {
                    Some(j) => t.pivot(i, j),
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                        continue;
                    }
                }
            }
            i += 1;
        }
    }

    if !t.optimize(false, n_std, &mut pivots)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x_std = vec![0.0; n_std];
    for (i, &b) in t.basis.iter().enumerate() {
        if b < n_std {
            x_std[b] = t.rhs(i).max(0.0);
        }
    }
    refine_basic_solution(&std_rows, &t.basis, n_std, &mut x_std);
    let x: Vec<f64> = x_std[..n].iter().zip(&lp.lower).map(|(v, l)| v + l).collect();
    let scale = 1.0
        + lp.b_ub
            .iter()
            .chain(&lp.b_eq)
            .map(|b| b.abs())
            .fold(0.0, f64::max);
    let viol = lp.violation(&x);
    if viol > 1e-7 * scale {
        return Err(Error::Lp(format!("returned point violates constraints by {viol:e}")));
    }
    let value = lp.objective_value(&x);
    Ok(LpOutcome::Optimal { x, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(out: LpOutcome) -> (Vec<f64>, f64) {
        match out {
            LpOutcome::Optimal { x, value } => (x, value),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn maximize_single_variable() {
        let lp = LinearProgram::maximize(vec![1.0]).le(vec![1.0], 1.0);
        let (x, v) = optimal(solve_lp(&lp).unwrap());
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_two_variable() {
        // max 3x + 5y, x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let lp = LinearProgram::maximize(vec![3.0, 5.0])
            .le(vec![1.0, 0.0], 4.0)
            .le(vec![0.0, 2.0], 12.0)
            .le(vec![3.0, 2.0], 18.0);
        let (x, v) = optimal(solve_lp(&lp).unwrap());
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
        assert!((v - 36.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_negative_rhs() {
        // min x + y, x + y = 2, x - y <= -1 -> any with x + y = 2, x <= 0.5
        let lp = LinearProgram::minimize(vec![1.0, 1.0])
            .eq(vec![1.0, 1.0], 2.0)
            .le(vec![1.0, -1.0], -1.0);
        let (x, v) = optimal(solve_lp(&lp).unwrap());
        assert!((v - 2.0).abs() < 1e-12);
        assert!(lp.violation(&x) < 1e-12);
    }

    #[test]
    fn lower_bounds_shift() {
        let mut lp = LinearProgram::minimize(vec![1.0, 2.0]).le(vec![1.0, 1.0], 10.0);
        lp.lower = vec![-3.0, 1.5];
        let (x, v) = optimal(solve_lp(&lp).unwrap());
        assert_eq!(x, vec![-3.0, 1.5]);
        assert!((v - 0.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        let lp = LinearProgram::minimize(vec![1.0]).le(vec![1.0], -1.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
        let lp = LinearProgram::minimize(vec![1.0, 1.0])
            .eq(vec![1.0, 1.0], 1.0)
            .eq(vec![1.0, 1.0], 2.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let lp = LinearProgram::maximize(vec![1.0, 0.0]).le(vec![-1.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);
    }

    #[test]
    fn redundant_equalities() {
        let lp = LinearProgram::maximize(vec![1.0, 2.0])
            .eq(vec![1.0, 1.0], 1.0)
            .eq(vec![2.0, 2.0], 2.0)
            .le(vec![0.0, 1.0], 0.75);
        let (x, v) = optimal(solve_lp(&lp).unwrap());
        assert!((v - 1.75).abs() < 1e-12);
        assert!((x[1] - 0.75).abs() < 1e-12);
    }

    /// Beale's instance cycles forever under the textbook largest-coefficient rule.
    #[test]
    fn beale_cycling_instance_terminates() {
        let lp = LinearProgram::minimize(vec![-0.75, 150.0, -0.02, 6.0])
            .le(vec![0.25, -60.0, -0.04, 9.0], 0.0)
            .le(vec![0.5, -90.0, -0.02, 3.0], 0.0)
            .le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let (x, v) = optimal(solve_lp(&lp).unwrap());
        assert!((v + 0.05).abs() < 1e-12);
        assert!((x[0] - 0.04).abs() < 1e-12 && (x[2] - 1.0).abs() < 1e-12);
        assert!(lp.violation(&x) < 1e-12);
    }

    #[test]
    fn rejects_nan() {
        let lp = LinearProgram::minimize(vec![f64::NAN]);
        assert!(solve_lp(&lp).is_err());
        let lp = LinearProgram::minimize(vec![1.0]).le(vec![1.0, 2.0], 1.0);
        assert!(matches!(solve_lp(&lp), Err(Error::Dimension(_))));
    }

    #[test]
    fn deterministic() {
        let lp = LinearProgram::maximize(vec![1.0, 1.0, 1.0])
            .le(vec![1.0, 1.0, 0.0], 1.0)
            .le(vec![0.0, 1.0, 1.0], 1.0);
        assert_eq!(solve_lp(&lp).unwrap(), solve_lp(&lp).unwrap());
    }
}
