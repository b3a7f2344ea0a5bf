//! Linear programs and a dense bounded-variable revised simplex.
//!
//! Problems have the form
//!
//! ```text
//! min  c'x
//! s.t. A_eq x  = b_eq
//!      A_le x <= b_le
//!      l <= x <= u        (entries of l, u may be infinite)
//! ```
//!
//! The solver keeps an explicit basis inverse, updated with product-form pivots and
//! refactorized periodically. Variables with infinite bounds stay in the problem as
//! free columns; nothing is split. Pricing is Dantzig's rule until the number of
//! degenerate pivots exceeds `3 * (vars + rows)`, then Bland's rule for the rest of
//! the phase, which rules out cycling.

use crate::error::SolverError;

/// Primal feasibility tolerance (problem units, per-unit for OPF models).
pub const FEASIBILITY_TOL: f64 = 1e-7;
const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 64;

/// Sparse constraint row: `(variable index, coefficient)` pairs.
pub type Row = Vec<(usize, f64)>;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    names: Vec<String>,
    eq_rows: Vec<Row>,
    eq_rhs: Vec<f64>,
    le_rows: Vec<Row>,
    le_rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_eq(&mut self, row: Row, rhs: f64) {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
    }

    pub fn add_le(&mut self, row: Row, rhs: f64) {
        self.le_rows.push(row);
        self.le_rhs.push(rhs);
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
    pub fn num_eq(&self) -> usize {
        self.eq_rows.len()
    }
    pub fn num_le(&self) -> usize {
        self.le_rows.len()
    }
    pub fn objective(&self) -> &[f64] {
        &self.objective
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }
    pub fn name(&self, var: usize) -> &str {
        &self.names[var]
    }
    pub fn eq_rows(&self) -> impl Iterator<Item = (&Row, f64)> {
        self.eq_rows.iter().zip(self.eq_rhs.iter().copied())
    }
    pub fn le_rows(&self) -> impl Iterator<Item = (&Row, f64)> {
        self.le_rows.iter().zip(self.le_rhs.iter().copied())
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        for j in 0..n {
            if !self.objective[j].is_finite() {
                return Err(SolverError::Malformed(format!(
                    "non-finite cost on `{}`",
                    self.names[j]
                )));
            }
            if self.lower[j].is_nan() || self.upper[j].is_nan() || self.lower[j] > self.upper[j] {
                return Err(SolverError::Malformed(format!("bad bounds on `{}`", self.names[j])));
            }
            if self.lower[j] == f64::INFINITY || self.upper[j] == f64::NEG_INFINITY {
                return Err(SolverError::Malformed(format!("empty bounds on `{}`", self.names[j])));
            }
        }
        let rows = self
            .eq_rows
            .iter()
            .zip(&self.eq_rhs)
            .chain(self.le_rows.iter().zip(&self.le_rhs));
        for (row, rhs) in rows {
            if !rhs.is_finite() {
                return Err(SolverError::Malformed("non-finite right-hand side".into()));
            }
            for &(j, a) in row {
                if j >= n || !a.is_finite() {
                    return Err(SolverError::Malformed(format!("bad coefficient ({j}, {a})")));
                }
            }
        }
        Ok(())
    }

    /// Sum of bound and constraint violations at `x`, each measured in problem units.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &Row| row.iter().map(|&(j, a)| a * x[j]).sum::<f64>();
        let mut worst: f64 = 0.0;
        for j in 0..self.num_vars() {
            worst = worst.max(self.lower[j] - x[j]).max(x[j] - self.upper[j]);
        }
        for (row, rhs) in self.eq_rows() {
            worst = worst.max((dot(row) - rhs).abs());
        }
        for (row, rhs) in self.le_rows() {
            worst = worst.max(dot(row) - rhs);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Values of the structural variables. Meaningful only when optimal.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum NonBasic {
    AtLower,
    AtUpper,
    /// Free column parked at zero.
    Free,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Basic(usize),
    NonBasic(NonBasic),
}

/// Outcome of one simplex phase.
enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex {
    rows: usize,
    // dense columns of [A | slacks | artificials]
    cols: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basis: Vec<usize>,
    binv: Vec<Vec<f64>>,
    iterations: usize,
    max_iterations: usize,
    since_refactor: usize,
}

impl Simplex {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let m_eq = lp.num_eq();
        let m_le = lp.num_le();
        let m = m_eq + m_le;

        let mut cols: Vec<Vec<f64>> = vec![vec![0.0; m]; n];
        let mut rhs = Vec::with_capacity(m);
        for (i, (row, b)) in lp.eq_rows().chain(lp.le_rows()).enumerate() {
            for &(j, a) in row {
                cols[j][i] += a;
            }
            rhs.push(b);
        }
        let mut cost = lp.objective.clone();
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();

        let mut x = Vec::with_capacity(n + m_le + m);
        let mut state = Vec::with_capacity(n + m_le + m);
        for j in 0..n {
            let (lo, hi) = (lower[j], upper[j]);
            let (v, st) = if lo == hi {
                (lo, NonBasic::Fixed)
            } else if lo.is_finite() {
                (lo, NonBasic::AtLower)
            } else if hi.is_finite() {
                (hi, NonBasic::AtUpper)
            } else {
                (0.0, NonBasic::Free)
            };
            x.push(v);
            state.push(State::NonBasic(st));
        }

        // residual of each row at the starting nonbasic point
        let mut residual = rhs.clone();
        for j in 0..n {
            if x[j] != 0.0 {
                for (i, r) in residual.iter_mut().enumerate() {
                    *r -= cols[j][i] * x[j];
                }
            }
        }

        let mut basis = vec![usize::MAX; m];
        for r in 0..m_le {
            let i = m_eq + r;
            let mut col = vec![0.0; m];
            col[i] = 1.0;
            cols.push(col);
            cost.push(0.0);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            let j = cols.len() - 1;
            if residual[i] >= 0.0 {
                x.push(residual[i]);
                state.push(State::Basic(i));
                basis[i] = j;
            } else {
                x.push(0.0);
                state.push(State::NonBasic(NonBasic::AtLower));
            }
        }
        for i in 0..m {
            if basis[i] != usize::MAX {
                continue;
            }
            let mut col = vec![0.0; m];
            col[i] = if residual[i] >= 0.0 { 1.0 } else { -1.0 };
            cols.push(col);
            // phase-1 costs are installed separately
            cost.push(0.0);
            lower.push(0.0);
            upper.push(f64::INFINITY);
            x.push(residual[i].abs());
            let j = cols.len() - 1;
            state.push(State::Basic(i));
            basis[i] = j;
        }

        let total = cols.len();
        let mut binv = vec![vec![0.0; m]; m];
        for i in 0..m {
            // every starting basic column is +-e_i
            binv[i][i] = cols[basis[i]][i];
        }

        Self {
            rows: m,
            cols,
            rhs,
            cost,
            lower,
            upper,
            x,
            state,
            basis,
            binv,
            iterations: 0,
            max_iterations: 100 * (total + m) + 1000,
            since_refactor: 0,
        }
    }

    fn dot_col(&self, y: &[f64], j: usize) -> f64 {
        self.cols[j].iter().zip(y).map(|(a, b)| a * b).sum()
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let col = &self.cols[j];
        self.binv
            .iter()
            .map(|row| row.iter().zip(col).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn duals(&self, cost: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        for (i, &bj) in self.basis.iter().enumerate() {
            let cb = cost[bj];
            if cb != 0.0 {
                for (yk, b) in y.iter_mut().zip(&self.binv[i]) {
                    *yk += cb * b;
                }
            }
        }
        y
    }

    /// Rebuilds the basis inverse by Gauss-Jordan elimination and recomputes basic values.
    fn refactor(&mut self) -> Result<(), SolverError> {
        let m = self.rows;
        let mut a: Vec<Vec<f64>> = (0..m)
            .map(|i| self.basis.iter().map(|&j| self.cols[j][i]).collect())
            .collect();
        let mut inv: Vec<Vec<f64>> = (0..m)
            .map(|i| {
                let mut r = vec![0.0; m];
                r[i] = 1.0;
                r
            })
            .collect();
        for c in 0..m {
            let p = (c..m)
                .max_by(|&r1, &r2| a[r1][c].abs().total_cmp(&a[r2][c].abs()))
                .expect("non-empty range");
            if a[p][c].abs() < 1e-12 {
                return Err(SolverError::SingularBasis);
            }
            a.swap(c, p);
            inv.swap(c, p);
            let piv = a[c][c];
            for v in a[c].iter_mut() {
                *v /= piv;
            }
            for v in inv[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..m {
                if r != c {
                    let f = a[r][c];
                    if f != 0.0 {
                        for k in 0..m {
                            a[r][k] -= f * a[c][k];
                            inv[r][k] -= f * inv[c][k];
                        }
                    }
                }
            }
        }
        self.binv = inv;
        self.since_refactor = 0;
        self.recompute_basic();
        Ok(())
    }

    fn recompute_basic(&mut self) {
        let mut r = self.rhs.clone();
        for (j, st) in self.state.iter().enumerate() {
            if matches!(st, State::NonBasic(_)) && self.x[j] != 0.0 {
                for (ri, a) in r.iter_mut().zip(&self.cols[j]) {
                    *ri -= a * self.x[j];
                }
            }
        }
        for i in 0..self.rows {
            let v: f64 = self.binv[i].iter().zip(&r).map(|(a, b)| a * b).sum();
            self.x[self.basis[i]] = v;
        }
    }

    fn pivot_binv(&mut self, r: usize, alpha: &[f64]) {
        let piv = alpha[r];
        let pivot_row: Vec<f64> = self.binv[r].iter().map(|v| v / piv).collect();
        for (i, row) in self.binv.iter_mut().enumerate() {
            if i == r {
                row.copy_from_slice(&pivot_row);
            } else if alpha[i] != 0.0 {
                let f = alpha[i];
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }

    fn run_phase(&mut self, cost: &[f64]) -> Result<PhaseEnd, SolverError> {
        let bland_after = 3 * (self.cols.len() + self.rows);
        let mut degenerate = 0usize;
        loop {
            if self.iterations >= self.max_iterations {
                return Err(SolverError::IterationLimit(self.max_iterations));
            }
            let bland = degenerate > bland_after;
            let y = self.duals(cost);

            let mut entering: Option<(usize, f64)> = None;
            for j in 0..self.cols.len() {
                let State::NonBasic(nb) = self.state[j] else { continue };
                if nb == NonBasic::Fixed {
                    continue;
                }
                let d = cost[j] - self.dot_col(&y, j);
                let eligible = match nb {
                    NonBasic::AtLower => d < -OPTIMALITY_TOL,
                    NonBasic::AtUpper => d > OPTIMALITY_TOL,
                    NonBasic::Free => d.abs() > OPTIMALITY_TOL,
                    NonBasic::Fixed => false,
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = Some((j, d));
                    break;
                }
                if entering.is_none_or(|(_, best)| d.abs() > best.abs()) {
                    entering = Some((j, d));
                }
            }
            let Some((q, dq)) = entering else {
                return Ok(PhaseEnd::Optimal);
            };

            let alpha = self.ftran(q);
            let dir = if dq < 0.0 { 1.0 } else { -1.0 };

            // bound flip distance of the entering column itself
            let mut step = self.upper[q] - self.lower[q];
            let mut leaving: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let delta = -dir * alpha[i];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                let bj = self.basis[i];
                let ratio = if delta < 0.0 {
                    if !self.lower[bj].is_finite() {
                        continue;
                    }
                    ((self.x[bj] - self.lower[bj]) / -delta).max(0.0)
                } else {
                    if !self.upper[bj].is_finite() {
                        continue;
                    }
                    ((self.upper[bj] - self.x[bj]) / delta).max(0.0)
                };
                let better = match leaving {
                    None => ratio < step,
                    Some((r, _)) => {
                        if ratio < step - 1e-12 {
                            true
                        } else if ratio <= step + 1e-12 {
                            if bland {
                                bj < self.basis[r]
                            } else {
                                alpha[i].abs() > alpha[r].abs()
                            }
                        } else {
                            false
                        }
                    }
                };
                if better {
                    step = ratio;
                    leaving = Some((i, delta));
                }
            }

            if !step.is_finite() {
                return Ok(PhaseEnd::Unbounded);
            }
            self.iterations += 1;
            if step <= 1e-12 {
                degenerate += 1;
            }

            if step != 0.0 {
                self.x[q] += dir * step;
                for i in 0..self.rows {
                    let bj = self.basis[i];
                    self.x[bj] -= dir * step * alpha[i];
                }
            }

            match leaving {
                None => {
                    // bound flip, basis unchanged
                    let nb = if dir > 0.0 {
                        NonBasic::AtUpper
                    } else {
                        NonBasic::AtLower
                    };
                    self.x[q] = if dir > 0.0 { self.upper[q] } else { self.lower[q] };
                    self.state[q] = State::NonBasic(nb);
                }
                Some((r, delta)) => {
                    let out = self.basis[r];
                    let (val, nb) = if delta < 0.0 {
                        (self.lower[out], NonBasic::AtLower)
                    } else {
                        (self.upper[out], NonBasic::AtUpper)
                    };
                    let nb = if self.lower[out] == self.upper[out] {
                        NonBasic::Fixed
                    } else {
                        nb
                    };
                    self.x[out] = val;
                    self.state[out] = State::NonBasic(nb);
                    self.state[q] = State::Basic(r);
                    self.basis[r] = q;
                    if alpha[r].abs() < 1e-11 {
                        self.refactor()?;
                    } else {
                        self.pivot_binv(r, &alpha);
                        self.since_refactor += 1;
                        if self.since_refactor >= REFACTOR_EVERY {
                            self.refactor()?;
                        }
                    }
                }
            }
        }
    }
}

/// Solves `lp` to optimality, or reports infeasibility or unboundedness.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution, SolverError> {
    lp.validate()?;
    let n = lp.num_vars();
    let mut s = Simplex::build(lp);
    let first_artificial = n + lp.num_le();

    let artificials: Vec<usize> = (first_artificial..s.cols.len()).collect();
    if !artificials.is_empty() {
        let mut phase1 = vec![0.0; s.cols.len()];
        for &j in &artificials {
            phase1[j] = 1.0;
        }
        s.run_phase(&phase1)?;
        s.refactor()?;
        let infeasibility: f64 = artificials.iter().map(|&j| s.x[j].max(0.0)).sum();
        if infeasibility > FEASIBILITY_TOL {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                values: s.x[..n].to_vec(),
                objective: f64::NAN,
                iterations: s.iterations,
            });
        }
        for &j in &artificials {
            s.upper[j] = 0.0;
            if let State::NonBasic(_) = s.state[j] {
                s.state[j] = State::NonBasic(NonBasic::Fixed);
                s.x[j] = 0.0;
            }
        }
    }

    let cost = s.cost.clone();
    let end = s.run_phase(&cost)?;
    if let PhaseEnd::Unbounded = end {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            values: s.x[..n].to_vec(),
            objective: f64::NEG_INFINITY,
            iterations: s.iterations,
        });
    }
    s.refactor()?;
    let values: Vec<f64> = s.x[..n].to_vec();
    let objective = values.iter().zip(&lp.objective).map(|(v, c)| v * c).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        values,
        objective,
        iterations: s.iterations,
    })
}
