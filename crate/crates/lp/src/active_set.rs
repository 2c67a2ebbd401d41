//! Primal active-set simplex on the inequality form.
//!
//! A vertex is described by `n` linearly independent "working" rows whose
//! equations pin the point; the explicit inverse of that `n × n` working matrix
//! is kept up to date with rank-one updates and rebuilt periodically. Cost per
//! iteration is `O(n² + m·n)`, which suits both the small ReLU-epigraph programs
//! and the tall programs with thousands of rows over a few dozen variables.
//!
//! Variables with no binding row yet are pinned by *free* rows (`x_j = const`)
//! that may leave in either direction and never re-enter. Phase 1 minimizes a
//! single shared infeasibility variable `s` with all rows relaxed by `s`.

use crate::error::LpError;
use crate::problem::{dot, LpProblem, LpSolution, LpStatus, Relation};

/// Tolerances. Feasibility tolerances are relative to `1 + |rhs|`.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub feasibility: f64,
    pub optimality: f64,
    pub pivot: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feasibility: 1e-7,
            optimality: 1e-9,
            pivot: 1e-9,
        }
    }
}

/// A row that currently pins the vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActiveRow {
    Constraint(usize),
    Lower(usize),
    Upper(usize),
    Free(usize),
}

const REFACTOR_EVERY: usize = 48;
const DEGENERATE_BEFORE_BLAND: usize = 40;

/// Warm-startable solver. Keeps the last optimal working set so that a new
/// objective over the same feasible region resumes from a feasible vertex.
#[derive(Debug, Clone)]
pub struct ActiveSetSolver {
    n: usize,
    m: usize,
    a: Vec<f64>,
    h: Vec<f64>,
    row_eq: Vec<bool>,
    row_scale: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    c: Vec<f64>,
    tol: Tolerances,

    work: Vec<ActiveRow>,
    in_work: Vec<bool>,
    lower_in_work: Vec<bool>,
    upper_in_work: Vec<bool>,
    skip: Vec<bool>,
    disabled: Vec<bool>,
    free_val: Vec<f64>,
    binv: Vec<f64>,
    x: Vec<f64>,
    slack: Vec<f64>,
    updates: usize,
    ready: bool,
    alpha: Vec<f64>,
}

enum Pricing {
    Optimal,
    Release { pos: usize, sign: f64 },
}

enum Ratio {
    Unbounded,
    Step { row: ActiveRow, t: f64 },
}

impl ActiveSetSolver {
    pub fn new(problem: &LpProblem) -> Result<Self, LpError> {
        Self::with_tolerances(problem, Tolerances::default())
    }

    pub fn with_tolerances(problem: &LpProblem, tol: Tolerances) -> Result<Self, LpError> {
        let n = problem.num_vars();
        let m = problem.num_constraints();
        let mut a = Vec::with_capacity(n * m);
        let mut h = Vec::with_capacity(m);
        let mut row_eq = Vec::with_capacity(m);
        let mut row_scale = Vec::with_capacity(m);
        for (i, con) in problem.constraints().iter().enumerate() {
            if con.coeffs.len() != n {
                return Err(LpError::DimensionMismatch {
                    expected: n,
                    got: con.coeffs.len(),
                });
            }
            let scale = con.coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            if scale == 0.0 {
                return Err(LpError::ZeroRow(i));
            }
            a.extend_from_slice(&con.coeffs);
            h.push(con.rhs);
            row_eq.push(con.relation == Relation::Eq);
            row_scale.push(scale);
        }
        Ok(Self {
            n,
            m,
            a,
            h,
            row_eq,
            row_scale,
            lower: problem.lower().to_vec(),
            upper: problem.upper().to_vec(),
            c: problem.objective().to_vec(),
            tol,
            work: Vec::new(),
            in_work: vec![false; m],
            lower_in_work: vec![false; n],
            upper_in_work: vec![false; n],
            skip: vec![false; m],
            disabled: vec![false; m],
            free_val: vec![0.0; n],
            binv: vec![0.0; n * n],
            x: vec![0.0; n],
            slack: vec![0.0; m],
            updates: 0,
            ready: false,
            alpha: vec![0.0; m],
        })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    pub fn rhs(&self, i: usize) -> f64 {
        self.h[i]
    }

    /// Rows pinning the current vertex, sorted.
    pub fn working_set(&self) -> Vec<ActiveRow> {
        let mut w = self.work.clone();
        w.sort();
        w
    }

    pub fn set_objective(&mut self, c: &[f64]) -> Result<(), LpError> {
        if c.len() != self.n {
            return Err(LpError::DimensionMismatch {
                expected: self.n,
                got: c.len(),
            });
        }
        self.c.copy_from_slice(c);
        Ok(())
    }

    /// Appends a `≤` row. The warm basis survives if the current point satisfies it.
    pub fn push_row(&mut self, coeffs: &[f64], rhs: f64) -> Result<usize, LpError> {
        if coeffs.len() != self.n {
            return Err(LpError::DimensionMismatch {
                expected: self.n,
                got: coeffs.len(),
            });
        }
        let scale = coeffs.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if scale == 0.0 {
            return Err(LpError::ZeroRow(self.m));
        }
        self.a.extend_from_slice(coeffs);
        self.h.push(rhs);
        self.row_eq.push(false);
        self.row_scale.push(scale);
        self.in_work.push(false);
        self.skip.push(false);
        self.disabled.push(false);
        self.alpha.push(0.0);
        let s = rhs - dot(coeffs, &self.x);
        self.slack.push(s);
        self.m += 1;
        if self.ready && s < -self.feas_tol(rhs) {
            self.ready = false;
        }
        Ok(self.m - 1)
    }

    /// Excludes a row from the feasible region until re-enabled.
    pub fn disable_row(&mut self, i: usize) {
        if self.disabled[i] {
            return;
        }
        self.disabled[i] = true;
        if self.in_work[i] {
            self.ready = false;
        }
    }

    pub fn enable_row(&mut self, i: usize) {
        if !self.disabled[i] {
            return;
        }
        self.disabled[i] = false;
        if self.ready {
            let s = self.h[i] - dot(self.row(i), &self.x);
            self.slack[i] = s;
            if s < -self.feas_tol(self.h[i]) {
                self.ready = false;
            }
        }
    }

    /// Restarts from a known feasible point, skipping phase 1.
    pub fn restart_from(&mut self, x: &[f64]) -> Result<bool, LpError> {
        if x.len() != self.n {
            return Err(LpError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        if self.violation_at(x) > 0.0 {
            return Ok(false);
        }
        self.init_from_point(x)?;
        self.ready = true;
        Ok(true)
    }

    /// Maximizes the current objective.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        self.solve_near(&vec![0.0; self.n])
    }

    /// Maximizes the current objective; a cold start begins phase 1 at the
    /// projection of `guess` onto the variable bounds.
    pub fn solve_near(&mut self, guess: &[f64]) -> Result<LpSolution, LpError> {
        if guess.len() != self.n {
            return Err(LpError::DimensionMismatch {
                expected: self.n,
                got: guess.len(),
            });
        }
        let mut iterations = 0usize;
        if !self.ready {
            let x0: Vec<f64> = (0..self.n).map(|j| clamp_into(guess[j], self.lower[j], self.upper[j])).collect();
            if self.lower.iter().zip(&self.upper).any(|(l, u)| l > u) {
                return Ok(LpSolution::without_point(LpStatus::Infeasible, self.n, self.m, 0));
            }
            if self.violation_at(&x0) > 0.0 {
                match self.phase_one(&x0)? {
                    (Some(xf), it) => {
                        iterations += it;
                        self.init_from_point(&xf)?;
                    }
                    (None, it) => {
                        return Ok(LpSolution::without_point(LpStatus::Infeasible, self.n, self.m, it));
                    }
                }
            } else {
                self.init_from_point(&x0)?;
            }
            self.ready = true;
        }
        let (status, it) = self.optimize()?;
        iterations += it;
        match status {
            LpStatus::Unbounded => {
                self.ready = true;
                Ok(LpSolution::without_point(LpStatus::Unbounded, self.n, self.m, iterations))
            }
            _ => Ok(self.extract(iterations)),
        }
    }

    fn feas_tol(&self, rhs: f64) -> f64 {
        self.tol.feasibility * (1.0 + rhs.abs())
    }

    /// Positive part of the worst scaled violation beyond tolerance.
    fn violation_at(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m {
            if self.disabled[i] {
                continue;
            }
            let lhs = dot(self.row(i), x);
            let v = if self.row_eq[i] { (lhs - self.h[i]).abs() } else { lhs - self.h[i] };
            if v > self.feas_tol(self.h[i]) {
                worst = worst.max(v);
            }
        }
        for j in 0..self.n {
            let v = (self.lower[j] - x[j]).max(x[j] - self.upper[j]);
            let bound = if x[j] < self.lower[j] { self.lower[j] } else { self.upper[j] };
            if v > self.feas_tol(bound) {
                worst = worst.max(v);
            }
        }
        worst
    }

    fn phase_one(&self, x0: &[f64]) -> Result<(Option<Vec<f64>>, usize), LpError> {
        let n = self.n;
        let mut aux = LpProblem::new({
            let mut c = vec![0.0; n + 1];
            c[n] = -1.0;
            c
        });
        let mut s0 = 0.0f64;
        for i in 0..self.m {
            if self.disabled[i] {
                continue;
            }
            let row = self.row(i);
            let lhs = dot(row, x0);
            let mut coeffs = row.to_vec();
            coeffs.push(-1.0);
            aux.add_le(coeffs, self.h[i])?;
            s0 = s0.max(lhs - self.h[i]);
            if self.row_eq[i] {
                let mut neg: Vec<f64> = row.iter().map(|v| -v).collect();
                neg.push(-1.0);
                aux.add_le(neg, -self.h[i])?;
                s0 = s0.max(self.h[i] - lhs);
            }
        }
        for j in 0..n {
            aux.set_bounds(j, self.lower[j], self.upper[j])?;
        }
        aux.set_bounds(n, 0.0, f64::INFINITY)?;
        let mut start = x0.to_vec();
        start.push(s0 + 1.0);
        let mut engine = ActiveSetSolver::with_tolerances(&aux, self.tol)?;
        engine.init_from_point(&start)?;
        engine.ready = true;
        let (status, it) = engine.optimize()?;
        if status != LpStatus::Optimal {
            return Err(LpError::NumericalFailure("phase 1 did not reach an optimum".into()));
        }
        let s = engine.x[n];
        let h_scale = self.h.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if s > self.tol.feasibility * (1.0 + h_scale) {
            return Ok((None, it));
        }
        let mut xf = engine.x;
        xf.truncate(n);
        for j in 0..n {
            xf[j] = clamp_into(xf[j], self.lower[j], self.upper[j]);
        }
        Ok((Some(xf), it))
    }

    /// Working set = independent equalities, bounds tight at `x`, then free rows.
    fn init_from_point(&mut self, x: &[f64]) -> Result<(), LpError> {
        let n = self.n;
        self.work.clear();
        self.in_work.iter_mut().for_each(|v| *v = false);
        self.lower_in_work.iter_mut().for_each(|v| *v = false);
        self.upper_in_work.iter_mut().for_each(|v| *v = false);
        self.skip.iter_mut().for_each(|v| *v = false);

        let mut reduced: Vec<(Vec<f64>, usize)> = Vec::new();
        let mut pivot_used = vec![false; n];
        let try_add = |g: Vec<f64>, reduced: &mut Vec<(Vec<f64>, usize)>, pivot_used: &mut Vec<bool>| -> bool {
            let mut r = g;
            let gnorm = r.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
            for (prev, p) in reduced.iter() {
                let f = r[*p] / prev[*p];
                if f != 0.0 {
                    for (ri, pi) in r.iter_mut().zip(prev) {
                        *ri -= f * pi;
                    }
                }
            }
            let (piv, mag) = r
                .iter()
                .enumerate()
                .fold((0, 0.0f64), |(bi, bm), (i, v)| if v.abs() > bm { (i, v.abs()) } else { (bi, bm) });
            if mag <= 1e-9 * gnorm.max(1e-300) {
                return false;
            }
            pivot_used[piv] = true;
            reduced.push((r, piv));
            true
        };

        for i in 0..self.m {
            if !self.row_eq[i] || self.disabled[i] {
                continue;
            }
            if try_add(self.row(i).to_vec(), &mut reduced, &mut pivot_used) {
                self.work.push(ActiveRow::Constraint(i));
                self.in_work[i] = true;
            } else {
                self.skip[i] = true;
            }
        }
        for j in 0..n {
            if self.lower[j] == self.upper[j] {
                let mut g = vec![0.0; n];
                g[j] = -1.0;
                if try_add(g, &mut reduced, &mut pivot_used) {
                    self.work.push(ActiveRow::Lower(j));
                    self.lower_in_work[j] = true;
                }
            }
        }
        for j in 0..n {
            if self.lower[j] == self.upper[j] || self.work.len() == n {
                continue;
            }
            let (at_lower, at_upper) = (x[j] == self.lower[j], x[j] == self.upper[j]);
            if at_lower || at_upper {
                let g = unit(n, j, if at_lower { -1.0 } else { 1.0 });
                if try_add(g, &mut reduced, &mut pivot_used) {
                    if at_lower {
                        self.work.push(ActiveRow::Lower(j));
                        self.lower_in_work[j] = true;
                    } else {
                        self.work.push(ActiveRow::Upper(j));
                        self.upper_in_work[j] = true;
                    }
                }
            }
        }
        for j in 0..n {
            if !pivot_used[j] {
                self.work.push(ActiveRow::Free(j));
                self.free_val[j] = x[j];
            }
        }
        if self.work.len() != n {
            return Err(LpError::NumericalFailure(format!(
                "initial working set has {} rows for {} variables",
                self.work.len(),
                n
            )));
        }
        self.refactor()
    }

    fn row_vec(&self, r: ActiveRow) -> Vec<f64> {
        match r {
            ActiveRow::Constraint(i) => self.row(i).to_vec(),
            ActiveRow::Lower(j) => unit(self.n, j, -1.0),
            ActiveRow::Upper(j) | ActiveRow::Free(j) => unit(self.n, j, 1.0),
        }
    }

    fn row_rhs(&self, r: ActiveRow) -> f64 {
        match r {
            ActiveRow::Constraint(i) => self.h[i],
            ActiveRow::Lower(j) => -self.lower[j],
            ActiveRow::Upper(j) => self.upper[j],
            ActiveRow::Free(j) => self.free_val[j],
        }
    }

    fn is_fixed(&self, r: ActiveRow) -> bool {
        match r {
            ActiveRow::Constraint(i) => self.row_eq[i],
            ActiveRow::Lower(j) => self.lower[j] == self.upper[j],
            _ => false,
        }
    }

    /// Rebuilds the inverse of the working matrix by Gauss–Jordan elimination
    /// with partial pivoting, then recomputes the point and slacks.
    fn refactor(&mut self) -> Result<(), LpError> {
        let n = self.n;
        let mut g = vec![0.0; n * n];
        for (k, &r) in self.work.iter().enumerate() {
            let v = self.row_vec(r);
            g[k * n..(k + 1) * n].copy_from_slice(&v);
        }
        let inv = invert(&mut g, n).ok_or_else(|| LpError::NumericalFailure("singular working matrix".into()))?;
        self.binv = inv;
        self.updates = 0;
        let hw: Vec<f64> = self.work.iter().map(|&r| self.row_rhs(r)).collect();
        for i in 0..n {
            self.x[i] = dot(&self.binv[i * n..(i + 1) * n], &hw);
        }
        for i in 0..self.m {
            self.slack[i] = self.h[i] - dot(&self.a[i * n..(i + 1) * n], &self.x);
        }
        Ok(())
    }

    /// Multipliers `λ` with `c = G_Wᵀ λ`.
    fn multipliers(&self) -> Vec<f64> {
        let n = self.n;
        let mut lam = vec![0.0; n];
        for i in 0..n {
            let ci = self.c[i];
            if ci != 0.0 {
                let row = &self.binv[i * n..(i + 1) * n];
                for (l, b) in lam.iter_mut().zip(row) {
                    *l += ci * b;
                }
            }
        }
        lam
    }

    fn row_norm(&self, r: ActiveRow) -> f64 {
        match r {
            ActiveRow::Constraint(i) => self.row_scale[i],
            _ => 1.0,
        }
    }

    fn price(&self, lam: &[f64], bland: bool) -> Pricing {
        let c_scale = self.c.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        let tol = self.tol.optimality * c_scale;
        // Free rows go first: any nonzero multiplier lets the point move.
        let mut best: Option<(usize, f64)> = None;
        for (k, &r) in self.work.iter().enumerate() {
            if let ActiveRow::Free(_) = r {
                let v = lam[k].abs();
                if v > tol && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((k, v));
                }
            }
        }
        if let Some((k, _)) = best {
            return Pricing::Release {
                pos: k,
                sign: lam[k].signum(),
            };
        }
        let mut chosen: Option<(usize, f64, ActiveRow)> = None;
        for (k, &r) in self.work.iter().enumerate() {
            if matches!(r, ActiveRow::Free(_)) || self.is_fixed(r) {
                continue;
            }
            let scaled = lam[k] * self.row_norm(r);
            if scaled < -tol {
                let better = match chosen {
                    None => true,
                    Some((_, bv, br)) => {
                        if bland {
                            r < br
                        } else {
                            scaled < bv || (scaled == bv && r < br)
                        }
                    }
                };
                if better {
                    chosen = Some((k, scaled, r));
                }
            }
        }
        match chosen {
            Some((k, _, _)) => Pricing::Release { pos: k, sign: -1.0 },
            None => Pricing::Optimal,
        }
    }

    /// Harris two-pass ratio test along `d`.
    fn ratio_test(&mut self, d: &[f64], bland: bool) -> Ratio {
        let n = self.n;
        let dnorm = d.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let piv = self.tol.pivot * dnorm.max(1e-300);
        let mut t_max = f64::INFINITY;
        for i in 0..self.m {
            let al = dot(&self.a[i * n..(i + 1) * n], d);
            self.alpha[i] = al;
            if self.in_work[i] || self.skip[i] || self.disabled[i] {
                continue;
            }
            if al > piv * self.row_scale[i] {
                let s = self.slack[i].max(0.0);
                let t = (s + self.feas_tol(self.h[i])) / al;
                if t < t_max {
                    t_max = t;
                }
            }
        }
        for j in 0..n {
            if d[j] > piv && !self.upper_in_work[j] && self.upper[j].is_finite() {
                let s = (self.upper[j] - self.x[j]).max(0.0);
                let t = (s + self.feas_tol(self.upper[j])) / d[j];
                t_max = t_max.min(t);
            } else if d[j] < -piv && !self.lower_in_work[j] && self.lower[j].is_finite() {
                let s = (self.x[j] - self.lower[j]).max(0.0);
                let t = (s + self.feas_tol(self.lower[j])) / -d[j];
                t_max = t_max.min(t);
            }
        }
        if !t_max.is_finite() {
            return Ratio::Unbounded;
        }
        // Second pass: largest normalized pivot among rows blocking within t_max.
        let mut best: Option<(ActiveRow, f64, f64)> = None;
        let consider = |row: ActiveRow, ratio: f64, weight: f64, best: &mut Option<(ActiveRow, f64, f64)>| {
            if ratio > t_max {
                return;
            }
            let better = match *best {
                None => true,
                Some((br, bw, _)) => {
                    if bland {
                        row < br
                    } else {
                        weight > bw || (weight == bw && row < br)
                    }
                }
            };
            if better {
                *best = Some((row, weight, ratio));
            }
        };
        for i in 0..self.m {
            if self.in_work[i] || self.skip[i] || self.disabled[i] {
                continue;
            }
            let al = self.alpha[i];
            if al > piv * self.row_scale[i] {
                let ratio = self.slack[i].max(0.0) / al;
                consider(ActiveRow::Constraint(i), ratio, al / self.row_scale[i], &mut best);
            }
        }
        for j in 0..n {
            if d[j] > piv && !self.upper_in_work[j] && self.upper[j].is_finite() {
                let ratio = (self.upper[j] - self.x[j]).max(0.0) / d[j];
                consider(ActiveRow::Upper(j), ratio, d[j], &mut best);
            } else if d[j] < -piv && !self.lower_in_work[j] && self.lower[j].is_finite() {
                let ratio = (self.x[j] - self.lower[j]).max(0.0) / -d[j];
                consider(ActiveRow::Lower(j), ratio, -d[j], &mut best);
            }
        }
        match best {
            Some((row, _, t)) => Ratio::Step { row, t },
            None => Ratio::Unbounded,
        }
    }

    fn optimize(&mut self) -> Result<(LpStatus, usize), LpError> {
        let n = self.n;
        let max_iter = 10_000 + 20 * (n + self.m);
        let mut degenerate = 0usize;
        let mut iter = 0usize;
        loop {
            if self.updates >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let bland = degenerate >= DEGENERATE_BEFORE_BLAND;
            let lam = self.multipliers();
            let (pos, sign) = match self.price(&lam, bland) {
                Pricing::Optimal => {
                    if self.updates > 0 {
                        // Confirm on a fresh factorization before declaring optimality.
                        self.refactor()?;
                        let lam = self.multipliers();
                        if let Pricing::Release { .. } = self.price(&lam, bland) {
                            continue;
                        }
                    }
                    if self.violation_at(&self.x.clone()) > 0.0 {
                        return Err(LpError::NumericalFailure("final point violates constraints".into()));
                    }
                    return Ok((LpStatus::Optimal, iter));
                }
                Pricing::Release { pos, sign } => (pos, sign),
            };
            iter += 1;
            if iter > max_iter {
                return Err(LpError::NumericalFailure(format!("iteration limit {max_iter} exceeded")));
            }
            let d: Vec<f64> = (0..n).map(|i| sign * self.binv[i * n + pos]).collect();
            let (row, t) = match self.ratio_test(&d, bland) {
                Ratio::Unbounded => return Ok((LpStatus::Unbounded, iter)),
                Ratio::Step { row, t } => (row, t),
            };
            if t <= 1e-12 {
                degenerate += 1;
            } else {
                degenerate = 0;
            }
            for (xi, di) in self.x.iter_mut().zip(&d) {
                *xi += t * di;
            }
            for i in 0..self.m {
                self.slack[i] -= t * self.alpha[i];
            }
            self.replace(pos, row)?;
        }
    }

    /// Sherman–Morrison update for swapping working row `pos` with `row`.
    fn replace(&mut self, pos: usize, row: ActiveRow) -> Result<(), LpError> {
        let n = self.n;
        let w: Vec<f64> = match row {
            ActiveRow::Constraint(i) => {
                let g = &self.a[i * n..(i + 1) * n];
                let mut w = vec![0.0; n];
                for (r, &gr) in g.iter().enumerate() {
                    if gr != 0.0 {
                        let brow = &self.binv[r * n..(r + 1) * n];
                        for (wj, bj) in w.iter_mut().zip(brow) {
                            *wj += gr * bj;
                        }
                    }
                }
                w
            }
            ActiveRow::Lower(j) => self.binv[j * n..(j + 1) * n].iter().map(|v| -v).collect(),
            ActiveRow::Upper(j) | ActiveRow::Free(j) => self.binv[j * n..(j + 1) * n].to_vec(),
        };
        let piv = w[pos];
        if piv.abs() < 1e-13 {
            self.refactor()?;
            return Err(LpError::NumericalFailure("vanishing pivot in basis update".into()));
        }
        let u: Vec<f64> = (0..n).map(|i| self.binv[i * n + pos]).collect();
        for i in 0..n {
            let ui = u[i];
            if ui == 0.0 {
                continue;
            }
            let f = ui / piv;
            let brow = &mut self.binv[i * n..(i + 1) * n];
            for (bj, wj) in brow.iter_mut().zip(&w) {
                *bj -= f * wj;
            }
            brow[pos] = f;
        }
        match self.work[pos] {
            ActiveRow::Constraint(i) => self.in_work[i] = false,
            ActiveRow::Lower(j) => self.lower_in_work[j] = false,
            ActiveRow::Upper(j) => self.upper_in_work[j] = false,
            ActiveRow::Free(_) => {}
        }
        match row {
            ActiveRow::Constraint(i) => {
                self.in_work[i] = true;
                self.slack[i] = 0.0;
            }
            ActiveRow::Lower(j) => {
                self.lower_in_work[j] = true;
                self.x[j] = self.lower[j];
            }
            ActiveRow::Upper(j) => {
                self.upper_in_work[j] = true;
                self.x[j] = self.upper[j];
            }
            ActiveRow::Free(_) => unreachable!("free rows never re-enter"),
        }
        self.work[pos] = row;
        self.updates += 1;
        Ok(())
    }

    fn extract(&self, iterations: usize) -> LpSolution {
        let lam = self.multipliers();
        let mut duals = vec![0.0; self.m];
        let mut bound_duals = vec![0.0; self.n];
        for (k, &r) in self.work.iter().enumerate() {
            match r {
                ActiveRow::Constraint(i) => duals[i] = lam[k],
                ActiveRow::Lower(j) => bound_duals[j] -= lam[k],
                ActiveRow::Upper(j) => bound_duals[j] += lam[k],
                ActiveRow::Free(_) => {}
            }
        }
        let primal = self.x.clone();
        LpSolution {
            status: LpStatus::Optimal,
            objective_value: dot(&self.c, &primal),
            primal,
            duals,
            bound_duals,
            iterations,
        }
    }
}

fn unit(n: usize, j: usize, v: f64) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[j] = v;
    e
}

fn clamp_into(v: f64, lo: f64, hi: f64) -> f64 {
    if v < lo {
        lo
    } else if v > hi {
        hi
    } else {
        v
    }
}

/// In-place Gauss–Jordan inverse of a row-major `n × n` matrix.
fn invert(g: &mut [f64], n: usize) -> Option<Vec<f64>> {
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        inv[i * n + i] = 1.0;
    }
    let scale = g.iter().fold(0.0f64, |acc, v| acc.max(v.abs())).max(1e-300);
    for col in 0..n {
        let (p, mag) = (col..n).fold((col, 0.0f64), |(bp, bm), r| {
            let v = g[r * n + col].abs();
            if v > bm {
                (r, v)
            } else {
                (bp, bm)
            }
        });
        if mag <= 1e-14 * scale {
            return None;
        }
        if p != col {
            for k in 0..n {
                g.swap(p * n + k, col * n + k);
                inv.swap(p * n + k, col * n + k);
            }
        }
        let d = g[col * n + col];
        for k in col..n {
            g[col * n + k] /= d;
        }
        for k in 0..n {
            inv[col * n + k] /= d;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = g[r * n + col];
            if f == 0.0 {
                continue;
            }
            for k in col + 1..n {
                g[r * n + k] -= f * g[col * n + k];
            }
            g[r * n + col] = 0.0;
            for k in 0..n {
                inv[r * n + k] -= f * inv[col * n + k];
            }
        }
    }
    Some(inv)
}

/// One-shot solve.
pub fn solve(problem: &LpProblem) -> Result<LpSolution, LpError> {
    ActiveSetSolver::new(problem)?.solve()
}

/// One-shot solve with phase 1 started near `guess`.
pub fn solve_near(problem: &LpProblem, guess: &[f64]) -> Result<LpSolution, LpError> {
    ActiveSetSolver::new(problem)?.solve_near(guess)
}
