//! Problem and solution types.

use crate::error::LpError;

/// Row relation. `≥` rows are expressed by negating the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize c·x` subject to linear rows and per-variable bounds.
///
/// Bounds default to free (`-inf..inf`). Rows are stored dense; the engine is
/// meant for problems with up to a few hundred variables and any number of rows.
#[derive(Debug, Clone)]
pub struct LpProblem {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn set_objective(&mut self, objective: Vec<f64>) -> Result<(), LpError> {
        if objective.len() != self.num_vars() {
            return Err(LpError::DimensionMismatch {
                expected: self.num_vars(),
                got: objective.len(),
            });
        }
        self.objective = objective;
        Ok(())
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Appends a row and returns its index.
    pub fn add_constraint(
        &mut self,
        coeffs: Vec<f64>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize, LpError> {
        if coeffs.len() != self.num_vars() {
            return Err(LpError::DimensionMismatch {
                expected: self.num_vars(),
                got: coeffs.len(),
            });
        }
        if coeffs.iter().all(|&c| c == 0.0) {
            return Err(LpError::ZeroRow(self.constraints.len()));
        }
        if !rhs.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(LpError::NonFinite);
        }
        self.constraints.push(Constraint { coeffs, relation, rhs });
        Ok(self.constraints.len() - 1)
    }

    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<usize, LpError> {
        self.add_constraint(coeffs, Relation::Le, rhs)
    }

    pub fn add_eq(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<usize, LpError> {
        self.add_constraint(coeffs, Relation::Eq, rhs)
    }

    /// Sets bounds on one variable; use infinities for a missing side.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> Result<(), LpError> {
        if var >= self.num_vars() {
            return Err(LpError::DimensionMismatch {
                expected: self.num_vars(),
                got: var,
            });
        }
        if lower.is_nan() || upper.is_nan() || lower == f64::INFINITY || upper == f64::NEG_INFINITY {
            return Err(LpError::NonFinite);
        }
        self.lower[var] = lower;
        self.upper[var] = upper;
        Ok(())
    }

    pub fn set_lower(&mut self, var: usize, lower: f64) -> Result<(), LpError> {
        let up = self.upper[var];
        self.set_bounds(var, lower, up)
    }

    /// Evaluates `c·x`.
    pub fn objective_at(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest violation of any row or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for con in &self.constraints {
            let lhs = dot(&con.coeffs, x);
            let v = match con.relation {
                Relation::Le => lhs - con.rhs,
                Relation::Eq => (lhs - con.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, &xj) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - xj).max(xj - self.upper[j]);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of a solve.
///
/// Multipliers follow the maximization convention `c = Σ duals_i a_i + bound_duals`,
/// so the dual of a binding `≤` row is nonnegative and equals the marginal
/// objective gain per unit of right-hand side. `bound_duals[j]` is positive when
/// the upper bound binds and negative when the lower bound binds.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub duals: Vec<f64>,
    pub bound_duals: Vec<f64>,
    pub objective_value: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        let objective_value = match status {
            LpStatus::Infeasible => f64::NEG_INFINITY,
            LpStatus::Unbounded => f64::INFINITY,
            LpStatus::Optimal => f64::NAN,
        };
        Self {
            status,
            primal: vec![f64::NAN; n],
            duals: vec![0.0; m],
            bound_duals: vec![0.0; n],
            objective_value,
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Dual objective `Σ duals_i b_i + Σ bound terms`; equals the primal value at optimality.
    pub fn dual_objective(&self, problem: &LpProblem) -> f64 {
        let mut total = 0.0;
        for (y, con) in self.duals.iter().zip(problem.constraints()) {
            total += y * con.rhs;
        }
        for (j, &beta) in self.bound_duals.iter().enumerate() {
            if beta > 0.0 {
                total += beta * problem.upper()[j];
            } else if beta < 0.0 {
                total += beta * problem.lower()[j];
            }
        }
        total
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
