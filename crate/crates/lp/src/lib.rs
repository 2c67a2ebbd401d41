//! Dense linear programming with dual multipliers.
//!
//! Every convex program in the screening toolkit reduces to an LP of the form
//! `maximize c·x` subject to `≤`/`=` rows and variable bounds. [`solve`] runs a
//! primal active-set simplex and reports primal point, row duals and bound
//! duals; [`ActiveSetSolver`] keeps its basis between calls so a sequence of
//! objectives over one feasible region is re-optimized from the previous vertex.

mod active_set;
mod error;
mod problem;

pub use active_set::{solve, solve_near, ActiveRow, ActiveSetSolver, Tolerances};
pub use error::LpError;
pub use problem::{dot, Constraint, LpProblem, LpSolution, LpStatus, Relation};
