//! Stationary shape matrices, ε-continuation and classification.

mod continuation;
mod objective;
mod pfun;
mod solver;

pub use continuation::{classify, continuation_solve, richardson_sqrt, solve, Classification, SolveResult, TraceEntry};
pub use objective::{adapted_rule, el_residual, f_gradient, f_value, g_constant, g_value, t_min, Matrix6, Vector6};
pub use pfun::{p_quadratic, p_quadratic_reduced, p_quadratic_sphere, p_quartic, q_quartic, MIN_ORDER, QUADRATIC_AGREEMENT};
pub use solver::{solve_equilibrium, Equilibrium, SolverConfig};
