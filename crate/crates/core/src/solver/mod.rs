//! Conic solver for semidefinite programs over Hermitian PSD blocks.

mod admm;
mod dump;
mod problem;

pub use admm::{check_constraints, solve, ConicSolution, SolveOptions, SolveStatus};
pub use dump::{dump_problem, load_problem};
pub use problem::{ConicProblem, Constraint, Entry, LinearForm};
