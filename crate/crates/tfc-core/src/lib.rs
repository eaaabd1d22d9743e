//! Constrained expressions and least-squares solution of differential equations.
//!
//! A constrained expression maps any free function onto a function that
//! satisfies a fixed set of linear constraints exactly. Representing the free
//! function as a linear combination of basis functions turns a differential
//! equation into a (possibly nonlinear) least-squares problem in the basis
//! coefficients, with the constraints already built in.

pub mod expr;
pub mod basis;
pub mod quad;
pub mod constraint;
pub mod multivar;
pub mod solvers;
pub mod desolve;
