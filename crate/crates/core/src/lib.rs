//! Numerical laboratory for parabolic Pucci extremal equations.
//!
//! The crate evaluates the extremal operators, provides the parabolic cube
//! calculus and the dyadic Calderón–Zygmund selection, solves the extremal
//! equations with a monotone explicit scheme and checks Harnack-type
//! estimates on the resulting grid fields.

pub mod cz;
pub mod equation;
pub mod estimators;
pub mod geometry;
pub mod grid;
pub mod pucci;
pub mod oracles;
pub mod rng;

pub use equation::{Coefficient, EquationSpec, Field, SpecError};
pub use pucci::{pucci_eval, Branch, PucciError, PucciPair, SymMatrix};
pub use rng::SeededRng;
