//! Approximate model counting for bounded integer and linear real
//! arithmetic, driven by an external SMT solver, and its application to
//! loop-free probabilistic programs.

pub mod continuous;
pub mod discrete;
pub mod error;
pub mod formula;
pub mod hashing;
pub mod params;
pub mod ppl;
pub mod rat;
pub mod reference;
pub mod sexp;
pub mod solver;

pub use error::{Error, Result};
pub use formula::{Assignment, Cmp, Formula, Measure, MeasuredFormula, Sort, Term, Theory, VarDecl};
pub use rat::Rat;
