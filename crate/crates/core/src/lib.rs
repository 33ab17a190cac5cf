//! Numerical laboratory for maximal L²-regularity of non-autonomous
//! parabolic problems `u' + A(t)u = f` at dense matrix scale.
//!
//! The pieces, bottom up:
//! - [`gelfand`]: the triple V ⊂ H ⊂ V′ and its interpolation scale
//! - [`formpath`]: time-dependent form families, hypotheses, seminorms, subdivision
//! - [`funcalc`]: semigroup, resolvent and fractional powers of frozen operators
//! - [`duhamel`]: the frozen-coefficient fixed-point solver and reference steppers
//! - [`estimates`]: measured constants against the theoretical bounds
//! - [`problems`]: 1D finite-element problems and coefficient paths

pub mod duhamel;
pub mod error;
pub mod estimates;
pub mod formpath;
pub mod funcalc;
pub mod gelfand;
pub mod linalg;
pub mod problems;
pub mod quadrature;

pub use error::{Error, Result};
pub use funcalc::{Backend, CalculusEngine};
pub use gelfand::{GelfandTriple, Space};
pub use formpath::{FormPath, HypothesisConstants, Interp, Side, Subdivision};



pub use duhamel::{Forcing, Method, Scheme, SolveConfig, Trajectory};
pub use estimates::EstimateReport;
