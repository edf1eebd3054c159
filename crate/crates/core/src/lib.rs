//! Casorati curvature inequalities for Riemannian maps and submersions
//! involving quaternionic space forms.

pub mod casorati;
pub mod charts;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod geometry;
pub mod inequalities;
pub mod jet;
pub mod maps;
pub mod quaternionic;
pub mod report;
pub mod scalar;
pub mod scenario;
pub mod tripathi;

pub use casorati::{Coefficients, HyperplaneExtrema};
pub use error::{Error, Result};
pub use inequalities::{DeltaN, EqualityDiagnostics, TheoremId, TheoremReport, Variant, Verdict};
pub use report::{run, validate, RunReport, ValidationReport};
pub use scalar::Scalar;
pub use scenario::{ScenarioFile, Scene};

/// Second-order jet over `f64`.
pub type Jet = jet::Jet2<f64>;
/// Single-precision coefficient arrays for the pure Casorati algebra.
pub type Coefficients32 = casorati::CoeffArray<f32>;
