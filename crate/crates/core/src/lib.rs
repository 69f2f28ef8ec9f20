//! Numerical laboratory for the lightlike self-similar solutions of the radial
//! membrane equation
//!
//! `u_tt − u_rr − u_r/r + u_tt u_r² + u_rr u_t² − 2 u_t u_r u_tr + u_r u_t²/r − u_r³/r = 0`.
//!
//! Modules:
//! - [`profiles`]: explicit solutions `±(T−t)√(1−(r/(T−t))²)`, similarity frames, residual oracles.
//! - [`linearized`]: method-of-lines evolution of the linearized and nonlinear perturbation equations.
//! - [`spectral`]: mode roots, Frobenius recurrence, Newton polygons, operator spectrum.
//! - [`diffsys`]: exact rational checks of the companion-system transforms and growth profiles.
//! - [`nashmoser`]: smoothing operators and the discrete Nash–Moser iteration.

pub mod diffsys;
pub mod error;
pub mod grid;
pub mod io;
pub mod jet;
pub mod linearized;
pub mod nashmoser;
pub mod profiles;
pub mod random;
pub mod spectral;

pub use error::{Error, Result};
pub use grid::RadialGrid;
pub use linearized::{CoeffSet, DecayReport, EnergyParams, FieldState};
pub use nashmoser::{IterationState, ScheduleParams, SmoothingOp};
pub use num_complex::Complex64;
pub use profiles::{SelfSimilarProfile, SimilarityFrame};
pub use spectral::{FrobeniusSeries, NewtonPolygon, OperatorMatrices, QuadraticPoly};
