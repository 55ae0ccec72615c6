//! Design, simulation and verification of fully passive binary-coded
//! reflectors for millimeter-wave links.
//!
//! Angles are in degrees at every public boundary and lengths are in meters.

// Negated comparisons across the crate reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod cli;
pub mod diffraction;
pub mod error;
pub mod fab;
pub mod figures;
pub mod maskfile;
pub mod measure;
pub mod model;
pub mod synthesis;

pub use error::{Error, Result};
pub use model::{
    array_factor, normalized_gain, pattern_sweep, peak_to_sidelobe, uniform_closed_form, AngleGrid,
    AngularPattern, Aperture, CoefficientKind, ReflectionCoefficients,
};
pub use num_complex::Complex64;
