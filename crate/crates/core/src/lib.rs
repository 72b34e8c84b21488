//! Numerical toolkit for chordal Loewner chains: driver sampling and regularity,
//! trace synthesis, forward and reverse flows, curve zipping, curve distances,
//! SLE sampling and support experiments.

pub mod driver;
pub mod error;
pub mod io;
pub mod loewner;
pub mod metrics;
mod ode;
pub mod scalar;
pub mod sle;
pub mod support;
pub mod zipper;

pub use driver::{Driver, Interpolation, TimeGrid};
pub use error::{Error, Result};
pub use loewner::{compute_trace, SlitMapChain, Trace};
pub use metrics::{strong_distance, sup_distance, AlignmentResult};
pub use scalar::Real;
pub use zipper::{zip_curve, RawCurve};

pub type Complex64 = num_complex::Complex<f64>;
pub type Complex32 = num_complex::Complex<f32>;
pub type Driver64 = Driver<f64>;
pub type Driver32 = Driver<f32>;
pub type Trace64 = Trace<f64>;
pub type Trace32 = Trace<f32>;
pub type TimeGrid64 = TimeGrid<f64>;
pub type RawCurve64 = RawCurve<f64>;
