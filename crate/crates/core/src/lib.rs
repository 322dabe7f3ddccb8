//! Numerical laboratory for the min-max width of Riemannian three-spheres.
//!
//! * [`berger`]: exact width formula and qualitative analysis of Berger spheres.
//! * [`conformal`]: axisymmetric metrics `u^4 g_round`, latitude minimal spheres
//!   and their Jacobi spectra.
//! * [`yamabe`]: the normalized Yamabe flow on axisymmetric profiles and the
//!   monitors along it.
//! * [`equidist`]: cone-hull membership, separation certificates and Cesàro
//!   selection for measures on finite sets.
//!
//! Numerical code is generic over [`Real`]; the type aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod berger;
pub mod conformal;
pub mod equidist;
pub mod error;
pub mod io;
pub mod numerics;
pub mod scalar;
pub mod yamabe;

pub use error::{Error, Result};
pub use scalar::{Field, Rational, Real};

/// Format tag embedded in every emitted report.
pub const FORMAT_VERSION: &str = "widthlab-report/1";

pub type BergerParameterF64 = berger::BergerParameter<f64>;
pub type BergerReportF64 = berger::BergerReport<f64>;
pub type QuadratureConfigF64 = numerics::QuadratureConfig<f64>;
pub type GridFunctionF64 = numerics::GridFunction<f64>;
pub type AxisymProfileF64 = conformal::AxisymProfile<f64>;
pub type LatitudeSphereF64 = conformal::LatitudeSphere<f64>;
pub type FlowStateF64 = yamabe::FlowState<f64>;
pub type FlowTraceF64 = yamabe::FlowTrace<f64>;
pub type FlowConfigF64 = yamabe::FlowConfig<f64>;
