//! Numerical laboratory for Ricci flow on homogeneous 3-geometries.
//!
//! * [`geom`]: curvature, pinching functionals, geodesic balls of left-invariant metrics.
//! * [`flow`]: adaptive integration of the Ricci flow ODE and its estimate monitors.
//! * [`singularity`]: singularity classification, blow-up sequences, noncollapse diagnostics.
//! * [`rvol`]: forward reduced length, the L₊-exponential map and the weighted reduced volume.
//!
//! Everything numerical is generic over [`Real`]; the `*64` aliases below fix `f64`.

pub mod error;
pub mod flow;
pub mod geom;
pub mod linalg;
pub mod ode;
pub mod quadrature;
pub mod rvol;
pub mod scalar;
pub mod singularity;

pub use error::{LabError, Result};
pub use scalar::Real;

pub type HomogeneousModel64 = geom::HomogeneousModel<f64>;
pub type FrameMetric64 = geom::FrameMetric<f64>;
pub type CurvatureReport64 = geom::CurvatureReport<f64>;
pub type BallVolumeCurve64 = geom::BallVolumeCurve<f64>;
pub type FlowControls64 = flow::FlowControls<f64>;
pub type FlowTrajectory64 = flow::FlowTrajectory<f64>;
pub type SingularityVerdict64 = singularity::SingularityVerdict<f64>;
pub type BlowupSequence64 = singularity::BlowupSequence<f64>;
pub type NoncollapseReport64 = singularity::NoncollapseReport<f64>;
pub type FlowBackground64 = rvol::FlowBackground<f64>;
pub type LPlusPath64 = rvol::LPlusPath<f64>;
pub type ReducedVolumeEstimate64 = rvol::ReducedVolumeEstimate<f64>;
