//! Left-invariant geometry of three-dimensional unimodular Lie groups.

mod ball;
mod curvature;
mod metric;
pub mod milnor;
mod model;

pub use ball::{
    ball_volume, ball_volume_at, cgt_hypothesis_check, collapse_radius, BallOptions, BallVolumeCurve, CgtCheck,
};
pub use curvature::{
    compute_curvature, curvature_of_entries, f_sigma, max_epsilon, pinching_margin, Curvature, CurvatureReport,
};
pub use metric::{FrameMetric, DEGENERACY_RATIO};
pub use model::{HomogeneousModel, ModelKind};
