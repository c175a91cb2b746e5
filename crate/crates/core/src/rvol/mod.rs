//! Forward reduced length, the L₊-exponential map and the weighted forward
//! reduced volume on a fixed background flow.

mod background;
pub mod dense;
mod expander;
mod jacobian;
mod path;
pub mod variational;
mod volume;

pub use background::FlowBackground;
pub use expander::{expander_residual, lplus_field, ExpanderResidual, LPlusField};
pub use jacobian::{jacobian_jplus, JacobianEstimate, JacobianOptions};
pub use path::{
    flat_point, l_plus, lplus_length, shoot_lplus_geodesic, BvpOptions, LPlusPath, LPlusSolution, LengthEstimate,
    ShootOptions, Shooter,
};
pub use volume::{
    check_pointwise_monotone_and_limit, forward_reduced_volume, write_volume_csv, PointwiseOptions, PointwiseReport,
    RaySummary, ReducedVolumeEstimate, VolumeOptions, VOLUME_CSV_HEADER,
};
