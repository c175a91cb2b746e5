//! Ricci flow on left-invariant metrics and the pinching estimates along it.

mod checks;
mod export;
mod integrate;
mod trajectory;

pub use checks::*;
pub use export::*;
pub use integrate::{extrapolate_blowup_time, integrate_flow};
pub use trajectory::{FlowControls, FlowTrajectory, Horizon, Termination};
