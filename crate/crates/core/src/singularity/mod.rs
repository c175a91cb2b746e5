//! Singularity types, parabolic blow-up sequences and noncollapse diagnostics.

mod blowup;
mod classify;
mod noncollapse;

pub use blowup::{rescale_trajectory, select_blowup_times, BlowupQuantity, BlowupSequence};
pub use classify::{classify_singularity, ClassifyOptions, SingularityKind, SingularityVerdict};
pub use noncollapse::{kappa_noncollapse_check, volume_ratio_sequence, NoncollapseReport, VolumeRatioSequence};

#[cfg(test)]
mod tests;
