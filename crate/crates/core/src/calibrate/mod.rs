//! Event data, occupation-time calibration and synthetic streams.

mod estimate;
mod events;
mod imbalance;
mod synthetic;

pub use estimate::{
    estimate_intensities, estimate_regeneration, CalibrationOptions, IntensityEstimate, RegenerationEstimate,
};
pub use events::{read_events, write_events, EventRecord};
pub use imbalance::{imbalance_stats, signed_imbalance, DensityRow, ImbalanceStats, MeanByType, PriceMoveRow};
pub use synthetic::{generate_synthetic_events, ks_exponential, rescaled_waiting_times, SyntheticManifest, TruthRow};
