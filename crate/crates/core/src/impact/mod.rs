//! Long-run price impact of the current queue configuration.

mod fixed_point;
mod race;
pub mod spectral;

pub use fixed_point::{first_depletion_moves, impact_fixed_point, ImpactSolution};
pub use race::{build_depletion_race, hitting_probabilities, DepletionRace, Exit, HittingProbabilities, DENSE_LIMIT};

use crate::error::Result;
use crate::model::{IntensityModel, RegenerationLaw};

/// Race, hitting probabilities and fixed point in one call.
pub fn solve_impact(model: &IntensityModel, regen: &RegenerationLaw) -> Result<ImpactSolution> {
    let race = build_depletion_race(model)?;
    impact_fixed_point(model, regen, &race)
}
