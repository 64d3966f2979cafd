//! Book states, queue-reactive intensities, regeneration and the
//! generators built from them.

mod dynamics;
mod generator;
mod intensity;
mod regen;
mod types;

pub use dynamics::{default_price_window, Control, Dynamics, PriceWindow, Transition};
pub use generator::{
    build_controlled_generator, build_controlled_generator_with_limit, build_market_generator, initial_states,
    ControlledGenerator, MarketGenerator, DEFAULT_STATE_LIMIT,
};
pub use intensity::{split_consumption, ConstantRates, ImbalanceRatioRates, IntensityModel, RateTable, SideRates};
pub use regen::{RegenOutcome, RegenerationLaw};
pub use types::{imbalance, AgentState, BookState, EventKind, MarketEvent, ModelConfig, Payoff, Placement, Side};
