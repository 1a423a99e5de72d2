//! Truncated mKdV/mKdV2 flows.
//!
//! The Galerkin system evolves `Pi_N u` under
//! `d_t u + d_x^3 u = ±6 Pi_N N(Pi_N u)`; modes above `N` follow the free flow.

mod gauge;
mod integrator;
mod nonlinearity;
mod resonance;

pub use gauge::{gauge_rates, gauge_transform, GaugeRates, CONSERVATION_SLACK};
pub use integrator::{
    evolve, evolve_with_stats, flow, flow_to_times, step, Equation, FlowConfig, FlowStats,
    Integrator, MIN_STEP, ROUNDOFF_FLOOR, TARGET_FRACTION,
};
pub use nonlinearity::{
    full_cubic_from_split, nonlinearity, nonlinearity_direct, NonlinearityKernel, NonlinearitySplit, DIRECT_CAP,
};
pub use resonance::{classify_region, resonance, resonance_cubic, FrequencyTriple, Region};
