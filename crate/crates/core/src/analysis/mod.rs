//! Checks on solved models: exact finite-horizon oracles, Hoeffding gaps,
//! gain curves in the risk factor, stability under converging policies, and
//! a Monte Carlo cross-check.

pub mod checks;
pub mod curve;
pub mod oracle;
pub mod simulate;
pub mod stability;

pub use curve::{gain_curve, parse_gamma_grid, GainCurve, GainPoint};
pub use oracle::{finite_horizon_average, finite_horizon_risk, hoeffding_gap, HoeffdingGap};
pub use simulate::{simulate, SimulationResult};
pub use stability::{shift_params, stability_trace, StabilityEntry, StabilityTrace};
