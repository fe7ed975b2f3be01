//! The three dataset classes consumed by the model engines: count series,
//! continuous-space point patterns, and SIR event histories.

mod counts;
mod history;
mod pattern;

pub use counts::{validate_counts, CountSeries, NeighbourhoodInput, PopulationInput};
pub use history::{
    build_event_history, household_basis, step_distance_basis, DistanceBasis, EventHistory,
    Individual, PairCovariate,
};
pub use pattern::{
    aggregate_to_counts, build_point_pattern, untie, update_ranges, Event, EventRecord,
    PointPattern, StGrid, StGridRow,
};
