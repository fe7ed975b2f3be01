//! One-step-ahead prediction, proper scoring rules, PIT calibration,
//! permutation tests, and the shared residual-process diagnostic.

mod osa;
mod permutation;
mod pit;
mod residuals;
mod scores;

pub use osa::{one_step_ahead, OsaType, PredictiveDistribution};
pub use permutation::{permutation_test, PermutationOutcome};
pub use pit::pit_histogram;
pub use residuals::{residual_transform, ResidualDiagnostics};
pub use scores::{score_predictions, ScoreKind};
