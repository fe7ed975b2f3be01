//! Forward simulation for all three model classes with seeded, reproducible
//! random number streams.

mod hhh4;
mod kernel_loc;
mod rng;
mod twinsir;
mod twinstim;

pub use hhh4::simulate_hhh4;
pub use kernel_loc::sample_kernel_location;
pub use rng::replicate_rng;
pub use twinsir::simulate_twinsir;
pub use twinstim::{simulate_twinstim, SimulatedEvent, SimulatedPattern, TwinstimSimConfig};
