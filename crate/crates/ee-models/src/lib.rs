//! Endemic-epidemic models for infectious disease spread.
//!
//! Three model classes share the additive decomposition of disease risk into
//! an endemic background component and an observation-driven epidemic
//! component:
//!
//! * [`twinstim`] — self-exciting point processes for geo-referenced events in
//!   continuous space-time,
//! * [`twinsir`] — additive-intensity SIR processes on the event history of a
//!   fixed population,
//! * [`hhh4`] — multivariate time series of counts aggregated by region and
//!   period.
//!
//! Supporting modules provide the dataset classes ([`data`]), polygon
//! arithmetic and cubature ([`geometry`]), interaction kernels ([`kernels`]),
//! forward simulation ([`sim`]), and predictive scoring ([`forecast`]).
//! File ingestion and the command-line front end live in [`io`] and the
//! `ee-models` binary.

pub mod data;
pub mod error;
pub mod forecast;
pub mod geometry;
pub mod hhh4;
pub mod io;
pub mod kernels;
pub mod optim;
pub mod prob;
pub mod sim;
pub mod twinsir;
pub mod twinstim;

pub use error::{Error, Result};
