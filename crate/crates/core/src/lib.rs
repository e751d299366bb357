//! Geometry-based stochastic channel simulator for massive MIMO.
//!
//! Extends a Winner-type cluster model in three directions:
//!
//! * **multi-user consistency**: users whose auras overlap share a number of
//!   clusters that grows as they get closer ([`grouping`], [`sharing`]);
//! * **non-stationarity across the array**: the base-station array is cut
//!   into sub-arrays, each with its own departure angles ([`layout`],
//!   [`clustergen`]);
//! * **spherical wavefronts**: clusters get focal points on both link ends
//!   and phases follow exact element-to-scatterer distances ([`spherical`],
//!   [`coefficients`]).
//!
//! [`pipeline::run`] drives the whole chain from a [`config::RunConfig`].

pub mod clustergen;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod export;
pub mod geometry;
pub mod grouping;
pub mod layout;
pub mod lsp;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod sharing;
pub mod spherical;
pub mod tensor_file;

pub use error::{GscmError, Result};
pub use geometry::{Position, SPEED_OF_LIGHT};
