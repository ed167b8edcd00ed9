//! Planning and simulation for dirt-aware multi-robot floor cleaning.
//!
//! The pipeline estimates per-cell dirt levels from cleaning-pass logs
//! ([`grid`]), splits the free space into dirt-balanced connected regions
//! ([`partition`]), orders each region into a route with dirt-dependent dwell
//! times ([`route`]), and simulates the team against a single-robot sweep
//! ([`sim`]). [`pipeline`] and [`render`] tie it together for the CLI.

pub mod config;
pub mod error;
pub mod grid;
pub mod partition;
pub mod pipeline;
pub mod render;
pub mod route;
pub mod scalar;
pub mod sim;

pub use error::{Error, Result};
pub use grid::{Coord, GridMap, Occupancy};
pub use partition::Flag;
pub use scalar::Scalar;

pub type CellHistoryF64 = grid::CellHistory<f64>;
pub type DirtMapF64 = grid::DirtMap<f64>;
pub type PartitionF64 = partition::Partition<f64>;
pub type RegionF64 = partition::Region<f64>;

pub type CellHistoryF32 = grid::CellHistory<f32>;
pub type DirtMapF32 = grid::DirtMap<f32>;
pub type PartitionF32 = partition::Partition<f32>;
