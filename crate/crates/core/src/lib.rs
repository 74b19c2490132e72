//! Markov mobility models for AIS vessel traffic on a hexagonal grid.
//!
//! The pipeline turns raw AIS position reports into discrete-time Markov
//! models per vessel category and time window: records are validated and
//! partitioned, trajectories are segmented and resampled at a fixed
//! cadence, positions are discretized into flat-top hexagonal cells, and
//! transition/dwell statistics are fitted into transition matrices, hazard
//! rates, and stationary distributions. Local metrics (mobility magnitude,
//! dwell-time magnitude, betweenness) and global metrics (average path
//! length, modularity over detected communities) are exported as map-ready
//! GeoJSON and report-ready JSON/CSV artifacts.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod hexgrid;
pub mod ingest;
pub mod markov;
pub mod metrics;
pub mod pipeline;
pub mod synthgen;
pub mod trajectory;

pub use error::{Error, Result};
