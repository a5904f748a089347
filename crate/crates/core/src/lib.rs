//! Stable topic maps for live text streams.
//!
//! Each tick turns a window of short messages into a map: similar messages
//! are linked, linked groups are clustered and laid out, layouts are kept
//! steady across ticks, components are packed on a grid, and clusters are
//! drawn as countries.

pub mod clustering;
pub mod geom;
pub mod ingest;
pub mod layout;
pub mod mapgen;
pub mod packing;
pub mod pipeline;
pub mod semantics;
pub mod stability;

pub use geom::Point;
pub use ingest::{Message, Query, Window};
pub use mapgen::MapFrame;
pub use pipeline::{tick, Pipeline, PipelineConfig, PipelineState, Resources, TickReport};
