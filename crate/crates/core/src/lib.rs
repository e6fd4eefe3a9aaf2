//! Trace-driven simulation of software-only wear-leveling for non-volatile
//! main memory.
//!
//! A [`Trace`] of line-granular writes is replayed through a modeled page
//! table. Along the way a sampler approximates the per-frame write
//! distribution, a coarse leveler swaps hot pages onto the least-aged frames,
//! and a fine leveler slides the stack circularly through a shadow-aliased
//! region. Ground-truth per-line wear is kept for every physical line and
//! condensed into endurance metrics.
//!
//! The metric math is generic over the floating point type (see [`Scalar`]);
//! the aliases at the crate root fix it to `f64`.

pub mod coarse;
pub mod config;
pub mod engine;
mod error;
pub mod memspace;
pub mod metrics;
pub mod sampler;
pub mod stack;
pub mod trace;

pub use crate::config::SimConfig;
pub use crate::engine::{paired_run, replay, PairedRun, RunResult};
pub use crate::error::{Error, Result};
pub use crate::memspace::{MemorySpace, PageTable, WearMap};
pub use crate::trace::{MemoryLayout, Segment, SegmentKind, Trace, TraceEvent, WriteEvent};

use std::fmt::{Debug, Display};

use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the endurance metrics are computed in.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Endurance metrics in double precision.
pub type Metrics = metrics::EnduranceMetrics<f64>;
/// Metrics report in double precision.
pub type MetricsReport = metrics::MetricsReport<f64>;
/// Per-segment summary in double precision.
pub type SegmentSummary = metrics::SegmentSummary<f64>;

/// Bytes per physical line.
pub const LINE_SIZE: u64 = 64;
/// Bytes per page / frame.
pub const PAGE_SIZE: u64 = 4096;
/// Lowest address any segment may occupy.
pub const MIN_SEGMENT_ADDR: u64 = 1 << 32;
