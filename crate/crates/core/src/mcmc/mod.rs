//! The Metropolis–Hastings sampler.

pub mod draw;
pub mod engine;
pub mod init;
pub mod moves;

pub use engine::{run, step, Chain, MemorySink, MoveStats, RunLength, SampleSink, TraceRecord};
pub use moves::{MoveContext, Schedule, MOVE_IDS};
