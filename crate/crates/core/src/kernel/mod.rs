//! Transition-system kernel: configurations, atomic steps, scheduling,
//! digests and traces.

pub mod choice;
pub mod config;
pub mod digest;
pub mod message;
pub mod sched;
pub mod step;
pub mod trace;

pub use choice::{Action, ScheduleChoice};
pub use config::{neighbor_slot, slot_process, Channel, Configuration, Layer, ProcessState, Setup, Stack};
pub use digest::{digest, Digest};
pub use message::{Ghost, Message, Origin, Payload, Request, Wire};
pub use sched::{run, run_observed, Observer, Policy, PolicySpec, RandomFair, RoundRobin, RunOptions, RunOutcome, Scripted, StepView, StopRule};
pub use step::{apply_step, enabled_choices, execute, is_admissible, is_quiescent};
pub use trace::{Event, RunEnd, Trace, TraceRecord};
