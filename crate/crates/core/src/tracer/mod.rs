//! Instrumented example execution producing exact call traces.

pub mod jsonl;
pub mod snapshot;
mod trace;

pub use snapshot::{snapshot, ValueSnapshot};
pub use trace::{
    check_bracketing, measure_overhead, next_run_id, run_untraced, trace_run, trace_run_with, BracketError,
    EventKind, Overhead, OverheadError, Trace, TraceEvent, TraceOptions, TraceScope, TraceStatus, UntracedOutcome,
    DEFAULT_EVENT_CAP, OVERHEAD_RUNS,
};
