use std::collections::BTreeSet;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::snapshot::{snapshot, ValueSnapshot};
use crate::annotations::Example;
use crate::lang::ast::{MethodId, Node, NodeId, NodeKind};
use crate::lang::eval::{Abort, Env, ExitKind, Hooks, Interpreter, Limits, NoHooks, RuntimeError, Unwind};
use crate::lang::program::SourceProgram;
use crate::lang::value::{Function, Value};

pub const DEFAULT_EVENT_CAP: usize = 1_000_000;

/// Modules whose invocations are recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceScope {
    pub included_modules: BTreeSet<String>,
    pub always_trace_examples: bool,
}

impl TraceScope {
    pub fn new<I, S>(modules: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        TraceScope {
            included_modules: modules.into_iter().map(Into::into).collect(),
            always_trace_examples: true,
        }
    }

    /// Every module of the program.
    pub fn all(program: &SourceProgram) -> Self {
        TraceScope::new(program.module_paths())
    }

    pub fn includes(&self, module: &str) -> bool {
        self.included_modules.contains(module)
    }

    /// The scope as used for running an example from `module`: the
    /// example's own module is always traced.
    pub fn for_example(&self, module: &str) -> TraceScope {
        let mut scope = self.clone();
        scope.included_modules.insert(module.to_string());
        scope
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Global, 1-based, `events[i].seq == i + 1`.
    pub seq: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum EventKind {
    Enter {
        frame: u64,
        /// None for the example root (frame 0).
        parent: Option<u64>,
        method: MethodId,
        /// Node id of the call expression; None for the example root.
        site: Option<NodeId>,
        args: Vec<ValueSnapshot>,
    },
    Exit {
        frame: u64,
        kind: ExitKind,
        result: ValueSnapshot,
    },
    Probe {
        probe: String,
        frame: u64,
        value: ValueSnapshot,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum TraceStatus {
    Completed,
    Failed { error: RuntimeError },
    Overflowed,
}

impl TraceStatus {
    pub fn label(&self) -> &'static str {
        match self {
            TraceStatus::Completed => "completed",
            TraceStatus::Failed { .. } => "failed",
            TraceStatus::Overflowed => "overflowed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub run_id: String,
    pub example_id: String,
    pub scope: TraceScope,
    pub events: Vec<TraceEvent>,
    pub status: TraceStatus,
    pub base_duration_ms: Option<f64>,
    pub traced_duration_ms: f64,
    /// Lines printed by the example (body only).
    pub output: Vec<String>,
}

impl Trace {
    /// Result of the example body when it completed normally.
    pub fn result(&self) -> Option<&ValueSnapshot> {
        match self.events.last().map(|e| &e.kind) {
            Some(EventKind::Exit {
                frame: 0,
                kind: ExitKind::Normal,
                result,
            }) => Some(result),
            _ => None,
        }
    }

    pub fn probe_hit_count(&self) -> usize {
        self.events
            .iter()
            .filter(|e| matches!(e.kind, EventKind::Probe { .. }))
            .count()
    }
}

static RUN_COUNTER: AtomicU64 = AtomicU64::new(1);

pub fn next_run_id() -> String {
    format!("run-{}", RUN_COUNTER.fetch_add(1, Ordering::Relaxed))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    pub event_cap: usize,
    pub limits: Limits,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            event_cap: DEFAULT_EVENT_CAP,
            limits: Limits::default(),
        }
    }
}

/// Instrumentation hook that turns interpreter callbacks into events.
struct Recorder<'p, 's> {
    program: &'p SourceProgram,
    scope: &'s TraceScope,
    events: Vec<TraceEvent>,
    cap: usize,
    /// Open traced frames, innermost last.
    frames: Vec<u64>,
    /// One entry per open call: was it traced?
    calls: Vec<bool>,
    /// Number of open calls inside an unscoped subtree.
    suppressed: usize,
    next_frame: u64,
    active: bool,
    overflowed: bool,
}

impl<'p, 's> Recorder<'p, 's> {
    fn push(&mut self, kind: EventKind) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(TraceEvent { seq, kind });
    }

    /// Room for `extra` new events plus one exit per open frame.
    fn has_room(&mut self, extra: usize) -> bool {
        if self.events.len() + extra + self.frames.len() <= self.cap {
            true
        } else {
            self.overflowed = true;
            false
        }
    }

    fn enter_root(&mut self, method: MethodId) -> Result<(), Abort> {
        if !self.has_room(2) {
            return Err(Abort);
        }
        self.push(EventKind::Enter {
            frame: 0,
            parent: None,
            method,
            site: None,
            args: Vec::new(),
        });
        self.frames.push(0);
        self.next_frame = 1;
        Ok(())
    }

    fn exit_root(&mut self, kind: ExitKind, result: ValueSnapshot) {
        if let Some(frame) = self.frames.pop() {
            self.push(EventKind::Exit { frame, kind, result });
        }
    }
}

impl<'p> Hooks<'p> for Recorder<'p, '_> {
    fn call_enter(&mut self, callee: &Function<'p>, site: &'p Node, args: &[Value<'p>]) -> Result<(), Abort> {
        if !self.active {
            return Ok(());
        }
        if self.suppressed > 0 {
            self.suppressed += 1;
            self.calls.push(false);
            return Ok(());
        }
        let method = match callee {
            Function::Named { id, .. } => (*id).clone(),
            Function::Lambda { env, .. } => MethodId::lambda(env.module()),
            Function::Builtin(_) => unreachable!("builtins are not instrumented"),
        };
        if !self.scope.includes(&method.module) {
            self.suppressed = 1;
            self.calls.push(false);
            return Ok(());
        }
        if !self.has_room(2) {
            return Err(Abort);
        }
        let frame = self.next_frame;
        self.next_frame += 1;
        let parent = self.frames.last().copied();
        self.push(EventKind::Enter {
            frame,
            parent,
            method,
            site: Some(site.id),
            args: args.iter().map(snapshot).collect(),
        });
        self.frames.push(frame);
        self.calls.push(true);
        Ok(())
    }

    fn call_exit(&mut self, kind: ExitKind, value: &Value<'p>) {
        if !self.active {
            return;
        }
        match self.calls.pop() {
            Some(true) => {
                let frame = self.frames.pop().expect("traced call has an open frame");
                self.push(EventKind::Exit {
                    frame,
                    kind,
                    result: snapshot(value),
                });
            }
            Some(false) => self.suppressed -= 1,
            None => unreachable!("exit without enter"),
        }
    }

    fn probe_hit(&mut self, probe: &'p Node, value: &Value<'p>) -> Result<(), Abort> {
        if !self.active {
            return Ok(());
        }
        if !self.has_room(1) {
            return Err(Abort);
        }
        let probe = self
            .program
            .probe_id(probe.id)
            .map(|p| p.to_string())
            .unwrap_or_else(|| crate::lang::program::probe_id_for(probe));
        let frame = *self.frames.last().expect("root frame is open while tracing");
        self.push(EventKind::Probe {
            probe,
            frame,
            value: snapshot(value),
        });
        Ok(())
    }
}

fn example_parts<'p>(
    program: &'p SourceProgram,
    example: &Example,
) -> Option<(&'p str, Option<&'p Node>, &'p Node, Option<&'p Node>)> {
    let decl = example.decl(program)?;
    let NodeKind::ExampleDecl {
        setup,
        body,
        teardown,
        ..
    } = &decl.kind
    else {
        return None;
    };
    let module = crate::lang::eval::module_of(program, decl);
    Some((module, setup.as_deref(), body, teardown.as_deref()))
}

fn missing_example(example: &Example) -> RuntimeError {
    RuntimeError {
        kind: crate::lang::eval::ErrorKind::UndefinedName,
        span: crate::lang::ast::SpanDto {
            module_path: example.module_path.clone(),
            start_line: 1,
            start_col: 1,
            end_line: 1,
            end_col: 1,
        },
        message: format!("example `{}` is not declared in the program", example.example_id),
        value: None,
    }
}

/// Runs an example under instrumentation.
///
/// Setup and teardown run untraced. The body runs inside the synthetic root
/// frame 0. The returned event list is always well bracketed.
pub fn trace_run(program: &SourceProgram, example: &Example, scope: &TraceScope) -> Trace {
    trace_run_with(program, example, scope, TraceOptions::default())
}

pub fn trace_run_with(program: &SourceProgram, example: &Example, scope: &TraceScope, options: TraceOptions) -> Trace {
    let scope = scope.for_example(&example.module_path);
    let mut trace = Trace {
        run_id: next_run_id(),
        example_id: example.example_id.clone(),
        scope: scope.clone(),
        events: Vec::new(),
        status: TraceStatus::Completed,
        base_duration_ms: None,
        traced_duration_ms: 0.0,
        output: Vec::new(),
    };
    let Some((module, setup, body, teardown)) = example_parts(program, example) else {
        trace.status = TraceStatus::Failed {
            error: missing_example(example),
        };
        return trace;
    };
    let recorder = Recorder {
        program,
        scope: &scope,
        events: Vec::new(),
        cap: options.event_cap.max(2),
        frames: Vec::new(),
        calls: Vec::new(),
        suppressed: 0,
        next_frame: 0,
        active: false,
        overflowed: false,
    };
    let mut interp = Interpreter::with_limits(program, recorder, options.limits);
    let env = Env::root(module);

    if let Some(setup) = setup {
        if let Err(unwind) = interp.run_block_in(setup, &env) {
            trace.status = failure(unwind);
            return trace;
        }
    }

    let started = Instant::now();
    interp.hooks_mut().active = true;
    let body_outcome = match interp.hooks_mut().enter_root(example.root_method()) {
        Ok(()) => interp.run_block_in(body, &env),
        Err(Abort) => Err(Unwind::Abort),
    };
    let output_len = interp.output().len();
    match &body_outcome {
        Ok(v) => interp.hooks_mut().exit_root(ExitKind::Normal, snapshot(v)),
        Err(unwind) => {
            let v = snapshot(&unwind.exit_value());
            interp.hooks_mut().exit_root(ExitKind::Exception, v)
        }
    }
    interp.hooks_mut().active = false;
    trace.traced_duration_ms = started.elapsed().as_secs_f64() * 1e3;
    trace.output = interp.output()[..output_len].to_vec();

    let overflowed = interp.hooks().overflowed;
    trace.status = match body_outcome {
        Ok(_) => TraceStatus::Completed,
        Err(_) if overflowed => TraceStatus::Overflowed,
        Err(unwind) => failure(unwind),
    };
    if trace.status == TraceStatus::Completed {
        if let Some(teardown) = teardown {
            if let Err(unwind) = interp.run_block_in(teardown, &env) {
                trace.status = failure(unwind);
            }
        }
    }
    trace.events = interp.into_hooks().events;
    trace
}

fn failure(unwind: Unwind) -> TraceStatus {
    match unwind.into_error() {
        Some(error) => TraceStatus::Failed { error },
        None => TraceStatus::Overflowed,
    }
}

/// Outcome of running an example without instrumentation.
#[derive(Debug, Clone, PartialEq)]
pub struct UntracedOutcome {
    pub result: Result<ValueSnapshot, RuntimeError>,
    pub output: Vec<String>,
    pub duration_ms: f64,
}

/// Runs setup, body and teardown without instrumentation. The result is the
/// body's value (or the first error).
pub fn run_untraced(program: &SourceProgram, example: &Example, limits: Limits) -> UntracedOutcome {
    let Some((module, setup, body, teardown)) = example_parts(program, example) else {
        return UntracedOutcome {
            result: Err(missing_example(example)),
            output: Vec::new(),
            duration_ms: 0.0,
        };
    };
    let mut interp = Interpreter::with_limits(program, NoHooks, limits);
    let env: Rc<Env> = Env::root(module);
    let err = |u: Unwind| u.into_error().expect("untraced evaluation never aborts");
    if let Some(setup) = setup {
        if let Err(u) = interp.run_block_in(setup, &env) {
            return UntracedOutcome {
                result: Err(err(u)),
                output: Vec::new(),
                duration_ms: 0.0,
            };
        }
    }
    let started = Instant::now();
    let body_result = interp.run_block_in(body, &env).map(|v| snapshot(&v));
    let duration_ms = started.elapsed().as_secs_f64() * 1e3;
    let output = interp.output().to_vec();
    let mut result = body_result.map_err(err);
    if result.is_ok() {
        if let Some(teardown) = teardown {
            if let Err(u) = interp.run_block_in(teardown, &env) {
                result = Err(err(u));
            }
        }
    }
    UntracedOutcome {
        result,
        output,
        duration_ms,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Overhead {
    pub base_ms: f64,
    pub traced_ms: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OverheadError {
    #[error("untraced run took {base_ms:.4} ms, below the 0.1 ms timing floor")]
    Unmeasurable { base_ms: f64 },
    #[error("example did not complete untraced: {0}")]
    NotCompleted(RuntimeError),
}

pub const OVERHEAD_RUNS: usize = 5;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let mid = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        (xs[mid - 1] + xs[mid]) / 2.0
    } else {
        xs[mid]
    }
}

/// Median untraced and traced body durations over [`OVERHEAD_RUNS`] runs
/// each, with the full program in scope.
pub fn measure_overhead(program: &SourceProgram, example: &Example) -> Result<Overhead, OverheadError> {
    let scope = TraceScope::all(program);
    let mut base = Vec::with_capacity(OVERHEAD_RUNS);
    let mut traced = Vec::with_capacity(OVERHEAD_RUNS);
    for _ in 0..OVERHEAD_RUNS {
        let outcome = run_untraced(program, example, Limits::default());
        if let Err(e) = outcome.result {
            return Err(OverheadError::NotCompleted(e));
        }
        base.push(outcome.duration_ms);
        traced.push(trace_run(program, example, &scope).traced_duration_ms);
    }
    let base_ms = median(base);
    if base_ms < 0.1 {
        return Err(OverheadError::Unmeasurable { base_ms });
    }
    let traced_ms = median(traced);
    Ok(Overhead {
        base_ms,
        traced_ms,
        factor: traced_ms / base_ms,
    })
}

/// A violation of the event-stream invariants.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event {seq}: {reason}")]
pub struct BracketError {
    pub seq: u64,
    pub reason: String,
}

/// Checks sequence numbering, enter/exit nesting, frame-id order, and that
/// every probe hit names an open frame. An empty stream is valid (a run
/// whose setup failed).
pub fn check_bracketing(events: &[TraceEvent]) -> Result<(), BracketError> {
    let mut stack: Vec<u64> = Vec::new();
    let mut last_frame: Option<u64> = None;
    let mut root_closed = false;
    for (i, event) in events.iter().enumerate() {
        let fail = |reason: String| BracketError {
            seq: event.seq,
            reason,
        };
        if event.seq != i as u64 + 1 {
            return Err(fail(format!("expected seq {}", i + 1)));
        }
        if root_closed {
            return Err(fail("event after the root frame exited".to_string()));
        }
        match &event.kind {
            EventKind::Enter { frame, parent, .. } => {
                if i == 0 {
                    if *frame != 0 || parent.is_some() {
                        return Err(fail("first event must enter root frame 0 without parent".to_string()));
                    }
                } else {
                    if last_frame.is_some_and(|last| *frame <= last) {
                        return Err(fail(format!("frame {frame} entered out of order")));
                    }
                    if *parent != stack.last().copied() {
                        return Err(fail(format!(
                            "frame {frame} names parent {parent:?}, but the open frame is {:?}",
                            stack.last()
                        )));
                    }
                }
                last_frame = Some(*frame);
                stack.push(*frame);
            }
            EventKind::Exit { frame, .. } => match stack.pop() {
                Some(top) if top == *frame => root_closed = stack.is_empty(),
                Some(top) => return Err(fail(format!("exit of frame {frame} while frame {top} is open"))),
                None => return Err(fail(format!("exit of frame {frame} with no open frame"))),
            },
            EventKind::Probe { frame, .. } => {
                if i == 0 {
                    return Err(fail("first event must enter root frame 0".to_string()));
                }
                if !stack.contains(frame) {
                    return Err(fail(format!("probe hit in frame {frame}, which is not open")));
                }
            }
        }
    }
    if let Some(open) = stack.last() {
        return Err(BracketError {
            seq: events.len() as u64,
            reason: format!("trace ends with frame {open} still open"),
        });
    }
    Ok(())
}
