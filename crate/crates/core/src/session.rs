//! A live project: sources on disk, extracted annotations, and the latest
//! traced run of every active example.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Deserialize;

use crate::analysis::{build_call_tree, CallTree, MalformedTrace};
use crate::annotations::{extract_annotations, AnnotationError, Example, Probe};
use crate::lang::program::SourceProgram;
use crate::lang::ParseError;
use crate::tracer::{trace_run_with, Trace, TraceOptions, TraceScope};

pub const CONFIG_FILE: &str = "crosscut.toml";
pub const SOURCE_EXTENSION: &str = "cc";
/// Stack size for threads running examples; deep recursion in the
/// tree-walking evaluator needs far more than the default.
pub const RUN_STACK_SIZE: usize = 512 * 1024 * 1024;

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("no .cc sources under {0}")]
    NoSources(PathBuf),
    #[error("unknown example `{0}`")]
    UnknownExample(String),
    #[error("example `{0}` is inactive")]
    ExampleInactive(String),
    #[error("unknown module `{0}`")]
    UnknownModule(String),
    #[error("scope must include module `{0}`, which declares an active example")]
    ScopeExcludesExample(String),
    #[error("{} module(s) failed to parse; runs kept but marked stale", .0.len())]
    Parse(Vec<ParseError>),
    #[error("invalid {CONFIG_FILE}: {0}")]
    Config(String),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Malformed(#[from] MalformedTrace),
    #[error("the session was imported from a trace and has no sources")]
    AnalysisOnly,
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Contents of `crosscut.toml`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub scope: Option<Vec<String>>,
    pub event_cap: Option<usize>,
    pub active: Option<Vec<String>>,
}

impl SessionConfig {
    pub fn parse(text: &str) -> Result<Self, SessionError> {
        toml::from_str(text).map_err(|e| SessionError::Config(e.to_string()))
    }
}

/// One published run. Immutable once stored.
#[derive(Debug)]
pub struct Run {
    pub run_id: String,
    pub example_id: String,
    pub generation: u64,
    pub trace: Trace,
    pub tree: CallTree,
    /// Set when sources changed but could not be re-run (parse errors).
    pub stale: bool,
}

#[derive(Debug)]
pub struct Session {
    root_dir: Option<PathBuf>,
    program: Arc<SourceProgram>,
    examples: Vec<Example>,
    probes: Vec<Probe>,
    /// Explicitly selected scope; None means every module.
    scope_selection: Option<BTreeSet<String>>,
    inactive: BTreeSet<String>,
    texts: BTreeMap<String, String>,
    broken: BTreeMap<String, ParseError>,
    runs: BTreeMap<String, Arc<Run>>,
    generation: u64,
    options: TraceOptions,
}

struct Loaded {
    program: SourceProgram,
    texts: BTreeMap<String, String>,
    broken: BTreeMap<String, ParseError>,
}

fn collect_sources(dir: &Path, root: &Path, out: &mut Vec<(String, PathBuf)>) -> io::Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_sources(&path, root, out)?;
        } else if path.extension().is_some_and(|e| e == SOURCE_EXTENSION) {
            let rel = path.strip_prefix(root).unwrap_or(&path);
            let module = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            out.push((module, path));
        }
    }
    Ok(())
}

fn load(root: &Path) -> Result<Loaded, SessionError> {
    let mut files = Vec::new();
    collect_sources(root, root, &mut files)?;
    if files.is_empty() {
        return Err(SessionError::NoSources(root.to_path_buf()));
    }
    files.sort();
    let mut program = SourceProgram::new();
    let mut texts = BTreeMap::new();
    let mut broken = BTreeMap::new();
    for (module, path) in files {
        let text = fs::read_to_string(&path)?;
        if let Err(e) = program.add_module(&module, &text) {
            broken.insert(module.clone(), e);
        }
        texts.insert(module, text);
    }
    Ok(Loaded { program, texts, broken })
}

/// Runs `f` on a thread with a large stack and returns its result.
pub fn with_run_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .name("example-run".to_string())
            .stack_size(RUN_STACK_SIZE)
            .spawn_scoped(s, f)
            .expect("spawn example thread")
            .join()
            .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
    })
}

impl Session {
    /// Loads every `.cc` file under `root_dir`. Modules that fail to parse
    /// are recorded as broken; the session still opens.
    pub fn open(root_dir: impl AsRef<Path>) -> Result<Session, SessionError> {
        let root = root_dir.as_ref().to_path_buf();
        let config = match fs::read_to_string(root.join(CONFIG_FILE)) {
            Ok(text) => SessionConfig::parse(&text)?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => SessionConfig::default(),
            Err(e) => return Err(e.into()),
        };
        let loaded = load(&root)?;
        let (examples, probes) = extract_annotations(&loaded.program)?;
        let mut session = Session {
            root_dir: Some(root),
            program: Arc::new(loaded.program),
            examples,
            probes,
            scope_selection: None,
            inactive: BTreeSet::new(),
            texts: loaded.texts,
            broken: loaded.broken,
            runs: BTreeMap::new(),
            generation: 1,
            options: TraceOptions::default(),
        };
        if let Some(cap) = config.event_cap {
            session.options.event_cap = cap;
        }
        if let Some(active) = config.active {
            let active: BTreeSet<String> = active.into_iter().collect();
            session.inactive = session
                .examples
                .iter()
                .map(|e| e.example_id.clone())
                .filter(|id| !active.contains(id))
                .collect();
            session.apply_activation();
        }
        if let Some(scope) = config.scope {
            session.scope_selection = Some(scope.into_iter().collect());
        }
        Ok(session)
    }

    /// An analysis-only session holding one imported trace.
    pub fn imported(trace: Trace) -> Result<Session, SessionError> {
        let tree = build_call_tree(&trace)?;
        let run = Run {
            run_id: trace.run_id.clone(),
            example_id: trace.example_id.clone(),
            generation: 1,
            trace,
            tree,
            stale: false,
        };
        let mut runs = BTreeMap::new();
        runs.insert(run.example_id.clone(), Arc::new(run));
        Ok(Session {
            root_dir: None,
            program: Arc::new(SourceProgram::new()),
            examples: Vec::new(),
            probes: Vec::new(),
            scope_selection: None,
            inactive: BTreeSet::new(),
            texts: BTreeMap::new(),
            broken: BTreeMap::new(),
            runs,
            generation: 1,
            options: TraceOptions::default(),
        })
    }

    fn apply_activation(&mut self) {
        for e in &mut self.examples {
            e.active = !self.inactive.contains(&e.example_id);
        }
    }

    pub fn root_dir(&self) -> Option<&Path> {
        self.root_dir.as_deref()
    }

    pub fn program(&self) -> &SourceProgram {
        &self.program
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn probes(&self) -> &[Probe] {
        &self.probes
    }

    /// Text of a module as last read from disk, broken or not.
    pub fn source_text(&self, module: &str) -> Option<&str> {
        self.texts.get(module).map(String::as_str)
    }

    pub fn broken_modules(&self) -> &BTreeMap<String, ParseError> {
        &self.broken
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn options(&self) -> TraceOptions {
        self.options
    }

    pub fn set_options(&mut self, options: TraceOptions) {
        self.options = options;
    }

    /// The effective scope: the explicit selection, or every module.
    pub fn scope(&self) -> TraceScope {
        match &self.scope_selection {
            Some(modules) => TraceScope::new(modules.iter().cloned()),
            None => TraceScope::all(&self.program),
        }
    }

    pub fn example(&self, example_id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.example_id == example_id)
    }

    /// Latest run per example id.
    pub fn runs(&self) -> impl Iterator<Item = &Arc<Run>> {
        self.runs.values()
    }

    pub fn run_for_example(&self, example_id: &str) -> Option<&Arc<Run>> {
        self.runs.get(example_id)
    }

    pub fn run(&self, run_id: &str) -> Option<&Arc<Run>> {
        self.runs.values().find(|r| r.run_id == run_id)
    }

    fn trace_example(&self, example: &Example) -> Run {
        let program = &*self.program;
        let scope = self.scope();
        let options = self.options;
        let probes = &self.probes;
        let generation = self.generation;
        with_run_stack(move || {
            let trace = trace_run_with(program, example, &scope, options);
            let tree = build_call_tree(&trace)
                .expect("traces produced by the tracer are well bracketed")
                .with_probes(probes);
            Run {
                run_id: trace.run_id.clone(),
                example_id: example.example_id.clone(),
                generation,
                trace,
                tree,
                stale: false,
            }
        })
    }

    /// Traces one example (setup and teardown untraced) and publishes the
    /// run, replacing the previous one.
    pub fn run_example(&mut self, example_id: &str) -> Result<String, SessionError> {
        if self.root_dir.is_none() {
            return Err(SessionError::AnalysisOnly);
        }
        let example = self
            .example(example_id)
            .ok_or_else(|| SessionError::UnknownExample(example_id.to_string()))?;
        if !example.active {
            return Err(SessionError::ExampleInactive(example_id.to_string()));
        }
        let run = self.trace_example(example);
        let run_id = run.run_id.clone();
        self.runs.insert(example_id.to_string(), Arc::new(run));
        Ok(run_id)
    }

    /// Traces every active example, in parallel, and replaces the published
    /// runs in one step. Returns run ids in example order.
    pub fn run_all_active(&mut self) -> Vec<String> {
        let active: Vec<&Example> = self.examples.iter().filter(|e| e.active).collect();
        let runs: Vec<Run> = std::thread::scope(|s| {
            let handles: Vec<_> = active
                .iter()
                .map(|e| s.spawn(|| self.trace_example(e)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
                .collect()
        });
        let ids = runs.iter().map(|r| r.run_id.clone()).collect();
        self.runs = runs
            .into_iter()
            .map(|r| (r.example_id.clone(), Arc::new(r)))
            .collect();
        ids
    }

    /// Reloads all sources and re-runs every active example. On parse
    /// errors nothing is re-run; existing runs are kept and marked stale.
    pub fn notify_change(&mut self, changed_path: Option<&Path>) -> Result<Vec<String>, SessionError> {
        let _ = changed_path;
        let root = self.root_dir.clone().ok_or(SessionError::AnalysisOnly)?;
        let loaded = load(&root)?;
        self.generation += 1;
        self.texts = loaded.texts;
        if !loaded.broken.is_empty() {
            let errors = loaded.broken.values().cloned().collect();
            self.broken = loaded.broken;
            self.runs = std::mem::take(&mut self.runs)
                .into_iter()
                .map(|(id, run)| (id, mark_stale(run)))
                .collect();
            return Err(SessionError::Parse(errors));
        }
        let (examples, probes) = extract_annotations(&loaded.program)?;
        self.program = Arc::new(loaded.program);
        self.examples = examples;
        self.probes = probes;
        self.broken.clear();
        self.apply_activation();
        Ok(self.run_all_active())
    }

    /// Changes an example's activation. Activating runs it; deactivating
    /// drops its run.
    pub fn set_active(&mut self, example_id: &str, active: bool) -> Result<Option<String>, SessionError> {
        crate::annotations::set_active(&mut self.examples, example_id, active)?;
        if active {
            self.inactive.remove(example_id);
            Ok(Some(self.run_example(example_id)?))
        } else {
            self.inactive.insert(example_id.to_string());
            self.runs.remove(example_id);
            Ok(None)
        }
    }

    /// Selects the instrumented modules and re-runs all active examples.
    /// Modules declaring active examples cannot be excluded.
    pub fn set_scope<I, S>(&mut self, modules: I) -> Result<Vec<String>, SessionError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        if self.root_dir.is_none() {
            return Err(SessionError::AnalysisOnly);
        }
        let modules: BTreeSet<String> = modules.into_iter().map(Into::into).collect();
        for m in &modules {
            if !self.texts.contains_key(m) {
                return Err(SessionError::UnknownModule(m.clone()));
            }
        }
        if let Some(e) = self
            .examples
            .iter()
            .find(|e| e.active && !modules.contains(&e.module_path))
        {
            return Err(SessionError::ScopeExcludesExample(e.module_path.clone()));
        }
        self.scope_selection = Some(modules);
        Ok(self.run_all_active())
    }
}

fn mark_stale(run: Arc<Run>) -> Arc<Run> {
    if run.stale {
        return run;
    }
    let run = Arc::try_unwrap(run).unwrap_or_else(|shared| Run {
        run_id: shared.run_id.clone(),
        example_id: shared.example_id.clone(),
        generation: shared.generation,
        trace: shared.trace.clone(),
        tree: shared.tree.clone(),
        stale: true,
    });
    Arc::new(Run { stale: true, ..run })
}
