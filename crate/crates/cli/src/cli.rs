//! Command-line interface.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::PathBuf;

use clap::{ArgGroup, Parser, Subcommand};
use crosscut::api::{self, ApiError, TreeQuery};
use crosscut::session::{with_run_stack, Session};
use crosscut::tracer::jsonl;
use serde_json::Value;

use crate::render;
use crate::server::{self, AppState};

pub const DEFAULT_PORT: u16 = 7878;
pub const PORT_ENV: &str = "CROSSCUT_PORT";

#[derive(Debug, Parser)]
#[command(name = "crosscut", version, about = "Example-based live programming with cross-cutting trace views")]
pub struct Cli {
    /// Project root containing the .cc sources.
    #[arg(long, global = true, default_value = ".")]
    pub root: PathBuf,
    /// Print the api JSON instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run an example and print its probe log.
    Run { example: String },
    /// Print the call tree of an example.
    Tree {
        example: String,
        #[arg(long)]
        filter: Option<String>,
        /// Show only the root.
        #[arg(long)]
        collapsed: bool,
    },
    /// Paths from the root to a probe's hits or a method's invocations.
    #[command(group(ArgGroup::new("target").required(true).args(["probe", "method"])))]
    Paths {
        example: String,
        #[arg(long)]
        probe: Option<String>,
        /// MODULE/NAME, e.g. m.cc/g
        #[arg(long)]
        method: Option<String>,
        #[arg(long, conflicts_with = "detailed")]
        summarized: bool,
        #[arg(long)]
        detailed: bool,
    },
    /// Re-run active examples whenever sources change.
    Watch {
        /// Stop after this many reloads.
        #[arg(long, hide = true)]
        exit_after: Option<usize>,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        /// Serve an exported trace instead of a project.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Write an example's trace as JSON lines.
    Export {
        example: String,
        #[arg(short = 'o', long = "output")]
        output: PathBuf,
    },
    /// Load an exported trace and print its tree.
    Import { file: PathBuf },
}

/// Outcome of a command: exit code 0, 1 or 2.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match with_run_stack(|| execute(&cli)) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(Failure::Usage(message)) => {
            eprintln!("error: {message}");
            2
        }
        Err(Failure::Api(e)) => {
            if cli.json {
                println!("{}", e.to_json());
            }
            eprintln!("error: {}: {}", e.code, e.message);
            1
        }
    }
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Api(ApiError),
}

impl<E: Into<ApiError>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Api(e.into())
    }
}

fn open(cli: &Cli) -> Result<Session, Failure> {
    Ok(Session::open(&cli.root)?)
}

fn run_example(session: &mut Session, example: &str) -> Result<String, Failure> {
    let summary = api::run_example(session, example)?;
    Ok(summary["run_id"].as_str().unwrap_or_default().to_string())
}

fn json_text(v: &Value) -> String {
    format!("{}\n", serde_json::to_string_pretty(v).expect("json values serialize"))
}

/// Runs a command. `serve` and `watch` return only when they stop.
pub fn execute(cli: &Cli) -> Result<String, Failure> {
    match &cli.command {
        Command::Run { example } => {
            let mut session = open(cli)?;
            let run_id = run_example(&mut session, example)?;
            let run = api::run_summary(&session, api::lookup_run(&session, &run_id)?);
            let log = api::probe_log(&session, &run_id)?;
            Ok(if cli.json {
                json_text(&serde_json::json!({ "run": run, "probe_log": log }))
            } else {
                render::probe_log(&run, &log)
            })
        }
        Command::Tree {
            example,
            filter,
            collapsed,
        } => {
            let mut session = open(cli)?;
            let run_id = run_example(&mut session, example)?;
            let query = TreeQuery {
                depth: collapsed.then_some(0),
                children_of: None,
                filter: filter.clone(),
            };
            let doc = api::tree(&session, &run_id, &query)?;
            Ok(if cli.json { json_text(&doc) } else { render::tree(&doc) })
        }
        Command::Paths {
            example,
            probe,
            method,
            detailed,
            ..
        } => {
            let mut session = open(cli)?;
            let run_id = run_example(&mut session, example)?;
            let target = match (probe, method) {
                (Some(p), _) => format!("probe:{p}"),
                (_, Some(m)) => format!("method:{m}"),
                _ => return Err(Failure::Usage("one of --probe or --method is required".into())),
            };
            let mode = if *detailed { "detailed" } else { "summarized" };
            let doc = api::paths(&session, &run_id, &target, mode)?;
            Ok(if cli.json { json_text(&doc) } else { render::paths(&doc) })
        }
        Command::Export { example, output } => {
            let mut session = open(cli)?;
            let run_id = run_example(&mut session, example)?;
            let run = api::lookup_run(&session, &run_id)?;
            let file = File::create(output).map_err(|e| ApiError::new("io-error", format!("{}: {e}", output.display())))?;
            jsonl::write_trace(&run.trace, BufWriter::new(file))
                .map_err(|e| ApiError::new("io-error", e.to_string()))?;
            Ok(format!("{} events written to {}\n", run.trace.events.len(), output.display()))
        }
        Command::Import { file } => {
            let session = import(file)?;
            let run_id = session.runs().next().expect("imported session has one run").run_id.clone();
            let doc = api::tree(&session, &run_id, &TreeQuery::default())?;
            Ok(if cli.json { json_text(&doc) } else { render::tree(&doc) })
        }
        Command::Watch { exit_after } => watch(cli, *exit_after).map(|()| String::new()),
        Command::Serve { port, import: file } => {
            let port = port_override(*port)?;
            let session = match file {
                Some(f) => import(f)?,
                None => open(cli)?,
            };
            serve(session, port).map(|()| String::new())
        }
    }
}

fn import(path: &PathBuf) -> Result<Session, Failure> {
    let file = File::open(path).map_err(|e| ApiError::new("io-error", format!("{}: {e}", path.display())))?;
    let trace = jsonl::read_trace(BufReader::new(file))?;
    Ok(Session::imported(trace)?)
}

fn port_override(port: u16) -> Result<u16, Failure> {
    match std::env::var(PORT_ENV) {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Failure::Usage(format!("{PORT_ENV}={raw} is not a port number"))),
        Err(_) => Ok(port),
    }
}

fn serve(mut session: Session, port: u16) -> Result<(), Failure> {
    if session.root_dir().is_some() {
        session.run_all_active();
    }
    let watched = session.root_dir().map(|p| p.to_path_buf());
    let state = AppState::new(session);
    let _watcher = match watched {
        Some(root) => {
            let (watcher, rx) = crate::watch::watch(&root).map_err(|e| ApiError::new("io-error", e.to_string()))?;
            let state = state.clone();
            std::thread::spawn(move || {
                for _ in rx {
                    let _ = state.reload();
                }
            });
            Some(watcher)
        }
        None => None,
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .thread_stack_size(crosscut::session::RUN_STACK_SIZE / 8)
        .build()
        .map_err(|e| ApiError::new("io-error", e.to_string()))?;
    Ok(runtime.block_on(server::serve(state, port))?)
}

fn watch(cli: &Cli, exit_after: Option<usize>) -> Result<(), Failure> {
    let mut session = open(cli)?;
    let (_watcher, rx) = crate::watch::watch(&cli.root).map_err(|e| ApiError::new("io-error", e.to_string()))?;
    let ids = session.run_all_active();
    report(&session, ids);
    let mut reloads = 0;
    while exit_after.is_none_or(|n| reloads < n) {
        let Ok(paths) = rx.recv() else { break };
        reloads += 1;
        let names: Vec<String> = paths.iter().map(|p| p.display().to_string()).collect();
        println!("-- change: {}", names.join(", "));
        match session.notify_change(paths.first().map(PathBuf::as_path)) {
            Ok(ids) => report(&session, ids),
            Err(e) => {
                let e = ApiError::from(e);
                println!("error: {}: {}", e.code, e.message);
            }
        }
    }
    Ok(())
}

fn report(session: &Session, run_ids: Vec<String>) {
    println!("generation {}: {} example(s) run", session.generation(), run_ids.len());
    for id in run_ids {
        let (Ok(run), Ok(log)) = (api::lookup_run(session, &id), api::probe_log(session, &id)) else {
            continue;
        };
        print!("{}", render::probe_log(&api::run_summary(session, run), &log));
    }
}
