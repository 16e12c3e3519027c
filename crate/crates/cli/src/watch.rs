//! Debounced source-directory watching.

use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Duration;

use crosscut::session::{CONFIG_FILE, SOURCE_EXTENSION};
use notify::RecursiveMode;
use notify_debouncer_mini::{new_debouncer, DebounceEventResult, Debouncer};

pub const DEBOUNCE: Duration = Duration::from_millis(150);

fn relevant(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == SOURCE_EXTENSION) || path.file_name().is_some_and(|n| n == CONFIG_FILE)
}

/// Watches `root` recursively. Each debounced batch touching sources or the
/// config file is delivered as one message. Dropping the returned handle
/// stops watching.
pub fn watch(root: &Path) -> notify::Result<(Debouncer<notify::RecommendedWatcher>, mpsc::Receiver<Vec<PathBuf>>)> {
    let (tx, rx) = mpsc::channel();
    let mut debouncer = new_debouncer(DEBOUNCE, move |result: DebounceEventResult| {
        if let Ok(events) = result {
            let paths: Vec<PathBuf> = events.into_iter().map(|e| e.path).filter(|p| relevant(p)).collect();
            if !paths.is_empty() {
                let _ = tx.send(paths);
            }
        }
    })?;
    debouncer.watcher().watch(root, RecursiveMode::Recursive)?;
    Ok((debouncer, rx))
}
