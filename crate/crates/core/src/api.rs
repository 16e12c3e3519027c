//! Transport-independent request handlers. The HTTP service and the CLI
//! both render these JSON values.

use std::collections::BTreeSet;

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::{CallTree, Direction, MalformedTrace, NodeData, NodeIdx, PathSummary, Target, TreeNode, Visibility};
use crate::annotations::AnnotationError;
use crate::lang::MethodId;
use crate::session::{Run, Session, SessionError};
use crate::tracer::jsonl::JsonlError;
use crate::tracer::TraceStatus;

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{code}: {message}")]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            code: code.to_string(),
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    /// HTTP status for this error.
    pub fn status(&self) -> u16 {
        match self.code.as_str() {
            "unknown-example" | "unknown-run" | "unknown-node" | "unknown-probe" | "unknown-module" | "not-found" => 404,
            "example-inactive" | "scope-excludes-example" | "analysis-only" => 409,
            "no-sources" | "io-error" => 500,
            _ => 400,
        }
    }

    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("api errors serialize")
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::NoSources(_) => ApiError::new("no-sources", message),
            SessionError::UnknownExample(_) | SessionError::Annotation(AnnotationError::UnknownExample(_)) => {
                ApiError::new("unknown-example", message)
            }
            SessionError::ExampleInactive(_) => ApiError::new("example-inactive", message),
            SessionError::UnknownModule(_) => ApiError::new("unknown-module", message),
            SessionError::ScopeExcludesExample(_) => ApiError::new("scope-excludes-example", message),
            SessionError::Parse(errors) => ApiError::new("parse-error", message)
                .with_detail(json!(errors.iter().map(|e| e.dto()).collect::<Vec<_>>())),
            SessionError::Config(_) => ApiError::new("invalid-config", message),
            SessionError::Annotation(AnnotationError::OrphanProbe { .. }) => ApiError::new("orphan-probe", message),
            SessionError::Malformed(_) => ApiError::new("malformed-trace", message),
            SessionError::AnalysisOnly => ApiError::new("analysis-only", message),
            SessionError::Io(_) => ApiError::new("io-error", message),
        }
    }
}

impl From<MalformedTrace> for ApiError {
    fn from(e: MalformedTrace) -> Self {
        ApiError::new("malformed-trace", e.to_string())
    }
}

impl From<JsonlError> for ApiError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io(_) => ApiError::new("io-error", e.to_string()),
            _ => ApiError::new("malformed-trace", e.to_string()),
        }
    }
}

pub type ApiResult = Result<Value, ApiError>;

fn invalid(param: &str, message: impl Into<String>) -> ApiError {
    ApiError::new("invalid-parameter", message).with_detail(json!({ "parameter": param }))
}

pub fn lookup_run<'s>(session: &'s Session, run_id: &str) -> Result<&'s Run, ApiError> {
    session
        .run(run_id)
        .map(|r| &**r)
        .ok_or_else(|| ApiError::new("unknown-run", format!("unknown run `{run_id}`")))
}

fn node_at(tree: &CallTree, seq: u64) -> Result<NodeIdx, ApiError> {
    tree.node_by_seq(seq)
        .or_else(|| (seq == 0).then_some(crate::analysis::ROOT))
        .ok_or_else(|| ApiError::new("unknown-node", format!("no node with seq {seq}")))
}

fn status_json(status: &TraceStatus) -> Value {
    match status {
        TraceStatus::Failed { error } => json!({ "state": "failed", "error": error }),
        other => json!({ "state": other.label() }),
    }
}

/// Short description of a run.
pub fn run_summary(session: &Session, run: &Run) -> Value {
    json!({
        "run_id": run.run_id,
        "example_id": run.example_id,
        "status": status_json(&run.trace.status),
        "stale": run.stale,
        "generation": run.generation,
        "session_generation": session.generation(),
        "event_count": run.trace.events.len(),
        "probe_hits": run.trace.probe_hit_count(),
        "traced_duration_ms": run.trace.traced_duration_ms,
        "output": run.trace.output,
    })
}

/// GET /examples
pub fn list_examples(session: &Session) -> Value {
    let examples: Vec<Value> = session
        .examples()
        .iter()
        .map(|e| {
            let run = session.run_for_example(&e.example_id);
            json!({
                "example_id": e.example_id,
                "name": e.name,
                "module_path": e.module_path,
                "has_setup": e.has_setup,
                "has_teardown": e.has_teardown,
                "active": e.active,
                "run_id": run.map(|r| r.run_id.clone()),
                "status": run.map(|r| status_json(&r.trace.status)),
                "stale": run.is_some_and(|r| r.stale),
            })
        })
        .collect();
    Value::Array(examples)
}

/// POST /examples/{id}/active
pub fn set_example_active(session: &mut Session, example_id: &str, active: bool) -> ApiResult {
    let run_id = session.set_active(example_id, active)?;
    Ok(json!({ "example_id": example_id, "active": active, "run_id": run_id }))
}

/// POST /run/{id}
pub fn run_example(session: &mut Session, example_id: &str) -> ApiResult {
    let run_id = session.run_example(example_id)?;
    let run = lookup_run(session, &run_id)?;
    Ok(run_summary(session, run))
}

/// POST /scope
pub fn set_scope(session: &mut Session, modules: &[String]) -> ApiResult {
    let run_ids = session.set_scope(modules.iter().cloned())?;
    let scope: Vec<String> = session.scope().included_modules.into_iter().collect();
    Ok(json!({ "scope": scope, "run_ids": run_ids }))
}

/// Payload pushed on the event stream after re-runs.
pub fn runs_updated(run_ids: &[String]) -> Value {
    json!({ "type": "runs-updated", "run_ids": run_ids })
}

/// Options of the tree endpoint.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeQuery {
    /// Levels of descendants to include below the start node; None for all.
    pub depth: Option<usize>,
    /// Seq of the node to start from; None for the root.
    pub children_of: Option<u64>,
    pub filter: Option<String>,
}

/// One node without its children.
pub fn node_json(tree: &CallTree, idx: NodeIdx) -> Value {
    let node: &TreeNode = tree.node(idx);
    let mut v = match &node.data {
        NodeData::Invocation(inv) => json!({
            "kind": "invocation",
            "seq": inv.enter_seq,
            "frame": inv.frame_id,
            "method": inv.method,
            "label": inv.method.to_string(),
            "args": inv.args,
            "result": inv.result,
            "exit_kind": inv.exit_kind,
            "exit_seq": inv.exit_seq,
            "site": inv.call_site_node,
        }),
        NodeData::ProbeHit(hit) => json!({
            "kind": "probe",
            "seq": hit.seq,
            "frame": hit.frame_id,
            "probe_id": hit.probe_id,
            "label": hit.probe_id,
            "value": hit.value,
            "excerpt": tree.probe_info(&hit.probe_id).map(|i| i.source_excerpt.clone()),
        }),
    };
    v["depth"] = json!(node.depth);
    v["child_count"] = json!(node.children.len());
    v
}

fn subtree_json(tree: &CallTree, idx: NodeIdx, levels: Option<usize>, flags: Option<&[Visibility]>) -> Value {
    let mut v = node_json(tree, idx);
    if let Some(flags) = flags {
        v["match"] = json!(flags[idx].matches);
        v["visible"] = json!(flags[idx].visible);
    }
    if levels != Some(0) {
        let next = levels.map(|l| l - 1);
        v["children"] = tree
            .node(idx)
            .children
            .iter()
            .map(|&c| subtree_json(tree, c, next, flags))
            .collect();
    }
    v
}

/// GET /runs/{run}/tree
pub fn tree(session: &Session, run_id: &str, query: &TreeQuery) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let tree = &run.tree;
    let start = match query.children_of {
        Some(seq) => node_at(tree, seq)?,
        None => crate::analysis::ROOT,
    };
    let flags = query.filter.as_deref().map(|q| tree.filter_visibility(q));
    Ok(json!({
        "run_id": run.run_id,
        "example_id": run.example_id,
        "status": status_json(&run.trace.status),
        "stale": run.stale,
        "node_count": tree.len(),
        "filter": query.filter,
        "root": subtree_json(tree, start, query.depth, flags.as_deref()),
    }))
}

/// GET /runs/{run}/procedures
pub fn procedures(session: &Session, run_id: &str) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let list: Vec<Value> = run
        .tree
        .procedure_set()
        .into_iter()
        .map(|(m, count)| {
            let first = run.tree.first_invocation(&m).map(|i| run.tree.node(i).seq());
            json!({ "method": m, "label": m.to_string(), "count": count, "first_seq": first })
        })
        .collect();
    Ok(Value::Array(list))
}

/// GET /runs/{run}/annotations
pub fn annotations(session: &Session, run_id: &str) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let probes = session.probes();
    let list: Vec<Value> = run
        .tree
        .annotation_set(probes)
        .into_iter()
        .map(|(probe_id, hits)| {
            let probe = probes.iter().find(|p| p.probe_id == probe_id);
            json!({
                "probe_id": probe_id,
                "hits": hits,
                "covered": hits > 0,
                "enclosing_method": probe.map(|p| &p.enclosing_method),
                "excerpt": probe.map(|p| &p.source_excerpt),
                "span": probe.map(|p| &p.span),
            })
        })
        .collect();
    Ok(Value::Array(list))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMode {
    Summarized,
    Detailed,
}

impl std::str::FromStr for PathMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "summarized" => Ok(PathMode::Summarized),
            "detailed" => Ok(PathMode::Detailed),
            other => Err(format!("invalid mode `{other}`, expected summarized or detailed")),
        }
    }
}

fn check_probe(session: &Session, tree: &CallTree, probe_id: &str) -> Result<(), ApiError> {
    let known = session.probes().iter().any(|p| p.probe_id == probe_id)
        || tree.probe_info(probe_id).is_some()
        || !tree.hits_of(probe_id).is_empty();
    if known {
        Ok(())
    } else {
        Err(ApiError::new("unknown-probe", format!("unknown probe `{probe_id}`")))
    }
}

fn summary_json(summary: &PathSummary) -> Value {
    let paths: Vec<Value> = summary
        .paths
        .iter()
        .map(|p| {
            json!({
                "methods": p.methods,
                "labels": p.methods.iter().map(MethodId::to_string).collect::<Vec<_>>(),
                "hit_count": p.hit_count,
                "member_seqs": p.member_seqs,
                "color_index": p.color_index,
            })
        })
        .collect();
    json!({
        "paths": paths,
        "common_ancestor_depth": summary.common_ancestor_depth,
        "context_sensitive_ancestor": summary.context_sensitive_ancestor,
    })
}

/// GET /runs/{run}/paths?target=..&mode=..
pub fn paths(session: &Session, run_id: &str, target: &str, mode: &str) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let target: Target = target.parse().map_err(|m: String| invalid("target", m))?;
    let mode: PathMode = mode.parse().map_err(|m: String| invalid("mode", m))?;
    if let Target::Probe(id) = &target {
        check_probe(session, &run.tree, id)?;
    }
    let tree = &run.tree;
    let mut out = match mode {
        PathMode::Summarized => summary_json(&tree.summarize_paths(&target)),
        PathMode::Detailed => {
            let paths: Vec<Value> = tree
                .detailed_paths(&target)
                .iter()
                .map(|p| {
                    let frames: Vec<Value> = p
                        .frames
                        .iter()
                        .map(|(frame, m)| json!({ "frame": frame, "method": m, "label": m.to_string() }))
                        .collect();
                    json!({ "seq": p.seq, "frames": frames, "terminal": node_json(tree, p.terminal) })
                })
                .collect();
            json!({ "paths": paths })
        }
    };
    out["target"] = json!(target.to_string());
    out["mode"] = json!(match mode {
        PathMode::Summarized => "summarized",
        PathMode::Detailed => "detailed",
    });
    out["run_id"] = json!(run.run_id);
    Ok(out)
}

/// GET /runs/{run}/probe/{id}/values
pub fn probe_values(session: &Session, run_id: &str, probe_id: &str) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    check_probe(session, &run.tree, probe_id)?;
    let summary = run.tree.summarize_paths(&Target::Probe(probe_id.to_string()));
    Ok(json!({
        "probe_id": probe_id,
        "values": run.tree.probe_values(probe_id, &summary),
    }))
}

/// GET /runs/{run}/probe-log
pub fn probe_log(session: &Session, run_id: &str) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    Ok(json!(run.tree.probe_log()))
}

fn hit_ref(tree: &CallTree, idx: Option<NodeIdx>) -> Value {
    match idx.and_then(|i| tree.node(i).hit()) {
        Some(hit) => json!({ "seq": hit.seq, "probe_id": hit.probe_id, "value": hit.value }),
        None => Value::Null,
    }
}

/// GET /runs/{run}/node/{seq}/succession
pub fn succession(session: &Session, run_id: &str, seq: u64) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let idx = node_at(&run.tree, seq)?;
    if run.tree.node(idx).hit().is_none() {
        return Err(ApiError::new("not-a-probe-hit", format!("node {seq} is not a probe hit")));
    }
    let s = run.tree.value_succession(idx);
    Ok(json!({
        "seq": seq,
        "prev": hit_ref(&run.tree, s.prev),
        "next": hit_ref(&run.tree, s.next),
    }))
}

/// GET /runs/{run}/node/{seq}/callees
pub fn callees(session: &Session, run_id: &str, seq: u64) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let idx = node_at(&run.tree, seq)?;
    if run.tree.node(idx).invocation().is_none() {
        return Err(ApiError::new("not-an-invocation", format!("node {seq} is not an invocation")));
    }
    let callees: BTreeSet<MethodId> = run.tree.callees_recursive(idx);
    let list: Vec<Value> = callees
        .iter()
        .map(|m| json!({ "method": m, "label": m.to_string() }))
        .collect();
    Ok(json!({ "seq": seq, "callees": list }))
}

/// GET /runs/{run}/find?method=..&from=..&dir=..
pub fn find(session: &Session, run_id: &str, method: &str, from: Option<u64>, dir: Option<&str>) -> ApiResult {
    let run = lookup_run(session, run_id)?;
    let method = MethodId::parse(method).ok_or_else(|| invalid("method", format!("invalid method `{method}`")))?;
    let dir: Direction = dir.unwrap_or("next").parse().map_err(|m: String| invalid("dir", m))?;
    let found = run.tree.find_invocation(from.unwrap_or(0), &method, dir);
    Ok(json!({ "node": found.map(|i| node_json(&run.tree, i)) }))
}

/// GET /source/{module}
pub fn source(session: &Session, module: &str) -> ApiResult {
    let text = session
        .source_text(module)
        .ok_or_else(|| ApiError::new("unknown-module", format!("unknown module `{module}`")))?;
    let probes: Vec<_> = session
        .probes()
        .iter()
        .filter(|p| p.span.module_path == module)
        .collect();
    let examples: Vec<_> = session
        .examples()
        .iter()
        .filter(|e| e.module_path == module)
        .collect();
    let mut ids: Vec<&MethodId> = session.program().function_ids().filter(|m| m.module == module).collect();
    ids.sort();
    let functions: Vec<Value> = ids
        .into_iter()
        .filter_map(|m| {
            let decl = session.program().function(m)?;
            Some(json!({ "method": m, "span": decl.span.dto() }))
        })
        .collect();
    Ok(json!({
        "module": module,
        "text": text,
        "broken": session.broken_modules().get(module).map(|e| e.dto()),
        "probes": probes,
        "examples": examples,
        "functions": functions,
    }))
}
