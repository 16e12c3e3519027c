//! Plain-text renderings of the api JSON documents.

use std::fmt::Write;

use crosscut::tracer::ValueSnapshot;
use serde_json::Value;

pub fn value(v: &Value) -> String {
    match ValueSnapshot::from_json(v) {
        Ok(s) => s.render(),
        Err(_) => v.to_string(),
    }
}

fn s<'a>(v: &'a Value, key: &str) -> &'a str {
    v[key].as_str().unwrap_or("")
}

/// One line for a tree node.
pub fn node_line(node: &Value) -> String {
    let mut line = match s(node, "kind") {
        "probe" => {
            let mut l = format!("@ {} = {}", s(node, "probe_id"), value(&node["value"]));
            if let Some(excerpt) = node["excerpt"].as_str() {
                let _ = write!(l, "  ({excerpt})");
            }
            l
        }
        _ => {
            let args: Vec<String> = node["args"].as_array().into_iter().flatten().map(value).collect();
            let arrow = if s(node, "exit_kind") == "exception" { "!!" } else { "->" };
            format!(
                "{}({}) {arrow} {}  [frame {}]",
                s(node, "label"),
                args.join(", "),
                value(&node["result"]),
                node["frame"]
            )
        }
    };
    let _ = write!(line, "  #{}", node["seq"]);
    line
}

fn tree_lines(node: &Value, prefix: &str, last: bool, top: bool, out: &mut String) {
    if node["visible"] == Value::Bool(false) {
        return;
    }
    let mark = if node["match"] == Value::Bool(true) { "* " } else { "" };
    let branch = match (top, last) {
        (true, _) => "",
        (false, true) => "`-- ",
        (false, false) => "|-- ",
    };
    let _ = write!(out, "{prefix}{branch}{mark}{}", node_line(node));
    let children: Vec<&Value> = match node["children"].as_array() {
        Some(children) => children.iter().filter(|c| c["visible"] != Value::Bool(false)).collect(),
        None => Vec::new(),
    };
    let hidden = node["child_count"].as_u64().unwrap_or(0);
    if node.get("children").is_none() && hidden > 0 {
        let _ = write!(out, "  [+{hidden}]");
    }
    out.push('\n');
    let next = match (top, last) {
        (true, _) => prefix.to_string(),
        (false, true) => format!("{prefix}    "),
        (false, false) => format!("{prefix}|   "),
    };
    for (i, c) in children.iter().enumerate() {
        tree_lines(c, &next, i + 1 == children.len(), false, out);
    }
}

/// ASCII rendering of a tree document. Filtered-out nodes are skipped and
/// matches are starred.
pub fn tree(doc: &Value) -> String {
    let mut out = String::new();
    let status = s(&doc["status"], "state");
    if status != "completed" || doc["stale"] == Value::Bool(true) {
        let stale = if doc["stale"] == Value::Bool(true) { " (stale)" } else { "" };
        let _ = writeln!(out, "status: {status}{stale}");
    }
    tree_lines(&doc["root"], "", true, true, &mut out);
    out
}

pub fn probe_log(run: &Value, log: &Value) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} {} ({} events)",
        s(run, "example_id"),
        s(&run["status"], "state"),
        run["event_count"]
    );
    if let Some(error) = run["status"].get("error") {
        let _ = writeln!(out, "error: {}", s(error, "message"));
    }
    for line in run["output"].as_array().into_iter().flatten() {
        let _ = writeln!(out, "> {}", line.as_str().unwrap_or(""));
    }
    for entry in log.as_array().into_iter().flatten() {
        let _ = writeln!(out, "#{} {} = {}", entry["seq"], s(entry, "probe_id"), value(&entry["value"]));
    }
    out
}

pub fn paths(doc: &Value) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} ({})", s(doc, "target"), s(doc, "mode"));
    let paths = doc["paths"].as_array().cloned().unwrap_or_default();
    if s(doc, "mode") == "summarized" {
        let depth = doc["common_ancestor_depth"].as_u64().unwrap_or(0) as usize;
        let _ = writeln!(
            out,
            "common ancestor depth {depth}, context-sensitive ancestor frame {}",
            doc["context_sensitive_ancestor"]
        );
        for p in &paths {
            let labels: Vec<&str> = p["labels"].as_array().into_iter().flatten().filter_map(Value::as_str).collect();
            let (common, rest) = labels.split_at(depth.min(labels.len()));
            let mut chain = format!("[{}]", common.join(" > "));
            for l in rest {
                let _ = write!(chain, " > {l}");
            }
            let _ = writeln!(out, "{}: x{}  {chain}", p["color_index"], p["hit_count"]);
        }
    } else {
        for p in &paths {
            let frames: Vec<String> = p["frames"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|f| format!("{}:{}", s(f, "label"), f["frame"]))
                .collect();
            let _ = writeln!(out, "#{}  {}  => {}", p["seq"], frames.join(" > "), node_line(&p["terminal"]));
        }
    }
    out
}
