use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::annotations::Probe;
use crate::lang::ast::{MethodId, NodeId};
use crate::lang::eval::ExitKind;
use crate::tracer::{check_bracketing, BracketError, EventKind, Trace, TraceStatus, ValueSnapshot};

/// Index of a node in its [`CallTree`]. Indices follow seq order, so a
/// node's subtree is the contiguous range `idx..end`.
pub type NodeIdx = usize;

pub const ROOT: NodeIdx = 0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("malformed trace: {0}")]
pub struct MalformedTrace(#[from] pub BracketError);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Invocation {
    pub frame_id: u64,
    pub method: MethodId,
    pub enter_seq: u64,
    pub exit_seq: u64,
    pub exit_kind: ExitKind,
    pub args: Vec<ValueSnapshot>,
    pub result: ValueSnapshot,
    pub call_site_node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeHitNode {
    pub probe_id: String,
    pub seq: u64,
    pub value: ValueSnapshot,
    /// Frame the hit was recorded in.
    pub frame_id: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeData {
    Invocation(Invocation),
    ProbeHit(ProbeHitNode),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<NodeIdx>,
    pub children: Vec<NodeIdx>,
    pub depth: usize,
    /// One past the last index of this node's subtree.
    pub end: NodeIdx,
    pub data: NodeData,
}

impl TreeNode {
    /// Enter seq for invocations, record seq for hits.
    pub fn seq(&self) -> u64 {
        match &self.data {
            NodeData::Invocation(inv) => inv.enter_seq,
            NodeData::ProbeHit(hit) => hit.seq,
        }
    }

    pub fn invocation(&self) -> Option<&Invocation> {
        match &self.data {
            NodeData::Invocation(inv) => Some(inv),
            NodeData::ProbeHit(_) => None,
        }
    }

    pub fn hit(&self) -> Option<&ProbeHitNode> {
        match &self.data {
            NodeData::ProbeHit(hit) => Some(hit),
            NodeData::Invocation(_) => None,
        }
    }
}

/// What the analysis knows about a probe from source.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeInfo {
    pub enclosing_method: MethodId,
    pub source_excerpt: String,
}

/// The dynamic invocation tree of one example run.
#[derive(Debug, Clone)]
pub struct CallTree {
    pub example_id: String,
    pub status: TraceStatus,
    nodes: Vec<TreeNode>,
    by_frame: HashMap<u64, NodeIdx>,
    by_seq: HashMap<u64, NodeIdx>,
    by_method: BTreeMap<MethodId, Vec<NodeIdx>>,
    by_probe: BTreeMap<String, Vec<NodeIdx>>,
    hits: Vec<NodeIdx>,
    probes: HashMap<String, ProbeInfo>,
}

fn root_method(example_id: &str) -> MethodId {
    match example_id.split_once('#') {
        Some((module, name)) => MethodId::example_root(module, name),
        None => MethodId::example_root(example_id, ""),
    }
}

/// Reconstructs the call tree in a single pass over the events.
pub fn build_call_tree(trace: &Trace) -> Result<CallTree, MalformedTrace> {
    check_bracketing(&trace.events)?;
    let mut tree = CallTree {
        example_id: trace.example_id.clone(),
        status: trace.status.clone(),
        nodes: Vec::with_capacity(trace.events.len() / 2 + 1),
        by_frame: HashMap::new(),
        by_seq: HashMap::new(),
        by_method: BTreeMap::new(),
        by_probe: BTreeMap::new(),
        hits: Vec::new(),
        probes: HashMap::new(),
    };
    if trace.events.is_empty() {
        // Setup failed before the body ran.
        tree.nodes.push(TreeNode {
            parent: None,
            children: Vec::new(),
            depth: 0,
            end: 1,
            data: NodeData::Invocation(Invocation {
                frame_id: 0,
                method: root_method(&trace.example_id),
                enter_seq: 0,
                exit_seq: 0,
                exit_kind: ExitKind::Exception,
                args: Vec::new(),
                result: ValueSnapshot::Null,
                call_site_node: None,
            }),
        });
        tree.by_frame.insert(0, ROOT);
        return Ok(tree);
    }

    let mut stack: Vec<NodeIdx> = Vec::new();
    for event in &trace.events {
        match &event.kind {
            EventKind::Enter {
                frame,
                method,
                site,
                args,
                ..
            } => {
                let idx = tree.nodes.len();
                let parent = stack.last().copied();
                tree.nodes.push(TreeNode {
                    parent,
                    children: Vec::new(),
                    depth: stack.len(),
                    end: idx + 1,
                    data: NodeData::Invocation(Invocation {
                        frame_id: *frame,
                        method: method.clone(),
                        enter_seq: event.seq,
                        exit_seq: event.seq,
                        exit_kind: ExitKind::Normal,
                        args: args.clone(),
                        result: ValueSnapshot::Null,
                        call_site_node: *site,
                    }),
                });
                if let Some(p) = parent {
                    tree.nodes[p].children.push(idx);
                    tree.by_method.entry(method.clone()).or_default().push(idx);
                }
                tree.by_frame.insert(*frame, idx);
                tree.by_seq.insert(event.seq, idx);
                stack.push(idx);
            }
            EventKind::Exit { kind, result, .. } => {
                let idx = stack.pop().expect("bracketing checked");
                let end = tree.nodes.len();
                let node = &mut tree.nodes[idx];
                node.end = end;
                if let NodeData::Invocation(inv) = &mut node.data {
                    inv.exit_seq = event.seq;
                    inv.exit_kind = *kind;
                    inv.result = result.clone();
                }
            }
            EventKind::Probe { probe, frame, value } => {
                let idx = tree.nodes.len();
                let parent = tree.by_frame[frame];
                tree.nodes.push(TreeNode {
                    parent: Some(parent),
                    children: Vec::new(),
                    depth: tree.nodes[parent].depth + 1,
                    end: idx + 1,
                    data: NodeData::ProbeHit(ProbeHitNode {
                        probe_id: probe.clone(),
                        seq: event.seq,
                        value: value.clone(),
                        frame_id: *frame,
                    }),
                });
                tree.nodes[parent].children.push(idx);
                tree.by_seq.insert(event.seq, idx);
                tree.by_probe.entry(probe.clone()).or_default().push(idx);
                tree.hits.push(idx);
            }
        }
    }
    Ok(tree)
}

impl CallTree {
    /// Registers source information for probes (enclosing methods and
    /// excerpts). Trees built from imported traces may have none.
    pub fn attach_probes(&mut self, probes: &[Probe]) {
        for p in probes {
            self.probes.insert(
                p.probe_id.clone(),
                ProbeInfo {
                    enclosing_method: p.enclosing_method.clone(),
                    source_excerpt: p.source_excerpt.clone(),
                },
            );
        }
    }

    pub fn with_probes(mut self, probes: &[Probe]) -> Self {
        self.attach_probes(probes);
        self
    }

    pub fn probe_info(&self, probe_id: &str) -> Option<&ProbeInfo> {
        self.probes.get(probe_id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn root(&self) -> &TreeNode {
        &self.nodes[ROOT]
    }

    pub fn node(&self, idx: NodeIdx) -> &TreeNode {
        &self.nodes[idx]
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node_by_seq(&self, seq: u64) -> Option<NodeIdx> {
        self.by_seq.get(&seq).copied()
    }

    pub fn node_by_frame(&self, frame: u64) -> Option<NodeIdx> {
        self.by_frame.get(&frame).copied()
    }

    /// Invocations of `method` in seq order (the root is never included).
    pub fn invocations_of(&self, method: &MethodId) -> &[NodeIdx] {
        self.by_method.get(method).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Hits of one probe in seq order.
    pub fn hits_of(&self, probe_id: &str) -> &[NodeIdx] {
        self.by_probe.get(probe_id).map(Vec::as_slice).unwrap_or(&[])
    }

    /// All probe hits in seq order.
    pub fn all_hits(&self) -> &[NodeIdx] {
        &self.hits
    }

    pub fn methods(&self) -> impl Iterator<Item = &MethodId> {
        self.by_method.keys()
    }

    /// Enclosing invocation of a node (the hit's frame, or the parent
    /// invocation).
    pub fn parent(&self, idx: NodeIdx) -> Option<NodeIdx> {
        self.nodes[idx].parent
    }

    /// The frame a probe hit is attributed to, or the invocation itself.
    pub fn enclosing_frame(&self, idx: NodeIdx) -> NodeIdx {
        match self.nodes[idx].data {
            NodeData::Invocation(_) => idx,
            NodeData::ProbeHit(_) => self.nodes[idx].parent.expect("hits have a parent"),
        }
    }

    /// Ancestor chain from the root down to `idx` (inclusive).
    pub fn ancestry(&self, idx: NodeIdx) -> Vec<NodeIdx> {
        let mut chain = vec![idx];
        let mut cur = idx;
        while let Some(p) = self.nodes[cur].parent {
            chain.push(p);
            cur = p;
        }
        chain.reverse();
        chain
    }

    pub fn method_of(&self, idx: NodeIdx) -> Option<&MethodId> {
        self.nodes[idx].invocation().map(|inv| &inv.method)
    }

    /// The text a filter query is matched against.
    pub fn label(&self, idx: NodeIdx) -> String {
        match &self.nodes[idx].data {
            NodeData::Invocation(inv) => inv.method.to_string(),
            NodeData::ProbeHit(hit) => hit.probe_id.clone(),
        }
    }

    pub fn is_descendant(&self, node: NodeIdx, ancestor: NodeIdx) -> bool {
        ancestor <= node && node < self.nodes[ancestor].end
    }
}
