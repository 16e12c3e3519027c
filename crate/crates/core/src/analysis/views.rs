use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::tree::{CallTree, NodeData, NodeIdx, ROOT};
use crate::annotations::Probe;
use crate::lang::ast::MethodId;

/// What a paths view is computed for.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Target {
    Probe(String),
    Method(MethodId),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Probe(id) => write!(f, "probe:{id}"),
            Target::Method(m) => write!(f, "method:{}/{}", m.module, m.name),
        }
    }
}

impl FromStr for Target {
    type Err = String;

    /// `probe:{id}` or `method:{module}/{name}`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(id) = s.strip_prefix("probe:") {
            if id.is_empty() {
                return Err("empty probe id".to_string());
            }
            return Ok(Target::Probe(id.to_string()));
        }
        if let Some(m) = s.strip_prefix("method:") {
            return MethodId::parse(m)
                .map(Target::Method)
                .ok_or_else(|| format!("invalid method `{m}`, expected module/name"));
        }
        Err(format!("invalid target `{s}`, expected probe:ID or method:MODULE/NAME"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetailedPath {
    /// Root-to-occurrence chain of (frame id, method). For method targets
    /// the last entry is the invocation itself.
    pub frames: Vec<(u64, MethodId)>,
    /// The hit (probe targets) or invocation (method targets).
    #[serde(skip)]
    pub terminal: NodeIdx,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummarizedPath {
    pub methods: Vec<MethodId>,
    pub hit_count: usize,
    pub member_seqs: BTreeSet<u64>,
    pub color_index: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    /// Ordered by first occurrence.
    pub paths: Vec<SummarizedPath>,
    /// Length of the longest common prefix of all paths' methods; 0 when
    /// there are no occurrences.
    pub common_ancestor_depth: usize,
    /// Frame of the lowest common ancestor of all occurrences in the tree.
    pub context_sensitive_ancestor: u64,
}

impl PathSummary {
    pub fn color_of(&self, seq: u64) -> Option<usize> {
        self.paths
            .iter()
            .find(|p| p.member_seqs.contains(&seq))
            .map(|p| p.color_index)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Next,
    Prev,
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "next" => Ok(Direction::Next),
            "prev" => Ok(Direction::Prev),
            other => Err(format!("invalid direction `{other}`, expected next or prev")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct Visibility {
    #[serde(rename = "match")]
    pub matches: bool,
    pub visible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("probe {probe_id} has {hits} hit(s); ordinal {ordinal} is out of range")]
pub struct OrdinalOutOfRange {
    pub probe_id: String,
    pub ordinal: usize,
    pub hits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeValue {
    pub value: crate::tracer::ValueSnapshot,
    pub seq: u64,
    pub path_color_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeLogEntry {
    pub probe_id: String,
    pub seq: u64,
    pub value: crate::tracer::ValueSnapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Succession {
    pub prev: Option<NodeIdx>,
    pub next: Option<NodeIdx>,
}

impl CallTree {
    /// Called methods with their invocation counts.
    pub fn procedure_set(&self) -> BTreeMap<MethodId, usize> {
        self.methods()
            .map(|m| (m.clone(), self.invocations_of(m).len()))
            .collect()
    }

    /// Hit count per probe; probes that never ran map to 0.
    pub fn annotation_set(&self, probes: &[Probe]) -> BTreeMap<String, usize> {
        let mut out: BTreeMap<String, usize> = probes.iter().map(|p| (p.probe_id.clone(), 0)).collect();
        for &idx in self.all_hits() {
            if let Some(hit) = self.node(idx).hit() {
                *out.entry(hit.probe_id.clone()).or_default() += 1;
            }
        }
        out
    }

    /// Occurrences of a target in seq order.
    pub fn occurrences(&self, target: &Target) -> &[NodeIdx] {
        match target {
            Target::Probe(id) => self.hits_of(id),
            Target::Method(m) => self.invocations_of(m),
        }
    }

    pub fn detailed_paths(&self, target: &Target) -> Vec<DetailedPath> {
        self.occurrences(target)
            .iter()
            .map(|&idx| {
                let frame = self.enclosing_frame(idx);
                let frames = self
                    .ancestry(frame)
                    .into_iter()
                    .filter_map(|a| self.node(a).invocation())
                    .map(|inv| (inv.frame_id, inv.method.clone()))
                    .collect();
                DetailedPath {
                    frames,
                    terminal: idx,
                    seq: self.node(idx).seq(),
                }
            })
            .collect()
    }

    /// Groups occurrences by method-level stack.
    pub fn summarize_paths(&self, target: &Target) -> PathSummary {
        let detailed = self.detailed_paths(target);
        if detailed.is_empty() {
            return PathSummary {
                paths: Vec::new(),
                common_ancestor_depth: 0,
                context_sensitive_ancestor: 0,
            };
        }
        let mut paths: Vec<SummarizedPath> = Vec::new();
        let mut index: HashMap<Vec<MethodId>, usize> = HashMap::new();
        for path in &detailed {
            let methods: Vec<MethodId> = path.frames.iter().map(|(_, m)| m.clone()).collect();
            let slot = *index.entry(methods.clone()).or_insert_with(|| {
                paths.push(SummarizedPath {
                    methods,
                    hit_count: 0,
                    member_seqs: BTreeSet::new(),
                    color_index: paths.len(),
                });
                paths.len() - 1
            });
            paths[slot].hit_count += 1;
            paths[slot].member_seqs.insert(path.seq);
        }

        let first = &paths[0].methods;
        let common_ancestor_depth = paths[1..].iter().fold(first.len(), |depth, p| {
            first
                .iter()
                .zip(&p.methods)
                .take(depth)
                .take_while(|(a, b)| a == b)
                .count()
        });

        let lca = detailed
            .iter()
            .map(|p| self.enclosing_frame(p.terminal))
            .reduce(|a, b| self.lowest_common_ancestor(a, b))
            .unwrap_or(ROOT);
        let context_sensitive_ancestor = self.node(lca).invocation().map(|inv| inv.frame_id).unwrap_or(0);

        PathSummary {
            paths,
            common_ancestor_depth,
            context_sensitive_ancestor,
        }
    }

    fn lowest_common_ancestor(&self, mut a: NodeIdx, mut b: NodeIdx) -> NodeIdx {
        while self.node(a).depth > self.node(b).depth {
            a = self.parent(a).expect("deeper node has a parent");
        }
        while self.node(b).depth > self.node(a).depth {
            b = self.parent(b).expect("deeper node has a parent");
        }
        while a != b {
            a = self.parent(a).expect("non-root has a parent");
            b = self.parent(b).expect("non-root has a parent");
        }
        a
    }

    /// The invocation of `method` entered nearest after (or before)
    /// `from_seq`.
    pub fn find_invocation(&self, from_seq: u64, method: &MethodId, direction: Direction) -> Option<NodeIdx> {
        let invs = self.invocations_of(method);
        let split = invs.partition_point(|&idx| self.node(idx).seq() <= from_seq);
        match direction {
            Direction::Next => invs.get(split).copied(),
            Direction::Prev => {
                let before = invs.partition_point(|&idx| self.node(idx).seq() < from_seq);
                before.checked_sub(1).map(|i| invs[i])
            }
        }
    }

    pub fn first_invocation(&self, method: &MethodId) -> Option<NodeIdx> {
        self.invocations_of(method).first().copied()
    }

    /// The `ordinal`-th (0-based) hit of a probe.
    pub fn locate_hit(&self, probe_id: &str, ordinal: usize) -> Result<NodeIdx, OrdinalOutOfRange> {
        let hits = self.hits_of(probe_id);
        hits.get(ordinal).copied().ok_or_else(|| OrdinalOutOfRange {
            probe_id: probe_id.to_string(),
            ordinal,
            hits: hits.len(),
        })
    }

    fn matches(&self, idx: NodeIdx, needle: &str) -> bool {
        if self.label(idx).to_lowercase().contains(needle) {
            return true;
        }
        match &self.node(idx).data {
            NodeData::ProbeHit(hit) => self
                .probe_info(&hit.probe_id)
                .is_some_and(|info| info.source_excerpt.to_lowercase().contains(needle)),
            NodeData::Invocation(_) => false,
        }
    }

    /// Per-node match and visibility flags for a filter query: a node is
    /// visible iff it or a descendant matches.
    pub fn filter_visibility(&self, query: &str) -> Vec<Visibility> {
        let needle = query.to_lowercase();
        let mut flags: Vec<Visibility> = (0..self.len())
            .map(|idx| {
                let m = self.matches(idx, &needle);
                Visibility {
                    matches: m,
                    visible: m,
                }
            })
            .collect();
        // Children have larger indices than their parents.
        for idx in (1..self.len()).rev() {
            if flags[idx].visible {
                if let Some(p) = self.parent(idx) {
                    flags[p].visible = true;
                }
            }
        }
        flags
    }

    /// Methods invoked anywhere below `idx`.
    pub fn callees_recursive(&self, idx: NodeIdx) -> BTreeSet<MethodId> {
        (idx + 1..self.node(idx).end)
            .filter_map(|d| self.method_of(d).cloned())
            .collect()
    }

    fn hit_method(&self, idx: NodeIdx) -> Option<MethodId> {
        let hit = self.node(idx).hit()?;
        match self.probe_info(&hit.probe_id) {
            Some(info) => Some(info.enclosing_method.clone()),
            None => self.method_of(self.enclosing_frame(idx)).cloned(),
        }
    }

    /// Nearest hits before and after `idx` among hits of probes in the same
    /// method.
    pub fn value_succession(&self, idx: NodeIdx) -> Succession {
        let Some(method) = self.hit_method(idx) else {
            return Succession::default();
        };
        let hits = self.all_hits();
        let pos = hits.partition_point(|&h| h < idx);
        let same = |h: &&NodeIdx| self.hit_method(**h).as_ref() == Some(&method);
        Succession {
            prev: hits[..pos].iter().rev().find(same).copied(),
            next: hits[pos..].iter().filter(|&&h| h != idx).find(same).copied(),
        }
    }

    /// Values of one probe in seq order, tagged with their summarized path.
    pub fn probe_values(&self, probe_id: &str, summary: &PathSummary) -> Vec<ProbeValue> {
        self.hits_of(probe_id)
            .iter()
            .filter_map(|&idx| self.node(idx).hit())
            .map(|hit| ProbeValue {
                value: hit.value.clone(),
                seq: hit.seq,
                path_color_index: summary.color_of(hit.seq),
            })
            .collect()
    }

    /// Every probe hit of the run in recording order.
    pub fn probe_log(&self) -> Vec<ProbeLogEntry> {
        self.all_hits()
            .iter()
            .filter_map(|&idx| self.node(idx).hit())
            .map(|hit| ProbeLogEntry {
                probe_id: hit.probe_id.clone(),
                seq: hit.seq,
                value: hit.value.clone(),
            })
            .collect()
    }
}
