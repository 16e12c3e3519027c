#![allow(dead_code)]

pub mod gen;
pub mod oracle;
pub mod snapshots;

use std::collections::{BTreeMap, BTreeSet};

use crosscut::analysis::{build_call_tree, CallTree, NodeData, NodeIdx, Target, ROOT};
use crosscut::annotations::{extract_annotations, Example, Probe};
use crosscut::lang::{MethodId, SourceProgram};
use crosscut::tracer::{trace_run, Trace, TraceScope};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gen::{GenProgram, EXAMPLE, MODULE};
use oracle::{Oracle, OracleRun};

pub const F1: &str = "fn g(x){ return @{ x * 2 }; }  fn f(a){ if a > 0 { return g(a); } else { return g(0 - a); } }  #example \"ex1\" { f(3); f(-2); }";
pub const F2: &str = "fn g(x){ return @{ x * 2 }; }  fn f(a){ return g(a); }  fn h(a){ return g(a + 1); }  #example \"ex1\" { f(3); h(3); g(10); }";
pub const F3: &str = "fn fact(n){ if n <= 1 { return 1; } return n * @{ fact(n - 1) }; }  #example \"fact3\" { fact(3); }";
pub const F1_THROW: &str = "fn g(x){ if x < 0 { throw \"neg\"; } return @{ x * 2 }; }  fn f(a){ return g(a); }  #example \"ex1\" { f(3); f(-2); }";

pub struct Loaded {
    pub program: SourceProgram,
    pub examples: Vec<Example>,
    pub probes: Vec<Probe>,
}

impl Loaded {
    pub fn example(&self, id: &str) -> &Example {
        self.examples.iter().find(|e| e.example_id == id).expect("example exists")
    }
}

pub fn load(sources: &[(&str, &str)]) -> Loaded {
    let program = SourceProgram::from_sources(sources.iter().copied()).expect("fixture parses");
    let (examples, probes) = extract_annotations(&program).expect("annotations");
    Loaded {
        program,
        examples,
        probes,
    }
}

pub fn load_one(source: &str) -> Loaded {
    load(&[("m.cc", source)])
}

pub fn run(loaded: &Loaded, example_id: &str) -> (Trace, CallTree) {
    let example = loaded.example(example_id);
    let trace = trace_run(&loaded.program, example, &TraceScope::all(&loaded.program));
    let tree = build_call_tree(&trace).expect("well bracketed").with_probes(&loaded.probes);
    (trace, tree)
}

pub fn oracle_run(loaded: &Loaded, module: &str, name: &str, scope: Option<BTreeSet<String>>) -> OracleRun {
    Oracle::new(&loaded.program, scope).run_example(module, name)
}

/// A generated program accepted into the corpus.
pub struct CorpusItem {
    pub seed: u64,
    pub gen: GenProgram,
    pub source: String,
    pub loaded: Loaded,
    pub oracle: OracleRun,
}

pub const MAX_CALLS: usize = 50;

pub fn accept(seed: u64, gen: GenProgram) -> Option<CorpusItem> {
    let source = gen.source();
    let program = SourceProgram::from_sources([(MODULE, source.as_str())]).ok()?;
    let (examples, probes) = extract_annotations(&program).ok()?;
    let loaded = Loaded {
        program,
        examples,
        probes,
    };
    let oracle = oracle_run(&loaded, MODULE, EXAMPLE, None);
    let calls = oracle.tree.as_ref()?.calls() - 1;
    (calls <= MAX_CALLS).then_some(CorpusItem {
        seed,
        gen,
        source,
        loaded,
        oracle,
    })
}

/// `n` programs within the call budget, deterministic in `seed`.
pub fn corpus(seed: u64, n: usize) -> Vec<CorpusItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut attempt = 0u64;
    while out.len() < n {
        attempt += 1;
        let gen = gen::generate(&mut rng);
        if let Some(item) = accept(attempt, gen) {
            out.push(item);
        }
    }
    out
}

pub fn example_id() -> String {
    format!("{MODULE}#{EXAMPLE}")
}

/// Brute-force grouping of detailed paths.
#[derive(Debug, PartialEq)]
pub struct BruteSummary {
    /// (methods, member seqs), ordered by first member.
    pub groups: Vec<(Vec<MethodId>, BTreeSet<u64>)>,
    pub common_prefix: usize,
    pub lca_frame: u64,
}

pub fn brute_summary(tree: &CallTree, target: &Target) -> BruteSummary {
    let detailed = tree.detailed_paths(target);
    let mut groups: Vec<(Vec<MethodId>, BTreeSet<u64>)> = Vec::new();
    for p in &detailed {
        let methods: Vec<MethodId> = p.frames.iter().map(|(_, m)| m.clone()).collect();
        match groups.iter_mut().find(|(m, _)| *m == methods) {
            Some((_, seqs)) => {
                seqs.insert(p.seq);
            }
            None => groups.push((methods, BTreeSet::from([p.seq]))),
        }
    }
    groups.sort_by_key(|(_, seqs)| *seqs.iter().next().unwrap());
    let mut common_prefix = 0;
    if let Some((first, _)) = groups.first() {
        common_prefix = first.len();
        for (m, _) in &groups {
            let mut k = 0;
            while k < common_prefix && k < m.len() && m[k] == first[k] {
                k += 1;
            }
            common_prefix = k;
        }
    }
    let frames: Vec<NodeIdx> = tree
        .occurrences(target)
        .iter()
        .map(|&i| if tree.node(i).hit().is_some() { tree.parent(i).unwrap() } else { i })
        .collect();
    let lca = naive_lca(tree, &frames);
    let lca_frame = match &tree.node(lca).data {
        NodeData::Invocation(inv) => inv.frame_id,
        NodeData::ProbeHit(_) => unreachable!("lca of frames is a frame"),
    };
    BruteSummary {
        groups,
        common_prefix,
        lca_frame,
    }
}

fn ancestors_inclusive(tree: &CallTree, mut idx: NodeIdx) -> Vec<NodeIdx> {
    let mut out = vec![idx];
    while let Some(p) = tree.parent(idx) {
        out.push(p);
        idx = p;
    }
    out
}

/// Deepest node that is an ancestor-or-self of every node, by walking
/// ancestor lists.
pub fn naive_lca(tree: &CallTree, nodes: &[NodeIdx]) -> NodeIdx {
    let Some(&first) = nodes.first() else { return ROOT };
    let others: Vec<BTreeSet<NodeIdx>> = nodes
        .iter()
        .map(|&n| ancestors_inclusive(tree, n).into_iter().collect())
        .collect();
    ancestors_inclusive(tree, first)
        .into_iter()
        .find(|a| others.iter().all(|set| set.contains(a)))
        .unwrap_or(ROOT)
}

/// Recursive filter predicate: (match, visible) per node index.
pub fn brute_filter(tree: &CallTree, query: &str) -> BTreeMap<NodeIdx, (bool, bool)> {
    fn matches(tree: &CallTree, idx: NodeIdx, q: &str) -> bool {
        match &tree.node(idx).data {
            NodeData::Invocation(inv) => inv.method.to_string().to_lowercase().contains(q),
            NodeData::ProbeHit(hit) => {
                hit.probe_id.to_lowercase().contains(q)
                    || tree
                        .probe_info(&hit.probe_id)
                        .is_some_and(|i| i.source_excerpt.to_lowercase().contains(q))
            }
        }
    }
    fn visible(tree: &CallTree, idx: NodeIdx, q: &str, out: &mut BTreeMap<NodeIdx, (bool, bool)>) -> bool {
        let m = matches(tree, idx, q);
        let mut any = false;
        for &c in &tree.node(idx).children {
            any |= visible(tree, c, q, out);
        }
        out.insert(idx, (m, m || any));
        m || any
    }
    let q = query.to_lowercase();
    let mut out = BTreeMap::new();
    visible(tree, ROOT, &q, &mut out);
    out
}

/// Every analysis output of a tree as one JSON document.
pub fn analysis_json(tree: &CallTree) -> serde_json::Value {
    use serde_json::json;
    let nodes: Vec<_> = (0..tree.len()).map(|i| crosscut::api::node_json(tree, i)).collect();
    let mut targets: Vec<Target> = tree.methods().cloned().map(Target::Method).collect();
    let probes: BTreeSet<String> = tree
        .all_hits()
        .iter()
        .map(|&i| tree.node(i).hit().unwrap().probe_id.clone())
        .collect();
    targets.extend(probes.iter().cloned().map(Target::Probe));
    let paths: Vec<_> = targets
        .iter()
        .map(|t| {
            json!({
                "target": t.to_string(),
                "summary": tree.summarize_paths(t),
                "detailed": tree.detailed_paths(t),
            })
        })
        .collect();
    let procedures: Vec<_> = tree.procedure_set().into_iter().collect();
    let succession: Vec<_> = tree
        .all_hits()
        .iter()
        .map(|&i| {
            let s = tree.value_succession(i);
            json!([s.prev, s.next])
        })
        .collect();
    json!({
        "nodes": nodes,
        "procedures": procedures,
        "annotations": tree.annotation_set(&[]),
        "paths": paths,
        "probe_log": tree.probe_log(),
        "succession": succession,
        "filter": tree.filter_visibility("f"),
        "status": tree.status,
    })
}

/// Replaces every `@{ e }` with `( e )`, keeping all positions.
pub fn erase_probes(source: &str, program: &SourceProgram, module: &str) -> String {
    let mut bytes = source.as_bytes().to_vec();
    program.module(module).unwrap().walk(&mut |n| {
        if matches!(n.kind, crosscut::lang::NodeKind::Probe { .. }) {
            let (s, e) = (n.span.start.offset, n.span.end.offset);
            assert_eq!(&bytes[s..s + 2], b"@{");
            assert_eq!(bytes[e - 1], b'}');
            bytes[s] = b' ';
            bytes[s + 1] = b'(';
            bytes[e - 1] = b')';
        }
    });
    String::from_utf8(bytes).unwrap()
}
