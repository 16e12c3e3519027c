//! Call-tree reconstruction and the cross-cutting trace views.

mod tree;
mod views;

pub use tree::{
    build_call_tree, CallTree, Invocation, MalformedTrace, NodeData, NodeIdx, ProbeHitNode, ProbeInfo, TreeNode, ROOT,
};
pub use views::{
    DetailedPath, Direction, OrdinalOutOfRange, PathSummary, ProbeLogEntry, ProbeValue, Succession, SummarizedPath,
    Target, Visibility,
};
