//! Examples and probes extracted from a parsed program.

use serde::Serialize;

use crate::lang::ast::{MethodId, Node, NodeId, NodeKind, SpanDto};
use crate::lang::program::{probe_id_for, SourceProgram};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnnotationError {
    #[error("probe {probe_id} is not inside a function or example")]
    OrphanProbe { probe_id: String },
    #[error("unknown example `{0}`")]
    UnknownExample(String),
}

/// A named script that exercises code under study.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Example {
    /// `module_path#name`
    pub example_id: String,
    pub name: String,
    pub module_path: String,
    #[serde(skip)]
    pub item_index: usize,
    pub has_setup: bool,
    pub has_teardown: bool,
    pub active: bool,
}

impl Example {
    pub fn decl<'p>(&self, program: &'p SourceProgram) -> Option<&'p Node> {
        program
            .items(&self.module_path)
            .get(self.item_index)
            .filter(|n| matches!(&n.kind, NodeKind::ExampleDecl { name, .. } if *name == self.name))
    }

    /// Label of the root frame of this example's runs.
    pub fn root_method(&self) -> MethodId {
        MethodId::example_root(&self.module_path, &self.name)
    }
}

/// An expression marked with `@{ }` whose evaluations are recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Probe {
    /// `module_path:line:col` of the `@{` token.
    pub probe_id: String,
    pub node_id: NodeId,
    pub span: SpanDto,
    /// Innermost function declaration containing the probe, or the example
    /// root label for probes written directly in an example.
    pub enclosing_method: MethodId,
    /// Source text of the wrapped expression.
    pub source_excerpt: String,
}

pub fn extract_annotations(program: &SourceProgram) -> Result<(Vec<Example>, Vec<Probe>), AnnotationError> {
    let mut examples = Vec::new();
    let mut probes = Vec::new();
    for (module_path, root) in program.modules() {
        let NodeKind::Module { items, .. } = &root.kind else {
            continue;
        };
        for (idx, item) in items.iter().enumerate() {
            let owner = match &item.kind {
                NodeKind::FunctionDecl { name, .. } => Some(MethodId::new(module_path, name.clone())),
                NodeKind::ExampleDecl {
                    name,
                    setup,
                    teardown,
                    ..
                } => {
                    examples.push(Example {
                        example_id: format!("{module_path}#{name}"),
                        name: name.clone(),
                        module_path: module_path.to_string(),
                        item_index: idx,
                        has_setup: setup.is_some(),
                        has_teardown: teardown.is_some(),
                        active: true,
                    });
                    Some(MethodId::example_root(module_path, name))
                }
                _ => None,
            };
            let mut found = Vec::new();
            item.walk(&mut |n| {
                if let NodeKind::Probe { expr } = &n.kind {
                    found.push((n, &**expr));
                }
            });
            for (node, expr) in found {
                let Some(owner) = owner.clone() else {
                    return Err(AnnotationError::OrphanProbe {
                        probe_id: probe_id_for(node),
                    });
                };
                probes.push(Probe {
                    probe_id: probe_id_for(node),
                    node_id: node.id,
                    span: node.span.dto(),
                    enclosing_method: owner,
                    source_excerpt: program.excerpt(expr),
                });
            }
        }
    }
    Ok((examples, probes))
}

/// Sets the activation flag of one example.
pub fn set_active(examples: &mut [Example], example_id: &str, active: bool) -> Result<(), AnnotationError> {
    let example = examples
        .iter_mut()
        .find(|e| e.example_id == example_id)
        .ok_or_else(|| AnnotationError::UnknownExample(example_id.to_string()))?;
    example.active = active;
    Ok(())
}
