use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use super::ast::{MethodId, Node, NodeId, NodeKind};
use super::parser::parse_module;
use super::ParseError;

/// A set of parsed modules with resolved function and probe indexes.
///
/// Immutable after construction; node ids are unique across all modules.
#[derive(Debug, Clone, Default)]
pub struct SourceProgram {
    modules: BTreeMap<String, Node>,
    source_text: BTreeMap<String, Arc<str>>,
    /// function → (module path, item index)
    functions: HashMap<MethodId, (String, usize)>,
    /// module path → (import alias → imported module path)
    imports: HashMap<String, HashMap<String, String>>,
    probe_ids: HashMap<NodeId, Arc<str>>,
    next_id: NodeId,
}

/// `module:line:col` of the `@{` token.
pub fn probe_id_for(node: &Node) -> String {
    format!(
        "{}:{}:{}",
        node.span.module_path, node.span.start.line, node.span.start.col
    )
}

/// Name under which `import "path";` exposes a module: its file stem.
pub fn import_alias(path: &str) -> &str {
    let file = path.rsplit('/').next().unwrap_or(path);
    file.strip_suffix(".cc").unwrap_or(file)
}

fn normalize_import(path: &str) -> String {
    if path.ends_with(".cc") {
        path.to_string()
    } else {
        format!("{path}.cc")
    }
}

impl SourceProgram {
    pub fn new() -> Self {
        SourceProgram::default()
    }

    /// Parses a set of `(module_path, source)` pairs; modules are numbered in
    /// path order. Stops at the first parse error.
    pub fn from_sources<P, S>(sources: impl IntoIterator<Item = (P, S)>) -> Result<Self, ParseError>
    where
        P: Into<String>,
        S: Into<String>,
    {
        let mut sorted: BTreeMap<String, String> = BTreeMap::new();
        for (path, text) in sources {
            sorted.insert(path.into(), text.into());
        }
        let mut program = SourceProgram::new();
        for (path, text) in sorted {
            program.add_module(&path, &text)?;
        }
        Ok(program)
    }

    /// Parses and adds a module. The program is unchanged on error.
    pub fn add_module(&mut self, module_path: &str, source: &str) -> Result<(), ParseError> {
        let root = parse_module(source, module_path, self.next_id)?;
        let mut max_id = root.id;
        root.walk(&mut |n| max_id = max_id.max(n.id));
        self.next_id = max_id + 1;

        let NodeKind::Module { imports, items } = &root.kind else {
            unreachable!("parser returns a module root");
        };
        let aliases = self.imports.entry(module_path.to_string()).or_default();
        for import in imports {
            aliases.insert(
                import_alias(&import.path).to_string(),
                normalize_import(&import.path),
            );
        }
        for (idx, item) in items.iter().enumerate() {
            if let NodeKind::FunctionDecl { name, .. } = &item.kind {
                self.functions.insert(
                    MethodId::new(module_path, name.clone()),
                    (module_path.to_string(), idx),
                );
            }
        }
        root.walk(&mut |n| {
            if matches!(n.kind, NodeKind::Probe { .. }) {
                self.probe_ids.insert(n.id, Arc::from(probe_id_for(n)));
            }
        });
        self.modules.insert(module_path.to_string(), root);
        self.source_text
            .insert(module_path.to_string(), Arc::from(source));
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn from_root_for_tests(module_path: &str, root: Node) -> Self {
        let mut program = SourceProgram::new();
        program.modules.insert(module_path.to_string(), root);
        program
    }

    pub fn modules(&self) -> impl Iterator<Item = (&str, &Node)> {
        self.modules.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn module(&self, path: &str) -> Option<&Node> {
        self.modules.get(path)
    }

    pub fn module_paths(&self) -> impl Iterator<Item = &str> {
        self.modules.keys().map(String::as_str)
    }

    pub fn source(&self, path: &str) -> Option<&str> {
        self.source_text.get(path).map(|s| &**s)
    }

    /// Top-level items of a module.
    pub fn items(&self, path: &str) -> &[Node] {
        match self.modules.get(path).map(|m| &m.kind) {
            Some(NodeKind::Module { items, .. }) => items,
            _ => &[],
        }
    }

    pub fn function(&self, id: &MethodId) -> Option<&Node> {
        let (module, idx) = self.functions.get(id)?;
        self.items(module).get(*idx)
    }

    /// Resolves a function name as seen from `module`: a function declared
    /// in `module` itself.
    pub fn lookup_function(&self, module: &str, name: &str) -> Option<(&MethodId, &Node)> {
        let (id, (m, idx)) = self
            .functions
            .get_key_value(&MethodId::new(module, name))?;
        Some((id, self.items(m).get(*idx)?))
    }

    /// Resolves `alias.name` inside `module` through its imports.
    pub fn lookup_qualified(&self, module: &str, alias: &str, name: &str) -> Option<(&MethodId, &Node)> {
        let target = self.imports.get(module)?.get(alias)?;
        self.lookup_function(target, name)
    }

    pub fn has_import_alias(&self, module: &str, alias: &str) -> bool {
        self.imports
            .get(module)
            .is_some_and(|m| m.contains_key(alias))
    }

    pub fn function_ids(&self) -> impl Iterator<Item = &MethodId> {
        self.functions.keys()
    }

    pub fn probe_id(&self, node: NodeId) -> Option<&Arc<str>> {
        self.probe_ids.get(&node)
    }

    /// Source text covered by a span.
    pub fn excerpt(&self, node: &Node) -> String {
        self.source(&node.span.module_path)
            .and_then(|s| s.get(node.span.start.offset..node.span.end.offset))
            .unwrap_or_default()
            .to_string()
    }
}
