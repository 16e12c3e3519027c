//! Syntax tree for `.cc` modules.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub type NodeId = u32;

/// A line/column position. Lines and columns are 1-based and count
/// characters; `offset` is the byte offset into the module source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
    pub offset: usize,
}

/// Source range of a node. `end` points just past the last character.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub module_path: Arc<str>,
    pub start: Pos,
    pub end: Pos,
}

impl SourceSpan {
    pub fn new(module_path: Arc<str>, start: Pos, end: Pos) -> Self {
        debug_assert!(start <= end);
        SourceSpan {
            module_path,
            start,
            end,
        }
    }

    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        SourceSpan::new(self.module_path.clone(), self.start, other.end)
    }

    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn dto(&self) -> SpanDto {
        SpanDto {
            module_path: self.module_path.to_string(),
            start_line: self.start.line,
            start_col: self.start.col,
            end_line: self.end.line,
            end_col: self.end.col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}:{}-{}:{}",
            self.module_path, self.start.line, self.start.col, self.end.line, self.end.col
        )
    }
}

/// Serializable form of [`SourceSpan`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpanDto {
    pub module_path: String,
    pub start_line: u32,
    pub start_col: u32,
    pub end_line: u32,
    pub end_col: u32,
}

/// A procedure identity: the module that declares it plus its name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MethodId {
    pub module: String,
    pub name: String,
}

pub const LAMBDA_NAME: &str = "<lambda>";

impl MethodId {
    pub fn new(module: impl Into<String>, name: impl Into<String>) -> Self {
        MethodId {
            module: module.into(),
            name: name.into(),
        }
    }

    /// Label of the synthetic root frame of an example run. Renders as the
    /// example id (`module#name`).
    pub fn example_root(module: impl Into<String>, example_name: &str) -> Self {
        MethodId {
            module: module.into(),
            name: format!("#{example_name}"),
        }
    }

    pub fn lambda(module: impl Into<String>) -> Self {
        MethodId::new(module, LAMBDA_NAME)
    }

    pub fn is_example_root(&self) -> bool {
        self.name.starts_with('#')
    }

    /// Parses `module/name` or `module.name` (split at the last separator).
    pub fn parse(text: &str) -> Option<MethodId> {
        let (module, name) = text.rsplit_once('/').or_else(|| text.rsplit_once('.'))?;
        if module.is_empty() || name.is_empty() {
            return None;
        }
        Some(MethodId::new(module, name))
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_example_root() {
            write!(f, "{}{}", self.module, self.name)
        } else {
            write!(f, "{}.{}", self.module, self.name)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Or,
    And,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinaryOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Or => "||",
            BinaryOp::And => "&&",
            BinaryOp::Eq => "==",
            BinaryOp::Ne => "!=",
            BinaryOp::Lt => "<",
            BinaryOp::Le => "<=",
            BinaryOp::Gt => ">",
            BinaryOp::Ge => ">=",
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Rem => "%",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Nil,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Import {
    pub path: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub span: SourceSpan,
    pub kind: NodeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    /// Root of a parsed module.
    Module {
        imports: Vec<Import>,
        items: Vec<Node>,
    },
    FunctionDecl {
        name: String,
        params: Box<Node>,
        body: Box<Node>,
    },
    ParamList {
        names: Vec<String>,
    },
    Block {
        stmts: Vec<Node>,
    },
    Let {
        name: String,
        value: Box<Node>,
    },
    /// `target = value;` where target is an identifier, index or field access.
    Assign {
        target: Box<Node>,
        value: Box<Node>,
    },
    If {
        cond: Box<Node>,
        then_block: Box<Node>,
        else_block: Option<Box<Node>>,
    },
    While {
        cond: Box<Node>,
        body: Box<Node>,
    },
    Return {
        value: Option<Box<Node>>,
    },
    Throw {
        value: Box<Node>,
    },
    TryCatch {
        body: Box<Node>,
        binding: String,
        handler: Box<Node>,
    },
    Call {
        callee: Box<Node>,
        args: Vec<Node>,
    },
    Lambda {
        params: Box<Node>,
        body: Box<Node>,
    },
    Binary {
        op: BinaryOp,
        lhs: Box<Node>,
        rhs: Box<Node>,
    },
    Unary {
        op: UnaryOp,
        operand: Box<Node>,
    },
    Literal(Literal),
    Identifier(String),
    ListLiteral(Vec<Node>),
    RecordLiteral(Vec<(String, Node)>),
    Index {
        object: Box<Node>,
        index: Box<Node>,
    },
    FieldAccess {
        object: Box<Node>,
        field: String,
    },
    Probe {
        expr: Box<Node>,
    },
    ExampleDecl {
        name: String,
        setup: Option<Box<Node>>,
        body: Box<Node>,
        teardown: Option<Box<Node>>,
    },
}

impl Node {
    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            NodeKind::Module { .. } => "module",
            NodeKind::FunctionDecl { .. } => "function-decl",
            NodeKind::ParamList { .. } => "param-list",
            NodeKind::Block { .. } => "block",
            NodeKind::Let { .. } => "let",
            NodeKind::Assign { .. } => "assign",
            NodeKind::If { .. } => "if",
            NodeKind::While { .. } => "while",
            NodeKind::Return { .. } => "return",
            NodeKind::Throw { .. } => "throw",
            NodeKind::TryCatch { .. } => "try-catch",
            NodeKind::Call { .. } => "call",
            NodeKind::Lambda { .. } => "lambda",
            NodeKind::Binary { .. } => "binary-op",
            NodeKind::Unary { .. } => "unary-op",
            NodeKind::Literal(_) => "literal",
            NodeKind::Identifier(_) => "identifier",
            NodeKind::ListLiteral(_) => "list-literal",
            NodeKind::RecordLiteral(_) => "record-literal",
            NodeKind::Index { .. } => "index",
            NodeKind::FieldAccess { .. } => "field-access",
            NodeKind::Probe { .. } => "probe-wrapper",
            NodeKind::ExampleDecl { .. } => "example-decl",
        }
    }

    /// Direct children in source order.
    pub fn children(&self) -> Vec<&Node> {
        match &self.kind {
            NodeKind::Module { items, .. } => items.iter().collect(),
            NodeKind::FunctionDecl { params, body, .. } => vec![params, body],
            NodeKind::ParamList { .. } => Vec::new(),
            NodeKind::Block { stmts } => stmts.iter().collect(),
            NodeKind::Let { value, .. } => vec![value],
            NodeKind::Assign { target, value } => vec![target, value],
            NodeKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let mut out: Vec<&Node> = vec![cond, then_block];
                out.extend(else_block.as_deref());
                out
            }
            NodeKind::While { cond, body } => vec![cond, body],
            NodeKind::Return { value } => value.as_deref().into_iter().collect(),
            NodeKind::Throw { value } => vec![value],
            NodeKind::TryCatch { body, handler, .. } => vec![body, handler],
            NodeKind::Call { callee, args } => {
                let mut out: Vec<&Node> = vec![callee];
                out.extend(args.iter());
                out
            }
            NodeKind::Lambda { params, body } => vec![params, body],
            NodeKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            NodeKind::Unary { operand, .. } => vec![operand],
            NodeKind::Literal(_) | NodeKind::Identifier(_) => Vec::new(),
            NodeKind::ListLiteral(items) => items.iter().collect(),
            NodeKind::RecordLiteral(fields) => fields.iter().map(|(_, n)| n).collect(),
            NodeKind::Index { object, index } => vec![object, index],
            NodeKind::FieldAccess { object, .. } => vec![object],
            NodeKind::Probe { expr } => vec![expr],
            NodeKind::ExampleDecl {
                setup,
                body,
                teardown,
                ..
            } => {
                let mut out: Vec<&Node> = setup.as_deref().into_iter().collect();
                out.push(body);
                out.extend(teardown.as_deref());
                out
            }
        }
    }

    fn children_mut(&mut self) -> Vec<&mut Node> {
        match &mut self.kind {
            NodeKind::Module { items, .. } => items.iter_mut().collect(),
            NodeKind::FunctionDecl { params, body, .. } => vec![params, body],
            NodeKind::ParamList { .. } => Vec::new(),
            NodeKind::Block { stmts } => stmts.iter_mut().collect(),
            NodeKind::Let { value, .. } => vec![value],
            NodeKind::Assign { target, value } => vec![target, value],
            NodeKind::If {
                cond,
                then_block,
                else_block,
            } => {
                let mut out: Vec<&mut Node> = vec![cond, then_block];
                out.extend(else_block.as_deref_mut());
                out
            }
            NodeKind::While { cond, body } => vec![cond, body],
            NodeKind::Return { value } => value.as_deref_mut().into_iter().collect(),
            NodeKind::Throw { value } => vec![value],
            NodeKind::TryCatch { body, handler, .. } => vec![body, handler],
            NodeKind::Call { callee, args } => {
                let mut out: Vec<&mut Node> = vec![callee];
                out.extend(args.iter_mut());
                out
            }
            NodeKind::Lambda { params, body } => vec![params, body],
            NodeKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            NodeKind::Unary { operand, .. } => vec![operand],
            NodeKind::Literal(_) | NodeKind::Identifier(_) => Vec::new(),
            NodeKind::ListLiteral(items) => items.iter_mut().collect(),
            NodeKind::RecordLiteral(fields) => fields.iter_mut().map(|(_, n)| n).collect(),
            NodeKind::Index { object, index } => vec![object, index],
            NodeKind::FieldAccess { object, .. } => vec![object],
            NodeKind::Probe { expr } => vec![expr],
            NodeKind::ExampleDecl {
                setup,
                body,
                teardown,
                ..
            } => {
                let mut out: Vec<&mut Node> = setup.as_deref_mut().into_iter().collect();
                out.push(body);
                out.extend(teardown.as_deref_mut());
                out
            }
        }
    }

    /// Reassigns ids in pre-order starting at `next`; returns the next free id.
    pub(crate) fn number_preorder(&mut self, next: NodeId) -> NodeId {
        self.id = next;
        let mut next = next + 1;
        for child in self.children_mut() {
            next = child.number_preorder(next);
        }
        next
    }

    /// Pre-order walk over this node and all descendants.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Node)) {
        visit(self);
        for child in self.children() {
            child.walk(visit);
        }
    }

    pub fn block_stmts(&self) -> &[Node] {
        match &self.kind {
            NodeKind::Block { stmts } => stmts,
            _ => &[],
        }
    }

    pub fn param_names(&self) -> &[String] {
        match &self.kind {
            NodeKind::ParamList { names } => names,
            _ => &[],
        }
    }
}
