//! The scripting language hosting examples and probes: lexer, parser,
//! syntax tree, and the evaluator.

pub mod ast;
pub mod eval;
mod lexer;
mod parser;
pub mod program;
pub mod value;

use serde::Serialize;

pub use ast::{MethodId, Node, NodeId, NodeKind, SourceSpan, SpanDto};
pub use eval::{evaluate, ErrorKind, ExitKind, RuntimeError};
pub use program::SourceProgram;
pub use value::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{}:{}:{}: {message}", span.module_path, span.start.line, span.start.col)]
pub struct ParseError {
    pub span: SourceSpan,
    pub message: String,
}

/// Serializable form of a [`ParseError`].
#[derive(Debug, Clone, Serialize)]
pub struct ParseErrorDto {
    pub span: SpanDto,
    pub message: String,
}

impl ParseError {
    pub fn dto(&self) -> ParseErrorDto {
        ParseErrorDto {
            span: self.span.dto(),
            message: self.message.clone(),
        }
    }
}

/// Parses a single module with node ids starting at 0.
pub fn parse(source_text: &str, module_path: &str) -> Result<Node, ParseError> {
    parser::parse_module(source_text, module_path, 0)
}
