use std::collections::HashSet;
use std::sync::Arc;

use super::ast::{BinaryOp, Import, Literal, Node, NodeId, NodeKind, SourceSpan, UnaryOp};
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Parses one module. Node ids are assigned densely in pre-order starting
/// at `base_id`.
pub fn parse_module(source: &str, module_path: &str, base_id: NodeId) -> Result<Node, ParseError> {
    let module: Arc<str> = Arc::from(module_path);
    let tokens = tokenize(source, &module)?;
    let mut parser = Parser { tokens, pos: 0 };
    let mut root = parser.module()?;
    root.number_preorder(base_id);
    Ok(root)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn span(&self) -> SourceSpan {
        self.tokens[self.pos].span.clone()
    }

    fn prev_span(&self) -> SourceSpan {
        self.tokens[self.pos.saturating_sub(1)].span.clone()
    }

    fn advance(&mut self) -> Token {
        let tok = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn at(&self, tok: &Tok) -> bool {
        self.peek() == tok
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.at(tok) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError {
            span: self.span(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, context: &str) -> PResult<Token> {
        if self.at(&tok) {
            Ok(self.advance())
        } else {
            self.error(format!(
                "expected {} {context}, found {}",
                tok.describe(),
                self.peek().describe()
            ))
        }
    }

    fn ident(&mut self, context: &str) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.advance();
                Ok(name)
            }
            other => self.error(format!(
                "expected identifier {context}, found {}",
                other.describe()
            )),
        }
    }

    fn node(&self, start: &SourceSpan, kind: NodeKind) -> Node {
        Node {
            id: 0,
            span: start.to(&self.prev_span()),
            kind,
        }
    }

    fn module(&mut self) -> PResult<Node> {
        let start = self.span();
        let mut imports = Vec::new();
        while self.at(&Tok::Import) {
            let import_start = self.span();
            self.advance();
            let path = match self.peek().clone() {
                Tok::Str(path) => {
                    self.advance();
                    path
                }
                other => {
                    return self.error(format!("expected module path string, found {}", other.describe()))
                }
            };
            self.expect(Tok::Semi, "after import")?;
            imports.push(Import {
                path,
                span: import_start.to(&self.prev_span()),
            });
        }
        let mut items = Vec::new();
        let mut function_names = HashSet::new();
        let mut example_names = HashSet::new();
        loop {
            match self.peek() {
                Tok::Eof => break,
                Tok::Fn => {
                    let decl_span = self.span();
                    let decl = self.function_decl()?;
                    if let NodeKind::FunctionDecl { name, .. } = &decl.kind {
                        if !function_names.insert(name.clone()) {
                            return Err(ParseError {
                                span: decl_span,
                                message: format!("duplicate function name `{name}`"),
                            });
                        }
                    }
                    items.push(decl);
                }
                Tok::HashExample => {
                    let decl_span = self.span();
                    let decl = self.example_decl()?;
                    if let NodeKind::ExampleDecl { name, .. } = &decl.kind {
                        if !example_names.insert(name.clone()) {
                            return Err(ParseError {
                                span: decl_span,
                                message: format!("duplicate example name `{name}`"),
                            });
                        }
                    }
                    items.push(decl);
                }
                Tok::Import => return self.error("imports must precede all declarations"),
                other => {
                    return self.error(format!(
                        "expected `fn` or `#example` at top level, found {}",
                        other.describe()
                    ))
                }
            }
        }
        let span = if items.is_empty() && imports.is_empty() {
            start.clone()
        } else {
            start.to(&self.prev_span())
        };
        Ok(Node {
            id: 0,
            span,
            kind: NodeKind::Module { imports, items },
        })
    }

    fn function_decl(&mut self) -> PResult<Node> {
        let start = self.span();
        self.expect(Tok::Fn, "")?;
        let name = self.ident("after `fn`")?;
        let params = self.param_list()?;
        let body = self.block()?;
        Ok(self.node(
            &start,
            NodeKind::FunctionDecl {
                name,
                params: Box::new(params),
                body: Box::new(body),
            },
        ))
    }

    fn param_list(&mut self) -> PResult<Node> {
        let start = self.span();
        self.expect(Tok::LParen, "to open the parameter list")?;
        let mut names: Vec<String> = Vec::new();
        if !self.at(&Tok::RParen) {
            loop {
                let name = self.ident("in parameter list")?;
                if names.contains(&name) {
                    return Err(ParseError {
                        span: self.prev_span(),
                        message: format!("duplicate parameter `{name}`"),
                    });
                }
                names.push(name);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(Tok::RParen, "to close the parameter list")?;
        Ok(self.node(&start, NodeKind::ParamList { names }))
    }

    fn example_decl(&mut self) -> PResult<Node> {
        let start = self.span();
        self.expect(Tok::HashExample, "")?;
        let name = match self.peek().clone() {
            Tok::Str(name) => {
                self.advance();
                name
            }
            other => return self.error(format!("expected example name string, found {}", other.describe())),
        };
        let setup = if matches!(self.peek(), Tok::Ident(w) if w == "setup") {
            self.advance();
            Some(Box::new(self.block()?))
        } else {
            None
        };
        let body = Box::new(self.block()?);
        let teardown = if matches!(self.peek(), Tok::Ident(w) if w == "teardown") {
            self.advance();
            Some(Box::new(self.block()?))
        } else {
            None
        };
        Ok(self.node(
            &start,
            NodeKind::ExampleDecl {
                name,
                setup,
                body,
                teardown,
            },
        ))
    }

    fn block(&mut self) -> PResult<Node> {
        let start = self.span();
        self.expect(Tok::LBrace, "to open a block")?;
        let mut stmts = Vec::new();
        while !self.at(&Tok::RBrace) {
            if self.at(&Tok::Eof) {
                return self.error("unclosed block, expected `}`");
            }
            stmts.push(self.stmt()?);
        }
        self.advance();
        Ok(self.node(&start, NodeKind::Block { stmts }))
    }

    fn stmt(&mut self) -> PResult<Node> {
        let start = self.span();
        match self.peek() {
            Tok::Let => {
                self.advance();
                let name = self.ident("after `let`")?;
                self.expect(Tok::Assign, "in `let` binding")?;
                let value = self.expr()?;
                self.expect(Tok::Semi, "after `let` binding")?;
                Ok(self.node(
                    &start,
                    NodeKind::Let {
                        name,
                        value: Box::new(value),
                    },
                ))
            }
            Tok::If => {
                self.advance();
                let cond = self.expr()?;
                let then_block = self.block()?;
                let else_block = if self.eat(&Tok::Else) {
                    Some(Box::new(self.block()?))
                } else {
                    None
                };
                Ok(self.node(
                    &start,
                    NodeKind::If {
                        cond: Box::new(cond),
                        then_block: Box::new(then_block),
                        else_block,
                    },
                ))
            }
            Tok::While => {
                self.advance();
                let cond = self.expr()?;
                let body = self.block()?;
                Ok(self.node(
                    &start,
                    NodeKind::While {
                        cond: Box::new(cond),
                        body: Box::new(body),
                    },
                ))
            }
            Tok::Return => {
                self.advance();
                let value = if self.at(&Tok::Semi) {
                    None
                } else {
                    Some(Box::new(self.expr()?))
                };
                self.expect(Tok::Semi, "after `return`")?;
                Ok(self.node(&start, NodeKind::Return { value }))
            }
            Tok::Throw => {
                self.advance();
                let value = self.expr()?;
                self.expect(Tok::Semi, "after `throw`")?;
                Ok(self.node(
                    &start,
                    NodeKind::Throw {
                        value: Box::new(value),
                    },
                ))
            }
            Tok::Try => {
                self.advance();
                let body = self.block()?;
                self.expect(Tok::Catch, "after `try` block")?;
                self.expect(Tok::LParen, "after `catch`")?;
                let binding = self.ident("in `catch`")?;
                self.expect(Tok::RParen, "after catch binding")?;
                let handler = self.block()?;
                Ok(self.node(
                    &start,
                    NodeKind::TryCatch {
                        body: Box::new(body),
                        binding,
                        handler: Box::new(handler),
                    },
                ))
            }
            Tok::HashExample => self.error("example declarations are only allowed at top level"),
            Tok::Fn if matches!(self.peek_at(1), Tok::Ident(_)) => {
                self.error("function declarations are only allowed at top level")
            }
            Tok::Import => self.error("imports are only allowed at the start of a module"),
            _ => {
                let expr = self.expr()?;
                if self.eat(&Tok::Assign) {
                    if !matches!(
                        expr.kind,
                        NodeKind::Identifier(_) | NodeKind::Index { .. } | NodeKind::FieldAccess { .. }
                    ) {
                        return Err(ParseError {
                            span: expr.span.clone(),
                            message: "invalid assignment target".to_string(),
                        });
                    }
                    let value = self.expr()?;
                    self.expect(Tok::Semi, "after assignment")?;
                    return Ok(self.node(
                        &start,
                        NodeKind::Assign {
                            target: Box::new(expr),
                            value: Box::new(value),
                        },
                    ));
                }
                self.expect(Tok::Semi, "after expression")?;
                Ok(expr)
            }
        }
    }

    pub fn expr(&mut self) -> PResult<Node> {
        self.binary(0)
    }

    fn binary(&mut self, min_level: u8) -> PResult<Node> {
        let start = self.span();
        let mut lhs = self.unary()?;
        while let Some((op, level)) = binary_op(self.peek()) {
            if level < min_level {
                break;
            }
            self.advance();
            let rhs = self.binary(level + 1)?;
            lhs = self.node(
                &start,
                NodeKind::Binary {
                    op,
                    lhs: Box::new(lhs),
                    rhs: Box::new(rhs),
                },
            );
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Node> {
        let start = self.span();
        let op = match self.peek() {
            Tok::Bang => UnaryOp::Not,
            Tok::Minus => UnaryOp::Neg,
            _ => return self.postfix(),
        };
        self.advance();
        let operand = self.unary()?;
        Ok(self.node(
            &start,
            NodeKind::Unary {
                op,
                operand: Box::new(operand),
            },
        ))
    }

    fn postfix(&mut self) -> PResult<Node> {
        let start = self.span();
        let mut expr = self.primary()?;
        loop {
            match self.peek() {
                Tok::LParen => {
                    self.advance();
                    let mut args = Vec::new();
                    if !self.at(&Tok::RParen) {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat(&Tok::Comma) {
                                break;
                            }
                        }
                    }
                    self.expect(Tok::RParen, "to close the argument list")?;
                    expr = self.node(
                        &start,
                        NodeKind::Call {
                            callee: Box::new(expr),
                            args,
                        },
                    );
                }
                Tok::LBracket => {
                    self.advance();
                    let index = self.expr()?;
                    self.expect(Tok::RBracket, "to close the index")?;
                    expr = self.node(
                        &start,
                        NodeKind::Index {
                            object: Box::new(expr),
                            index: Box::new(index),
                        },
                    );
                }
                Tok::Dot => {
                    self.advance();
                    let field = self.ident("after `.`")?;
                    expr = self.node(
                        &start,
                        NodeKind::FieldAccess {
                            object: Box::new(expr),
                            field,
                        },
                    );
                }
                _ => return Ok(expr),
            }
        }
    }

    fn primary(&mut self) -> PResult<Node> {
        let start = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                NodeKind::Literal(Literal::Int(v))
            }
            Tok::Float(v) => {
                self.advance();
                NodeKind::Literal(Literal::Float(v))
            }
            Tok::Str(s) => {
                self.advance();
                NodeKind::Literal(Literal::Str(s))
            }
            Tok::True => {
                self.advance();
                NodeKind::Literal(Literal::Bool(true))
            }
            Tok::False => {
                self.advance();
                NodeKind::Literal(Literal::Bool(false))
            }
            Tok::Nil => {
                self.advance();
                NodeKind::Literal(Literal::Nil)
            }
            Tok::Ident(name) => {
                self.advance();
                NodeKind::Identifier(name)
            }
            Tok::LParen => {
                self.advance();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "to close the parenthesized expression")?;
                // Parentheses do not get their own node; widen the span.
                return Ok(Node {
                    span: start.to(&self.prev_span()),
                    ..inner
                });
            }
            Tok::LBracket => {
                self.advance();
                let mut items = Vec::new();
                if !self.at(&Tok::RBracket) {
                    loop {
                        items.push(self.expr()?);
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBracket, "to close the list literal")?;
                NodeKind::ListLiteral(items)
            }
            Tok::LBrace => {
                self.advance();
                let mut fields: Vec<(String, Node)> = Vec::new();
                if !self.at(&Tok::RBrace) {
                    loop {
                        let key = self.ident("as record field name")?;
                        if fields.iter().any(|(k, _)| *k == key) {
                            return Err(ParseError {
                                span: self.prev_span(),
                                message: format!("duplicate record field `{key}`"),
                            });
                        }
                        self.expect(Tok::Colon, "after record field name")?;
                        let value = self.expr()?;
                        fields.push((key, value));
                        if !self.eat(&Tok::Comma) {
                            break;
                        }
                    }
                }
                self.expect(Tok::RBrace, "to close the record literal")?;
                NodeKind::RecordLiteral(fields)
            }
            Tok::ProbeOpen => {
                self.advance();
                let expr = self.expr()?;
                if !self.at(&Tok::RBrace) {
                    return Err(ParseError {
                        span: start.clone(),
                        message: format!("unbalanced `@{{`: expected `}}`, found {}", self.peek().describe()),
                    });
                }
                self.advance();
                NodeKind::Probe {
                    expr: Box::new(expr),
                }
            }
            Tok::Fn => {
                self.advance();
                let params = self.param_list()?;
                let body = self.block()?;
                NodeKind::Lambda {
                    params: Box::new(params),
                    body: Box::new(body),
                }
            }
            other => return self.error(format!("expected expression, found {}", other.describe())),
        };
        Ok(self.node(&start, kind))
    }
}

fn binary_op(tok: &Tok) -> Option<(BinaryOp, u8)> {
    Some(match tok {
        Tok::OrOr => (BinaryOp::Or, 0),
        Tok::AndAnd => (BinaryOp::And, 1),
        Tok::EqEq => (BinaryOp::Eq, 2),
        Tok::NotEq => (BinaryOp::Ne, 2),
        Tok::Lt => (BinaryOp::Lt, 3),
        Tok::Le => (BinaryOp::Le, 3),
        Tok::Gt => (BinaryOp::Gt, 3),
        Tok::Ge => (BinaryOp::Ge, 3),
        Tok::Plus => (BinaryOp::Add, 4),
        Tok::Minus => (BinaryOp::Sub, 4),
        Tok::Star => (BinaryOp::Mul, 5),
        Tok::Slash => (BinaryOp::Div, 5),
        Tok::Percent => (BinaryOp::Rem, 5),
        _ => return None,
    })
}
