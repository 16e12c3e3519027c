//! Tree-walking evaluator.
//!
//! The evaluator reports calls, returns and probe evaluations to a
//! [`Hooks`] implementation. [`NoHooks`] gives the plain, untraced
//! semantics; the tracer plugs in its recorder here.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::ast::{BinaryOp, Literal, Node, NodeKind, SourceSpan, SpanDto, UnaryOp};
use super::program::SourceProgram;
use super::value::{Builtin, Function, Value};
use crate::tracer::snapshot::{snapshot, ValueSnapshot};

pub const DEFAULT_STEP_LIMIT: u64 = 10_000_000;
pub const DEFAULT_MAX_CALL_DEPTH: usize = 2_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    UndefinedName,
    TypeMismatch,
    Arity,
    DivisionByZero,
    IntegerOverflow,
    UncaughtThrow,
    StepLimit,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::UndefinedName => "undefined-name",
            ErrorKind::TypeMismatch => "type-mismatch",
            ErrorKind::Arity => "arity",
            ErrorKind::DivisionByZero => "division-by-zero",
            ErrorKind::IntegerOverflow => "integer-overflow",
            ErrorKind::UncaughtThrow => "uncaught-throw",
            ErrorKind::StepLimit => "step-limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[error("{}: {message} at {}:{}:{}", kind.code(), span.module_path, span.start_line, span.start_col)]
pub struct RuntimeError {
    pub kind: ErrorKind,
    pub span: SpanDto,
    pub message: String,
    /// The thrown value for `uncaught-throw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<ValueSnapshot>,
}

impl RuntimeError {
    pub fn new(kind: ErrorKind, span: &SourceSpan, message: impl Into<String>) -> Self {
        RuntimeError {
            kind,
            span: span.dto(),
            message: message.into(),
            value: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub step_limit: u64,
    pub max_call_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            step_limit: DEFAULT_STEP_LIMIT,
            max_call_depth: DEFAULT_MAX_CALL_DEPTH,
        }
    }
}

/// Raised by a hook to stop evaluation (event cap reached).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Abort;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExitKind {
    Normal,
    Exception,
}

pub trait Hooks<'p> {
    fn call_enter(&mut self, callee: &Function<'p>, site: &'p Node, args: &[Value<'p>]) -> Result<(), Abort>;
    /// Paired with every successful `call_enter`, also while unwinding.
    fn call_exit(&mut self, kind: ExitKind, value: &Value<'p>);
    fn probe_hit(&mut self, probe: &'p Node, value: &Value<'p>) -> Result<(), Abort>;
}

pub struct NoHooks;

impl<'p> Hooks<'p> for NoHooks {
    #[inline]
    fn call_enter(&mut self, _: &Function<'p>, _: &'p Node, _: &[Value<'p>]) -> Result<(), Abort> {
        Ok(())
    }
    #[inline]
    fn call_exit(&mut self, _: ExitKind, _: &Value<'p>) {}
    #[inline]
    fn probe_hit(&mut self, _: &'p Node, _: &Value<'p>) -> Result<(), Abort> {
        Ok(())
    }
}

/// Non-local exits out of an evaluation.
pub enum Unwind<'p> {
    Throw { value: Value<'p>, span: SourceSpan },
    Error(RuntimeError),
    Abort,
}

impl<'p> Unwind<'p> {
    /// The value reported with an exception exit.
    pub fn exit_value(&self) -> Value<'p> {
        match self {
            Unwind::Throw { value, .. } => value.clone(),
            Unwind::Error(e) => Value::str(&e.message),
            Unwind::Abort => Value::Nil,
        }
    }

    pub fn into_error(self) -> Option<RuntimeError> {
        match self {
            Unwind::Throw { value, span } => {
                let mut err = RuntimeError::new(
                    ErrorKind::UncaughtThrow,
                    &span,
                    format!("uncaught throw: {value}"),
                );
                err.value = Some(snapshot(&value));
                Some(err)
            }
            Unwind::Error(e) => Some(e),
            Unwind::Abort => None,
        }
    }
}

impl From<RuntimeError> for Unwind<'_> {
    fn from(e: RuntimeError) -> Self {
        Unwind::Error(e)
    }
}

/// A lexical scope.
pub struct Env<'p> {
    vars: RefCell<Vec<(&'p str, Value<'p>)>>,
    parent: Option<Rc<Env<'p>>>,
    module: &'p str,
}

impl<'p> Env<'p> {
    pub fn root(module: &'p str) -> Rc<Self> {
        Rc::new(Env {
            vars: RefCell::new(Vec::new()),
            parent: None,
            module,
        })
    }

    pub fn child(parent: &Rc<Env<'p>>) -> Rc<Self> {
        Rc::new(Env {
            vars: RefCell::new(Vec::new()),
            parent: Some(parent.clone()),
            module: parent.module,
        })
    }

    pub fn module(&self) -> &'p str {
        self.module
    }

    pub fn define(&self, name: &'p str, value: Value<'p>) {
        let mut vars = self.vars.borrow_mut();
        if let Some(slot) = vars.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = value;
        } else {
            vars.push((name, value));
        }
    }

    pub fn get(&self, name: &str) -> Option<Value<'p>> {
        let mut env = self;
        loop {
            if let Some((_, v)) = env.vars.borrow().iter().find(|(n, _)| *n == name) {
                return Some(v.clone());
            }
            env = env.parent.as_deref()?;
        }
    }

    fn set(&self, name: &str, value: Value<'p>) -> bool {
        let mut env = self;
        loop {
            if let Some(slot) = env.vars.borrow_mut().iter_mut().find(|(n, _)| *n == name) {
                slot.1 = value;
                return true;
            }
            match env.parent.as_deref() {
                Some(p) => env = p,
                None => return false,
            }
        }
    }
}

enum Flow<'p> {
    Normal,
    Return(Value<'p>),
}

type EvalResult<'p, T> = Result<T, Unwind<'p>>;

pub struct Interpreter<'p, H> {
    program: &'p SourceProgram,
    hooks: H,
    limits: Limits,
    steps: u64,
    depth: usize,
    output: Vec<String>,
}

impl<'p, H: Hooks<'p>> Interpreter<'p, H> {
    pub fn new(program: &'p SourceProgram, hooks: H) -> Self {
        Interpreter::with_limits(program, hooks, Limits::default())
    }

    pub fn with_limits(program: &'p SourceProgram, hooks: H, limits: Limits) -> Self {
        Interpreter {
            program,
            hooks,
            limits,
            steps: 0,
            depth: 0,
            output: Vec::new(),
        }
    }

    pub fn hooks(&self) -> &H {
        &self.hooks
    }

    pub fn hooks_mut(&mut self) -> &mut H {
        &mut self.hooks
    }

    pub fn into_hooks(self) -> H {
        self.hooks
    }

    /// Lines written by `print`.
    pub fn output(&self) -> &[String] {
        &self.output
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Runs the statements of `block` directly in `env` (no new scope).
    /// Yields the returned value, else the value of a trailing expression
    /// statement, else nil.
    pub fn run_block_in(&mut self, block: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, Value<'p>> {
        let stmts = block.block_stmts();
        let mut last = Value::Nil;
        for (i, stmt) in stmts.iter().enumerate() {
            if is_expression(stmt) {
                let v = self.eval(stmt, env)?;
                if i + 1 == stmts.len() {
                    last = v;
                }
            } else if let Flow::Return(v) = self.exec(stmt, env)? {
                return Ok(v);
            }
        }
        Ok(last)
    }

    fn step(&mut self, node: &Node) -> EvalResult<'p, ()> {
        self.steps += 1;
        if self.steps > self.limits.step_limit {
            return Err(RuntimeError::new(
                ErrorKind::StepLimit,
                &node.span,
                format!("step limit of {} exceeded", self.limits.step_limit),
            )
            .into());
        }
        Ok(())
    }

    fn exec_block(&mut self, block: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, Flow<'p>> {
        let scope = Env::child(env);
        for stmt in block.block_stmts() {
            if let Flow::Return(v) = self.exec(stmt, &scope)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec(&mut self, stmt: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, Flow<'p>> {
        self.step(stmt)?;
        match &stmt.kind {
            NodeKind::Let { name, value } => {
                let v = self.eval(value, env)?;
                env.define(name, v);
                Ok(Flow::Normal)
            }
            NodeKind::Assign { target, value } => {
                self.assign(target, value, env)?;
                Ok(Flow::Normal)
            }
            NodeKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.condition(cond, env)? {
                    self.exec_block(then_block, env)
                } else if let Some(else_block) = else_block {
                    self.exec_block(else_block, env)
                } else {
                    Ok(Flow::Normal)
                }
            }
            NodeKind::While { cond, body } => {
                while self.condition(cond, env)? {
                    if let Flow::Return(v) = self.exec_block(body, env)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Normal)
            }
            NodeKind::Return { value } => {
                let v = match value {
                    Some(v) => self.eval(v, env)?,
                    None => Value::Nil,
                };
                Ok(Flow::Return(v))
            }
            NodeKind::Throw { value } => {
                let v = self.eval(value, env)?;
                Err(Unwind::Throw {
                    value: v,
                    span: stmt.span.clone(),
                })
            }
            NodeKind::TryCatch {
                body,
                binding,
                handler,
            } => match self.exec_block(body, env) {
                Err(Unwind::Throw { value, .. }) => {
                    let scope = Env::child(env);
                    scope.define(binding, value);
                    self.exec_block(handler, &scope)
                }
                other => other,
            },
            _ => {
                self.eval(stmt, env)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn condition(&mut self, cond: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, bool> {
        match self.eval(cond, env)? {
            Value::Bool(b) => Ok(b),
            other => Err(type_error(
                &cond.span,
                format!("condition must be a boolean, got {}", other.type_name()),
            )),
        }
    }

    fn assign(&mut self, target: &'p Node, value: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, ()> {
        match &target.kind {
            NodeKind::Identifier(name) => {
                let v = self.eval(value, env)?;
                if env.set(name, v) {
                    Ok(())
                } else {
                    Err(RuntimeError::new(
                        ErrorKind::UndefinedName,
                        &target.span,
                        format!("assignment to undeclared variable `{name}`"),
                    )
                    .into())
                }
            }
            NodeKind::Index { object, index } => {
                let container = self.eval(object, env)?;
                let key = self.eval(index, env)?;
                let v = self.eval(value, env)?;
                match (&container, &key) {
                    (Value::List(items), Value::Int(i)) => {
                        let mut items = items.borrow_mut();
                        let len = items.len();
                        match usize::try_from(*i).ok().filter(|i| *i < len) {
                            Some(i) => {
                                items[i] = v;
                                Ok(())
                            }
                            None => Err(type_error(
                                &target.span,
                                format!("index {i} out of range for list of length {len}"),
                            )),
                        }
                    }
                    (Value::Record(fields), Value::Str(k)) => {
                        fields.borrow_mut().insert(k.to_string(), v);
                        Ok(())
                    }
                    _ => Err(type_error(
                        &target.span,
                        format!(
                            "cannot assign into {} with {} index",
                            container.type_name(),
                            key.type_name()
                        ),
                    )),
                }
            }
            NodeKind::FieldAccess { object, field } => {
                let container = self.eval(object, env)?;
                let v = self.eval(value, env)?;
                match container {
                    Value::Record(fields) => {
                        fields.borrow_mut().insert(field.clone(), v);
                        Ok(())
                    }
                    other => Err(type_error(
                        &target.span,
                        format!("cannot set field `{field}` on {}", other.type_name()),
                    )),
                }
            }
            _ => Err(type_error(&target.span, "invalid assignment target")),
        }
    }

    pub fn eval(&mut self, expr: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, Value<'p>> {
        self.step(expr)?;
        match &expr.kind {
            NodeKind::Literal(lit) => Ok(match lit {
                Literal::Nil => Value::Nil,
                Literal::Bool(b) => Value::Bool(*b),
                Literal::Int(i) => Value::Int(*i),
                Literal::Float(x) => Value::Float(*x),
                Literal::Str(s) => Value::str(s),
            }),
            NodeKind::Identifier(name) => self.lookup(name, env, &expr.span),
            NodeKind::ListLiteral(items) => {
                let mut out = Vec::with_capacity(items.len());
                for item in items {
                    out.push(self.eval(item, env)?);
                }
                Ok(Value::list(out))
            }
            NodeKind::RecordLiteral(fields) => {
                let mut out = BTreeMap::new();
                for (k, v) in fields {
                    let v = self.eval(v, env)?;
                    out.insert(k.clone(), v);
                }
                Ok(Value::record(out))
            }
            NodeKind::Lambda { .. } => Ok(Value::Function(Rc::new(Function::Lambda {
                node: expr,
                env: env.clone(),
            }))),
            NodeKind::Probe { expr: inner } => {
                let v = self.eval(inner, env)?;
                self.hooks.probe_hit(expr, &v).map_err(|Abort| Unwind::Abort)?;
                Ok(v)
            }
            NodeKind::Unary { op, operand } => {
                let v = self.eval(operand, env)?;
                unary(*op, v, &expr.span).map_err(Unwind::Error)
            }
            NodeKind::Binary { op, lhs, rhs } => match op {
                BinaryOp::And | BinaryOp::Or => {
                    let short = *op == BinaryOp::Or;
                    let l = self.logic_operand(lhs, env)?;
                    if l == short {
                        return Ok(Value::Bool(short));
                    }
                    Ok(Value::Bool(self.logic_operand(rhs, env)?))
                }
                _ => {
                    let l = self.eval(lhs, env)?;
                    let r = self.eval(rhs, env)?;
                    binary(*op, l, r, &expr.span).map_err(Unwind::Error)
                }
            },
            NodeKind::Index { object, index } => {
                let container = self.eval(object, env)?;
                let key = self.eval(index, env)?;
                index_value(&container, &key, &expr.span).map_err(Unwind::Error)
            }
            NodeKind::FieldAccess { object, field } => {
                if let NodeKind::Identifier(alias) = &object.kind {
                    if env.get(alias).is_none() && self.program.has_import_alias(env.module(), alias) {
                        return match self.program.lookup_qualified(env.module(), alias, field) {
                            Some((id, decl)) => Ok(Value::Function(Rc::new(Function::Named { id, decl }))),
                            None => Err(RuntimeError::new(
                                ErrorKind::UndefinedName,
                                &expr.span,
                                format!("`{alias}.{field}` is not defined"),
                            )
                            .into()),
                        };
                    }
                }
                match self.eval(object, env)? {
                    Value::Record(fields) => Ok(fields.borrow().get(field).cloned().unwrap_or(Value::Nil)),
                    other => Err(type_error(
                        &expr.span,
                        format!("cannot read field `{field}` of {}", other.type_name()),
                    )),
                }
            }
            NodeKind::Call { callee, args } => {
                let f = self.eval(callee, env)?;
                let mut values = Vec::with_capacity(args.len());
                for arg in args {
                    values.push(self.eval(arg, env)?);
                }
                match f {
                    Value::Function(f) => self.call(&f, values, expr),
                    other => Err(type_error(
                        &expr.span,
                        format!("cannot call a value of type {}", other.type_name()),
                    )),
                }
            }
            _ => Err(type_error(
                &expr.span,
                format!("{} is not an expression", expr.kind_name()),
            )),
        }
    }

    fn logic_operand(&mut self, node: &'p Node, env: &Rc<Env<'p>>) -> EvalResult<'p, bool> {
        match self.eval(node, env)? {
            Value::Bool(b) => Ok(b),
            other => Err(type_error(
                &node.span,
                format!("logical operand must be a boolean, got {}", other.type_name()),
            )),
        }
    }

    fn lookup(&self, name: &str, env: &Rc<Env<'p>>, span: &SourceSpan) -> EvalResult<'p, Value<'p>> {
        if let Some(v) = env.get(name) {
            return Ok(v);
        }
        if let Some((id, decl)) = self.program.lookup_function(env.module(), name) {
            return Ok(Value::Function(Rc::new(Function::Named { id, decl })));
        }
        if let Some(b) = Builtin::by_name(name) {
            return Ok(Value::Function(Rc::new(Function::Builtin(b))));
        }
        Err(RuntimeError::new(ErrorKind::UndefinedName, span, format!("`{name}` is not defined")).into())
    }

    fn call(&mut self, f: &Function<'p>, args: Vec<Value<'p>>, site: &'p Node) -> EvalResult<'p, Value<'p>> {
        let (params, body, scope) = match f {
            Function::Builtin(b) => return self.call_builtin(*b, args, site),
            Function::Named { id, decl } => {
                let NodeKind::FunctionDecl { params, body, .. } = &decl.kind else {
                    unreachable!("named function points at a declaration");
                };
                (&**params, &**body, Env::root(&id.module))
            }
            Function::Lambda { node, env } => {
                let NodeKind::Lambda { params, body } = &node.kind else {
                    unreachable!("lambda value points at a lambda node");
                };
                (&**params, &**body, Env::child(env))
            }
        };
        let names = params.param_names();
        if names.len() != args.len() {
            return Err(RuntimeError::new(
                ErrorKind::Arity,
                &site.span,
                format!(
                    "{} expects {} argument(s), got {}",
                    f.label(),
                    names.len(),
                    args.len()
                ),
            )
            .into());
        }
        if self.depth >= self.limits.max_call_depth {
            return Err(RuntimeError::new(
                ErrorKind::StepLimit,
                &site.span,
                format!("call depth limit of {} exceeded", self.limits.max_call_depth),
            )
            .into());
        }
        self.hooks
            .call_enter(f, site, &args)
            .map_err(|Abort| Unwind::Abort)?;
        for (name, value) in names.iter().zip(args) {
            scope.define(name, value);
        }
        self.depth += 1;
        let outcome = self.exec_block(body, &scope);
        self.depth -= 1;
        match outcome {
            Ok(flow) => {
                let v = match flow {
                    Flow::Return(v) => v,
                    Flow::Normal => Value::Nil,
                };
                self.hooks.call_exit(ExitKind::Normal, &v);
                Ok(v)
            }
            Err(unwind) => {
                self.hooks.call_exit(ExitKind::Exception, &unwind.exit_value());
                Err(unwind)
            }
        }
    }

    fn call_builtin(&mut self, b: Builtin, args: Vec<Value<'p>>, site: &'p Node) -> EvalResult<'p, Value<'p>> {
        let expected = match b {
            Builtin::Len | Builtin::Print => 1,
            Builtin::Push => 2,
        };
        if args.len() != expected {
            return Err(RuntimeError::new(
                ErrorKind::Arity,
                &site.span,
                format!("{} expects {expected} argument(s), got {}", b.name(), args.len()),
            )
            .into());
        }
        let mut args = args.into_iter();
        let first = args.next().unwrap_or(Value::Nil);
        match b {
            Builtin::Len => match &first {
                Value::List(items) => Ok(Value::Int(items.borrow().len() as i64)),
                Value::Record(fields) => Ok(Value::Int(fields.borrow().len() as i64)),
                Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
                other => Err(type_error(&site.span, format!("len of {}", other.type_name()))),
            },
            Builtin::Push => match &first {
                Value::List(items) => {
                    items.borrow_mut().push(args.next().unwrap_or(Value::Nil));
                    Ok(Value::Nil)
                }
                other => Err(type_error(&site.span, format!("push onto {}", other.type_name()))),
            },
            Builtin::Print => {
                self.output.push(first.to_string());
                Ok(Value::Nil)
            }
        }
    }
}

pub fn is_expression(node: &Node) -> bool {
    !matches!(
        node.kind,
        NodeKind::Let { .. }
            | NodeKind::Assign { .. }
            | NodeKind::If { .. }
            | NodeKind::While { .. }
            | NodeKind::Return { .. }
            | NodeKind::Throw { .. }
            | NodeKind::TryCatch { .. }
    )
}

fn type_error<'p>(span: &SourceSpan, message: impl Into<String>) -> Unwind<'p> {
    Unwind::Error(RuntimeError::new(ErrorKind::TypeMismatch, span, message))
}

fn overflow(span: &SourceSpan, what: &str) -> RuntimeError {
    RuntimeError::new(ErrorKind::IntegerOverflow, span, format!("{what} overflows"))
}

fn finite<'p>(x: f64, span: &SourceSpan) -> Result<Value<'p>, RuntimeError> {
    if x.is_finite() {
        Ok(Value::Float(x))
    } else {
        Err(RuntimeError::new(
            ErrorKind::IntegerOverflow,
            span,
            "float result is not finite",
        ))
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn unary<'p>(op: UnaryOp, v: Value<'p>, span: &SourceSpan) -> Result<Value<'p>, RuntimeError> {
    match (op, v) {
        (UnaryOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnaryOp::Neg, Value::Int(i)) => i.checked_neg().map(Value::Int).ok_or_else(|| overflow(span, "negation")),
        (UnaryOp::Neg, Value::Float(x)) => Ok(Value::Float(-x)),
        (op, v) => Err(RuntimeError::new(
            ErrorKind::TypeMismatch,
            span,
            format!(
                "operator `{}` does not apply to {}",
                if op == UnaryOp::Not { "!" } else { "-" },
                v.type_name()
            ),
        )),
    }
}

fn binary<'p>(op: BinaryOp, l: Value<'p>, r: Value<'p>, span: &SourceSpan) -> Result<Value<'p>, RuntimeError> {
    use BinaryOp::*;
    let mismatch = |l: &Value, r: &Value| {
        RuntimeError::new(
            ErrorKind::TypeMismatch,
            span,
            format!(
                "operator `{}` does not apply to {} and {}",
                op.symbol(),
                l.type_name(),
                r.type_name()
            ),
        )
    };
    match op {
        Eq => Ok(Value::Bool(l.language_eq(&r))),
        Ne => Ok(Value::Bool(!l.language_eq(&r))),
        Lt | Le | Gt | Ge => {
            let ord = match (&l, &r) {
                (Value::Int(a), Value::Int(b)) => a.partial_cmp(b),
                (Value::Str(a), Value::Str(b)) => a.partial_cmp(b),
                _ => match (as_f64(&l), as_f64(&r)) {
                    (Some(a), Some(b)) => a.partial_cmp(&b),
                    _ => return Err(mismatch(&l, &r)),
                },
            };
            let Some(ord) = ord else {
                return Ok(Value::Bool(false));
            };
            Ok(Value::Bool(match op {
                Lt => ord.is_lt(),
                Le => ord.is_le(),
                Gt => ord.is_gt(),
                _ => ord.is_ge(),
            }))
        }
        Add if matches!(l, Value::Str(_)) || matches!(r, Value::Str(_)) => {
            Ok(Value::str(&format!("{l}{r}")))
        }
        Add | Sub | Mul | Div | Rem => match (&l, &r) {
            (Value::Int(a), Value::Int(b)) => {
                let (a, b) = (*a, *b);
                if matches!(op, Div | Rem) && b == 0 {
                    return Err(RuntimeError::new(ErrorKind::DivisionByZero, span, "division by zero"));
                }
                let result = match op {
                    Add => a.checked_add(b),
                    Sub => a.checked_sub(b),
                    Mul => a.checked_mul(b),
                    Div => a.checked_div(b),
                    _ => a.checked_rem(b),
                };
                result
                    .map(Value::Int)
                    .ok_or_else(|| overflow(span, &format!("`{a} {} {b}`", op.symbol())))
            }
            _ => {
                let (Some(a), Some(b)) = (as_f64(&l), as_f64(&r)) else {
                    return Err(mismatch(&l, &r));
                };
                if matches!(op, Div | Rem) && b == 0.0 {
                    return Err(RuntimeError::new(ErrorKind::DivisionByZero, span, "division by zero"));
                }
                finite(
                    match op {
                        Add => a + b,
                        Sub => a - b,
                        Mul => a * b,
                        Div => a / b,
                        _ => a % b,
                    },
                    span,
                )
            }
        },
        And | Or => unreachable!("short-circuit operators are evaluated lazily"),
    }
}

fn index_value<'p>(container: &Value<'p>, key: &Value<'p>, span: &SourceSpan) -> Result<Value<'p>, RuntimeError> {
    match (container, key) {
        (Value::List(items), Value::Int(i)) => Ok(usize::try_from(*i)
            .ok()
            .and_then(|i| items.borrow().get(i).cloned())
            .unwrap_or(Value::Nil)),
        (Value::Record(fields), Value::Str(k)) => Ok(fields.borrow().get(&**k).cloned().unwrap_or(Value::Nil)),
        (Value::Str(s), Value::Int(i)) => Ok(usize::try_from(*i)
            .ok()
            .and_then(|i| s.chars().nth(i))
            .map(|c| Value::str(&c.to_string()))
            .unwrap_or(Value::Nil)),
        _ => Err(RuntimeError::new(
            ErrorKind::TypeMismatch,
            span,
            format!("cannot index {} with {}", container.type_name(), key.type_name()),
        )),
    }
}

/// Evaluates `entry` (a block) without instrumentation, in a fresh scope of
/// the block's module.
pub fn evaluate<'p>(program: &'p SourceProgram, entry: &'p Node) -> Result<Value<'p>, RuntimeError> {
    evaluate_with_limits(program, entry, Limits::default())
}

pub fn evaluate_with_limits<'p>(
    program: &'p SourceProgram,
    entry: &'p Node,
    limits: Limits,
) -> Result<Value<'p>, RuntimeError> {
    let mut interp = Interpreter::with_limits(program, NoHooks, limits);
    let env = Env::root(module_of(program, entry));
    interp
        .run_block_in(entry, &env)
        .map_err(|u| u.into_error().expect("untraced evaluation never aborts"))
}

/// The program's own copy of the module path of `node`, so that it lives as
/// long as the program.
pub(crate) fn module_of<'p>(program: &'p SourceProgram, node: &Node) -> &'p str {
    program
        .module_paths()
        .find(|p| *p == &*node.span.module_path)
        .unwrap_or("")
}
