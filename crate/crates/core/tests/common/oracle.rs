//! Reference interpreter that builds the call tree directly while it
//! evaluates, with no event stream in between.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;

use crosscut::analysis::{CallTree, NodeData, NodeIdx, ROOT};
use crosscut::lang::ast::{BinaryOp, Literal, UnaryOp};
use crosscut::lang::{ErrorKind, ExitKind, Node, NodeKind, SourceProgram};
use serde_json::{json, Value as Json};

/// Tree shape shared by the oracle and the tracer's call tree.
#[derive(Debug, Clone)]
pub enum ONode {
    Call {
        method: String,
        args: Vec<Json>,
        exception: bool,
        /// None when the frame unwound because of a runtime error; the
        /// recorded value is then an error message and is not compared.
        result: Option<Json>,
        children: Vec<ONode>,
    },
    Hit {
        probe: String,
        value: Json,
    },
}

impl ONode {
    pub fn calls(&self) -> usize {
        match self {
            ONode::Call { children, .. } => 1 + children.iter().map(ONode::calls).sum::<usize>(),
            ONode::Hit { .. } => 0,
        }
    }

    pub fn hits(&self) -> usize {
        match self {
            ONode::Call { children, .. } => children.iter().map(ONode::hits).sum(),
            ONode::Hit { .. } => 1,
        }
    }

    pub fn has_exception(&self) -> bool {
        match self {
            ONode::Call {
                exception, children, ..
            } => *exception || children.iter().any(ONode::has_exception),
            ONode::Hit { .. } => false,
        }
    }

    /// Methods of invocations in pre-order, excluding this node.
    pub fn invoked_methods(&self, out: &mut Vec<String>) {
        if let ONode::Call { children, .. } = self {
            for c in children {
                if let ONode::Call { method, .. } = c {
                    out.push(method.clone());
                }
                c.invoked_methods(out);
            }
        }
    }
}

/// Structural equality; an unknown result matches any result.
pub fn same_tree(a: &ONode, b: &ONode) -> bool {
    match (a, b) {
        (
            ONode::Call {
                method: m1,
                args: a1,
                exception: e1,
                result: r1,
                children: c1,
            },
            ONode::Call {
                method: m2,
                args: a2,
                exception: e2,
                result: r2,
                children: c2,
            },
        ) => {
            m1 == m2
                && a1 == a2
                && e1 == e2
                && match (r1, r2) {
                    (Some(x), Some(y)) => x == y,
                    _ => true,
                }
                && c1.len() == c2.len()
                && c1.iter().zip(c2).all(|(x, y)| same_tree(x, y))
        }
        (ONode::Hit { probe: p1, value: v1 }, ONode::Hit { probe: p2, value: v2 }) => p1 == p2 && v1 == v2,
        _ => false,
    }
}

/// The tracer's tree in oracle form.
pub fn normalize(tree: &CallTree) -> ONode {
    fn go(tree: &CallTree, idx: NodeIdx) -> ONode {
        match &tree.node(idx).data {
            NodeData::Invocation(inv) => ONode::Call {
                method: inv.method.to_string(),
                args: inv.args.iter().map(|a| a.to_json()).collect(),
                exception: inv.exit_kind == ExitKind::Exception,
                result: Some(inv.result.to_json()),
                children: tree.node(idx).children.iter().map(|&c| go(tree, c)).collect(),
            },
            NodeData::ProbeHit(hit) => ONode::Hit {
                probe: hit.probe_id.clone(),
                value: hit.value.to_json(),
            },
        }
    }
    go(tree, ROOT)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Value(Json),
    Error(ErrorKind),
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    /// None when setup failed.
    pub tree: Option<ONode>,
    pub outcome: Outcome,
}

#[derive(Clone)]
enum OVal<'p> {
    Nil,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Rc<RefCell<Vec<OVal<'p>>>>),
    Rec(Rc<RefCell<BTreeMap<String, OVal<'p>>>>),
    Named(&'p str, &'p str, &'p Node),
    Lambda(&'p Node, Rc<Scope<'p>>),
    Builtin(&'static str),
}

struct Scope<'p> {
    vars: RefCell<HashMap<String, OVal<'p>>>,
    parent: Option<Rc<Scope<'p>>>,
    module: &'p str,
}

impl<'p> Scope<'p> {
    fn top(module: &'p str) -> Rc<Self> {
        Rc::new(Scope {
            vars: RefCell::new(HashMap::new()),
            parent: None,
            module,
        })
    }

    fn under(parent: &Rc<Scope<'p>>) -> Rc<Self> {
        Rc::new(Scope {
            vars: RefCell::new(HashMap::new()),
            parent: Some(parent.clone()),
            module: parent.module,
        })
    }

    fn read(&self, name: &str) -> Option<OVal<'p>> {
        if let Some(v) = self.vars.borrow().get(name) {
            return Some(v.clone());
        }
        self.parent.as_ref()?.read(name)
    }

    fn write(&self, name: &str, v: OVal<'p>) -> bool {
        if let Some(slot) = self.vars.borrow_mut().get_mut(name) {
            *slot = v;
            return true;
        }
        match &self.parent {
            Some(p) => p.write(name, v),
            None => false,
        }
    }
}

enum Esc<'p> {
    Throw(OVal<'p>),
    Fail(ErrorKind),
}

enum Ctl<'p> {
    Next,
    Ret(OVal<'p>),
}

type R<'p, T> = Result<T, Esc<'p>>;

fn fail<'p, T>(kind: ErrorKind) -> R<'p, T> {
    Err(Esc::Fail(kind))
}

fn display(v: &OVal) -> String {
    match v {
        OVal::Nil => "nil".into(),
        OVal::Bool(b) => b.to_string(),
        OVal::Int(i) => i.to_string(),
        OVal::Float(x) => format!("{x:?}"),
        OVal::Str(s) => s.clone(),
        OVal::List(items) => format!(
            "[{}]",
            items.borrow().iter().map(display).collect::<Vec<_>>().join(", ")
        ),
        OVal::Rec(fields) => format!(
            "{{{}}}",
            fields
                .borrow()
                .iter()
                .map(|(k, v)| format!("{k}: {}", display(v)))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        OVal::Named(m, n, _) => format!("{m}.{n}"),
        OVal::Lambda(node, _) => format!("<lambda>@{}", node.span),
        OVal::Builtin(name) => name.to_string(),
    }
}

/// JSON form of a recorded value. Generated programs stay far below the
/// snapshot depth and width limits, so none are applied here.
fn to_json(v: &OVal) -> Json {
    match v {
        OVal::Nil => Json::Null,
        OVal::Bool(b) => json!(b),
        OVal::Int(i) => json!(i),
        OVal::Float(x) => json!(x),
        OVal::Str(s) => json!(s),
        OVal::List(items) => Json::Array(items.borrow().iter().map(to_json).collect()),
        OVal::Rec(fields) => Json::Object(
            fields
                .borrow()
                .iter()
                .map(|(k, v)| {
                    let key = if k.starts_with('$') { format!("${k}") } else { k.clone() };
                    (key, to_json(v))
                })
                .collect(),
        ),
        other => json!({ "$fn": display(other) }),
    }
}

fn num(v: &OVal) -> Option<f64> {
    match v {
        OVal::Int(i) => Some(*i as f64),
        OVal::Float(x) => Some(*x),
        _ => None,
    }
}

fn equal<'p>(a: &OVal<'p>, b: &OVal<'p>) -> bool {
    match (a, b) {
        (OVal::Nil, OVal::Nil) => true,
        (OVal::Bool(x), OVal::Bool(y)) => x == y,
        (OVal::Str(x), OVal::Str(y)) => x == y,
        (OVal::Int(x), OVal::Int(y)) => x == y,
        (OVal::Int(_) | OVal::Float(_), OVal::Int(_) | OVal::Float(_)) => num(a) == num(b),
        (OVal::List(x), OVal::List(y)) => Rc::ptr_eq(x, y),
        (OVal::Rec(x), OVal::Rec(y)) => Rc::ptr_eq(x, y),
        (OVal::Named(m1, n1, _), OVal::Named(m2, n2, _)) => m1 == m2 && n1 == n2,
        (OVal::Builtin(x), OVal::Builtin(y)) => x == y,
        (OVal::Lambda(n1, s1), OVal::Lambda(n2, s2)) => n1.id == n2.id && Rc::ptr_eq(s1, s2),
        _ => false,
    }
}

struct Frame {
    method: String,
    args: Vec<Json>,
    children: Vec<ONode>,
}

pub struct Oracle<'p> {
    program: &'p SourceProgram,
    functions: HashMap<(String, String), (&'p str, &'p str, &'p Node)>,
    scope: Option<BTreeSet<String>>,
    open: Vec<Frame>,
    /// Per open call: whether it has a frame in `open`.
    traced: Vec<bool>,
    suppressed: usize,
    depth: usize,
    recording: bool,
}

impl<'p> Oracle<'p> {
    /// `scope` None traces every module.
    pub fn new(program: &'p SourceProgram, scope: Option<BTreeSet<String>>) -> Self {
        let mut functions = HashMap::new();
        for (path, root) in program.modules() {
            let NodeKind::Module { items, .. } = &root.kind else { continue };
            for item in items {
                if let NodeKind::FunctionDecl { name, .. } = &item.kind {
                    functions.insert((path.to_string(), name.clone()), (path, name.as_str(), item));
                }
            }
        }
        Oracle {
            program,
            functions,
            scope,
            open: Vec::new(),
            traced: Vec::new(),
            suppressed: 0,
            depth: 0,
            recording: false,
        }
    }

    /// Runs the example `name` declared in `module`.
    pub fn run_example(mut self, module: &'p str, name: &str) -> OracleRun {
        let root = self.program.module(module).expect("module exists");
        let NodeKind::Module { items, .. } = &root.kind else { unreachable!() };
        let (setup, body) = items
            .iter()
            .find_map(|i| match &i.kind {
                NodeKind::ExampleDecl { name: n, setup, body, .. } if n == name => Some((setup, body)),
                _ => None,
            })
            .expect("example exists");
        let module = self.program.module_paths().find(|p| *p == module).unwrap();
        let env = Scope::top(module);
        if let Some(setup) = setup {
            if let Err(e) = self.block_value(setup, &env) {
                return OracleRun {
                    tree: None,
                    outcome: Outcome::Error(kind_of(&e)),
                };
            }
        }
        self.recording = true;
        self.open.push(Frame {
            method: format!("{module}#{name}"),
            args: Vec::new(),
            children: Vec::new(),
        });
        let r = self.block_value(body, &env);
        let frame = self.open.pop().expect("root frame");
        let (exception, result, outcome) = match &r {
            Ok(v) => (false, Some(to_json(v)), Outcome::Value(to_json(v))),
            Err(Esc::Throw(v)) => (true, Some(to_json(v)), Outcome::Error(ErrorKind::UncaughtThrow)),
            Err(Esc::Fail(k)) => (true, None, Outcome::Error(*k)),
        };
        OracleRun {
            tree: Some(ONode::Call {
                method: frame.method,
                args: frame.args,
                exception,
                result,
                children: frame.children,
            }),
            outcome,
        }
    }

    fn in_scope(&self, module: &str) -> bool {
        self.scope.as_ref().is_none_or(|s| s.contains(module))
    }

    fn block_value(&mut self, block: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, OVal<'p>> {
        let NodeKind::Block { stmts } = &block.kind else { unreachable!() };
        let mut last = OVal::Nil;
        for (i, s) in stmts.iter().enumerate() {
            if is_statement(s) {
                if let Ctl::Ret(v) = self.stmt(s, env)? {
                    return Ok(v);
                }
            } else {
                let v = self.expr(s, env)?;
                if i + 1 == stmts.len() {
                    last = v;
                }
            }
        }
        Ok(last)
    }

    fn block(&mut self, block: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, Ctl<'p>> {
        let NodeKind::Block { stmts } = &block.kind else { unreachable!() };
        let inner = Scope::under(env);
        for s in stmts {
            if let Ctl::Ret(v) = self.stmt(s, &inner)? {
                return Ok(Ctl::Ret(v));
            }
        }
        Ok(Ctl::Next)
    }

    fn truth(&mut self, cond: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, bool> {
        match self.expr(cond, env)? {
            OVal::Bool(b) => Ok(b),
            _ => fail(ErrorKind::TypeMismatch),
        }
    }

    fn stmt(&mut self, s: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, Ctl<'p>> {
        match &s.kind {
            NodeKind::Let { name, value } => {
                let v = self.expr(value, env)?;
                env.vars.borrow_mut().insert(name.clone(), v);
                Ok(Ctl::Next)
            }
            NodeKind::Assign { target, value } => {
                self.assign(target, value, env)?;
                Ok(Ctl::Next)
            }
            NodeKind::If {
                cond,
                then_block,
                else_block,
            } => {
                if self.truth(cond, env)? {
                    self.block(then_block, env)
                } else if let Some(e) = else_block {
                    self.block(e, env)
                } else {
                    Ok(Ctl::Next)
                }
            }
            NodeKind::While { cond, body } => {
                while self.truth(cond, env)? {
                    if let Ctl::Ret(v) = self.block(body, env)? {
                        return Ok(Ctl::Ret(v));
                    }
                }
                Ok(Ctl::Next)
            }
            NodeKind::Return { value } => Ok(Ctl::Ret(match value {
                Some(v) => self.expr(v, env)?,
                None => OVal::Nil,
            })),
            NodeKind::Throw { value } => {
                let v = self.expr(value, env)?;
                Err(Esc::Throw(v))
            }
            NodeKind::TryCatch {
                body,
                binding,
                handler,
            } => match self.block(body, env) {
                Err(Esc::Throw(v)) => {
                    let scope = Scope::under(env);
                    scope.vars.borrow_mut().insert(binding.clone(), v);
                    self.block(handler, &scope)
                }
                other => other,
            },
            _ => {
                self.expr(s, env)?;
                Ok(Ctl::Next)
            }
        }
    }

    fn assign(&mut self, target: &'p Node, value: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, ()> {
        match &target.kind {
            NodeKind::Identifier(name) => {
                let v = self.expr(value, env)?;
                if env.write(name, v) {
                    Ok(())
                } else {
                    fail(ErrorKind::UndefinedName)
                }
            }
            NodeKind::Index { object, index } => {
                let c = self.expr(object, env)?;
                let k = self.expr(index, env)?;
                let v = self.expr(value, env)?;
                match (c, k) {
                    (OVal::List(items), OVal::Int(i)) => {
                        let mut items = items.borrow_mut();
                        if i < 0 || i as usize >= items.len() {
                            return fail(ErrorKind::TypeMismatch);
                        }
                        items[i as usize] = v;
                        Ok(())
                    }
                    (OVal::Rec(fields), OVal::Str(k)) => {
                        fields.borrow_mut().insert(k, v);
                        Ok(())
                    }
                    _ => fail(ErrorKind::TypeMismatch),
                }
            }
            NodeKind::FieldAccess { object, field } => {
                let c = self.expr(object, env)?;
                let v = self.expr(value, env)?;
                match c {
                    OVal::Rec(fields) => {
                        fields.borrow_mut().insert(field.clone(), v);
                        Ok(())
                    }
                    _ => fail(ErrorKind::TypeMismatch),
                }
            }
            _ => fail(ErrorKind::TypeMismatch),
        }
    }

    fn expr(&mut self, e: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, OVal<'p>> {
        match &e.kind {
            NodeKind::Literal(lit) => Ok(match lit {
                Literal::Nil => OVal::Nil,
                Literal::Bool(b) => OVal::Bool(*b),
                Literal::Int(i) => OVal::Int(*i),
                Literal::Float(x) => OVal::Float(*x),
                Literal::Str(s) => OVal::Str(s.clone()),
            }),
            NodeKind::Identifier(name) => self.resolve(name, env),
            NodeKind::ListLiteral(items) => {
                let mut out = Vec::new();
                for i in items {
                    out.push(self.expr(i, env)?);
                }
                Ok(OVal::List(Rc::new(RefCell::new(out))))
            }
            NodeKind::RecordLiteral(fields) => {
                let mut out = BTreeMap::new();
                for (k, v) in fields {
                    let v = self.expr(v, env)?;
                    out.insert(k.clone(), v);
                }
                Ok(OVal::Rec(Rc::new(RefCell::new(out))))
            }
            NodeKind::Lambda { .. } => Ok(OVal::Lambda(e, env.clone())),
            NodeKind::Probe { expr } => {
                let v = self.expr(expr, env)?;
                if self.recording {
                    let probe = format!("{}:{}:{}", e.span.module_path, e.span.start.line, e.span.start.col);
                    let value = to_json(&v);
                    self.open
                        .last_mut()
                        .expect("root frame open")
                        .children
                        .push(ONode::Hit { probe, value });
                }
                Ok(v)
            }
            NodeKind::Unary { op, operand } => {
                let v = self.expr(operand, env)?;
                match (op, v) {
                    (UnaryOp::Not, OVal::Bool(b)) => Ok(OVal::Bool(!b)),
                    (UnaryOp::Neg, OVal::Int(i)) => match i.checked_neg() {
                        Some(n) => Ok(OVal::Int(n)),
                        None => fail(ErrorKind::IntegerOverflow),
                    },
                    (UnaryOp::Neg, OVal::Float(x)) => Ok(OVal::Float(-x)),
                    _ => fail(ErrorKind::TypeMismatch),
                }
            }
            NodeKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, env),
            NodeKind::Index { object, index } => {
                let c = self.expr(object, env)?;
                let k = self.expr(index, env)?;
                match (c, k) {
                    (OVal::List(items), OVal::Int(i)) => Ok(if i < 0 {
                        OVal::Nil
                    } else {
                        items.borrow().get(i as usize).cloned().unwrap_or(OVal::Nil)
                    }),
                    (OVal::Rec(fields), OVal::Str(k)) => Ok(fields.borrow().get(&k).cloned().unwrap_or(OVal::Nil)),
                    (OVal::Str(s), OVal::Int(i)) => Ok(if i < 0 {
                        OVal::Nil
                    } else {
                        s.chars()
                            .nth(i as usize)
                            .map(|c| OVal::Str(c.to_string()))
                            .unwrap_or(OVal::Nil)
                    }),
                    _ => fail(ErrorKind::TypeMismatch),
                }
            }
            NodeKind::FieldAccess { object, field } => {
                if let NodeKind::Identifier(alias) = &object.kind {
                    if env.read(alias).is_none() && self.program.has_import_alias(env.module, alias) {
                        return match self.program.lookup_qualified(env.module, alias, field) {
                            Some((id, decl)) => Ok(OVal::Named(
                                self.program.module_paths().find(|p| *p == id.module).unwrap(),
                                match &decl.kind {
                                    NodeKind::FunctionDecl { name, .. } => name.as_str(),
                                    _ => unreachable!(),
                                },
                                decl,
                            )),
                            None => fail(ErrorKind::UndefinedName),
                        };
                    }
                }
                match self.expr(object, env)? {
                    OVal::Rec(fields) => Ok(fields.borrow().get(field).cloned().unwrap_or(OVal::Nil)),
                    _ => fail(ErrorKind::TypeMismatch),
                }
            }
            NodeKind::Call { callee, args } => {
                let f = self.expr(callee, env)?;
                let mut vals = Vec::new();
                for a in args {
                    vals.push(self.expr(a, env)?);
                }
                self.call(f, vals)
            }
            _ => fail(ErrorKind::TypeMismatch),
        }
    }

    fn resolve(&self, name: &str, env: &Rc<Scope<'p>>) -> R<'p, OVal<'p>> {
        if let Some(v) = env.read(name) {
            return Ok(v);
        }
        if let Some(&(m, n, decl)) = self.functions.get(&(env.module.to_string(), name.to_string())) {
            return Ok(OVal::Named(m, n, decl));
        }
        match name {
            "len" => Ok(OVal::Builtin("len")),
            "push" => Ok(OVal::Builtin("push")),
            "print" => Ok(OVal::Builtin("print")),
            _ => fail(ErrorKind::UndefinedName),
        }
    }

    fn binary(&mut self, op: BinaryOp, lhs: &'p Node, rhs: &'p Node, env: &Rc<Scope<'p>>) -> R<'p, OVal<'p>> {
        use BinaryOp::*;
        if matches!(op, And | Or) {
            let l = match self.expr(lhs, env)? {
                OVal::Bool(b) => b,
                _ => return fail(ErrorKind::TypeMismatch),
            };
            if op == And && !l {
                return Ok(OVal::Bool(false));
            }
            if op == Or && l {
                return Ok(OVal::Bool(true));
            }
            return match self.expr(rhs, env)? {
                OVal::Bool(b) => Ok(OVal::Bool(b)),
                _ => fail(ErrorKind::TypeMismatch),
            };
        }
        let l = self.expr(lhs, env)?;
        let r = self.expr(rhs, env)?;
        match op {
            Eq => return Ok(OVal::Bool(equal(&l, &r))),
            Ne => return Ok(OVal::Bool(!equal(&l, &r))),
            Lt | Le | Gt | Ge => {
                let ord = match (&l, &r) {
                    (OVal::Int(a), OVal::Int(b)) => Some(a.cmp(b)),
                    (OVal::Str(a), OVal::Str(b)) => Some(a.cmp(b)),
                    _ => match (num(&l), num(&r)) {
                        (Some(a), Some(b)) => a.partial_cmp(&b),
                        _ => return fail(ErrorKind::TypeMismatch),
                    },
                };
                let Some(ord) = ord else { return Ok(OVal::Bool(false)) };
                return Ok(OVal::Bool(match op {
                    Lt => ord.is_lt(),
                    Le => ord.is_le(),
                    Gt => ord.is_gt(),
                    _ => ord.is_ge(),
                }));
            }
            _ => {}
        }
        if op == Add && (matches!(l, OVal::Str(_)) || matches!(r, OVal::Str(_))) {
            return Ok(OVal::Str(format!("{}{}", display(&l), display(&r))));
        }
        if let (OVal::Int(a), OVal::Int(b)) = (&l, &r) {
            let (a, b) = (*a, *b);
            if matches!(op, Div | Rem) && b == 0 {
                return fail(ErrorKind::DivisionByZero);
            }
            let v = match op {
                Add => a.checked_add(b),
                Sub => a.checked_sub(b),
                Mul => a.checked_mul(b),
                Div => a.checked_div(b),
                _ => a.checked_rem(b),
            };
            return v.map(OVal::Int).ok_or(Esc::Fail(ErrorKind::IntegerOverflow));
        }
        let (Some(a), Some(b)) = (num(&l), num(&r)) else {
            return fail(ErrorKind::TypeMismatch);
        };
        if matches!(op, Div | Rem) && b == 0.0 {
            return fail(ErrorKind::DivisionByZero);
        }
        let x = match op {
            Add => a + b,
            Sub => a - b,
            Mul => a * b,
            Div => a / b,
            _ => a % b,
        };
        if x.is_finite() {
            Ok(OVal::Float(x))
        } else {
            fail(ErrorKind::IntegerOverflow)
        }
    }

    fn call(&mut self, f: OVal<'p>, args: Vec<OVal<'p>>) -> R<'p, OVal<'p>> {
        let (method, module, params, body, scope) = match &f {
            OVal::Builtin(name) => return builtin(name, args),
            OVal::Named(m, n, decl) => {
                let NodeKind::FunctionDecl { params, body, .. } = &decl.kind else { unreachable!() };
                (format!("{m}.{n}"), *m, params, body, Scope::top(m))
            }
            OVal::Lambda(node, captured) => {
                let NodeKind::Lambda { params, body } = &node.kind else { unreachable!() };
                (
                    format!("{}.<lambda>", captured.module),
                    captured.module,
                    params,
                    body,
                    Scope::under(captured),
                )
            }
            _ => return fail(ErrorKind::TypeMismatch),
        };
        let NodeKind::ParamList { names } = &params.kind else { unreachable!() };
        if names.len() != args.len() {
            return fail(ErrorKind::Arity);
        }
        if self.depth >= 2000 {
            return fail(ErrorKind::StepLimit);
        }
        let traced = self.recording && self.suppressed == 0 && self.in_scope(module);
        if self.recording && self.suppressed > 0 {
            self.suppressed += 1;
        } else if self.recording && !traced {
            self.suppressed = 1;
        }
        if traced {
            self.open.push(Frame {
                method,
                args: args.iter().map(to_json).collect(),
                children: Vec::new(),
            });
        }
        self.traced.push(traced);
        for (n, v) in names.iter().zip(args) {
            scope.vars.borrow_mut().insert(n.clone(), v);
        }
        self.depth += 1;
        let r = self.block(body, &scope);
        self.depth -= 1;
        let r = r.map(|c| match c {
            Ctl::Ret(v) => v,
            Ctl::Next => OVal::Nil,
        });
        let was_traced = self.traced.pop().expect("open call");
        if was_traced {
            let frame = self.open.pop().expect("traced frame");
            let (exception, result) = match &r {
                Ok(v) => (false, Some(to_json(v))),
                Err(Esc::Throw(v)) => (true, Some(to_json(v))),
                Err(Esc::Fail(_)) => (true, None),
            };
            self.open.last_mut().expect("parent frame").children.push(ONode::Call {
                method: frame.method,
                args: frame.args,
                exception,
                result,
                children: frame.children,
            });
        } else if self.recording {
            self.suppressed -= 1;
        }
        r
    }
}

fn builtin<'p>(name: &str, args: Vec<OVal<'p>>) -> R<'p, OVal<'p>> {
    let want = if name == "push" { 2 } else { 1 };
    if args.len() != want {
        return fail(ErrorKind::Arity);
    }
    match (name, &args[0]) {
        ("len", OVal::List(items)) => Ok(OVal::Int(items.borrow().len() as i64)),
        ("len", OVal::Rec(fields)) => Ok(OVal::Int(fields.borrow().len() as i64)),
        ("len", OVal::Str(s)) => Ok(OVal::Int(s.chars().count() as i64)),
        ("push", OVal::List(items)) => {
            items.borrow_mut().push(args[1].clone());
            Ok(OVal::Nil)
        }
        ("print", _) => Ok(OVal::Nil),
        _ => fail(ErrorKind::TypeMismatch),
    }
}

fn is_statement(n: &Node) -> bool {
    matches!(
        n.kind,
        NodeKind::Let { .. }
            | NodeKind::Assign { .. }
            | NodeKind::If { .. }
            | NodeKind::While { .. }
            | NodeKind::Return { .. }
            | NodeKind::Throw { .. }
            | NodeKind::TryCatch { .. }
    )
}

fn kind_of(e: &Esc) -> ErrorKind {
    match e {
        Esc::Throw(_) => ErrorKind::UncaughtThrow,
        Esc::Fail(k) => *k,
    }
}
