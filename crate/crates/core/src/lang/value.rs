use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use super::ast::{MethodId, Node};
use super::eval::Env;

/// A runtime value. Lists and records have reference identity.
#[derive(Clone)]
pub enum Value<'p> {
    Nil,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(Rc<RefCell<Vec<Value<'p>>>>),
    Record(Rc<RefCell<BTreeMap<String, Value<'p>>>>),
    Function(Rc<Function<'p>>),
}

pub enum Function<'p> {
    Named { id: &'p MethodId, decl: &'p Node },
    Lambda { node: &'p Node, env: Rc<Env<'p>> },
    Builtin(Builtin),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Builtin {
    Len,
    Push,
    Print,
}

impl Builtin {
    pub fn by_name(name: &str) -> Option<Builtin> {
        match name {
            "len" => Some(Builtin::Len),
            "push" => Some(Builtin::Push),
            "print" => Some(Builtin::Print),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Len => "len",
            Builtin::Push => "push",
            Builtin::Print => "print",
        }
    }
}

impl<'p> Function<'p> {
    /// Label used in snapshots: a method id, `<lambda>@span`, or the builtin name.
    pub fn label(&self) -> String {
        match self {
            Function::Named { id, .. } => id.to_string(),
            Function::Lambda { node, .. } => format!("<lambda>@{}", node.span),
            Function::Builtin(b) => b.name().to_string(),
        }
    }

    pub fn module(&self) -> Option<&'p str> {
        match self {
            Function::Named { id, .. } => Some(&id.module),
            Function::Lambda { env, .. } => Some(env.module()),
            Function::Builtin(_) => None,
        }
    }
}

impl<'p> Value<'p> {
    pub fn str(text: &str) -> Self {
        Value::Str(Rc::from(text))
    }

    pub fn list(items: Vec<Value<'p>>) -> Self {
        Value::List(Rc::new(RefCell::new(items)))
    }

    pub fn record(fields: BTreeMap<String, Value<'p>>) -> Self {
        Value::Record(Rc::new(RefCell::new(fields)))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Nil => "nil",
            Value::Bool(_) => "boolean",
            Value::Int(_) => "integer",
            Value::Float(_) => "float",
            Value::Str(_) => "string",
            Value::List(_) => "list",
            Value::Record(_) => "record",
            Value::Function(_) => "function",
        }
    }

    /// `==` semantics: scalars compare by value (integers and floats
    /// numerically), containers and closures by identity.
    pub fn language_eq(&self, other: &Value<'p>) -> bool {
        match (self, other) {
            (Value::Nil, Value::Nil) => true,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Float(a), Value::Float(b)) => a == b,
            (Value::Int(a), Value::Float(b)) | (Value::Float(b), Value::Int(a)) => (*a as f64) == *b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::List(a), Value::List(b)) => Rc::ptr_eq(a, b),
            (Value::Record(a), Value::Record(b)) => Rc::ptr_eq(a, b),
            (Value::Function(a), Value::Function(b)) => match (&**a, &**b) {
                (Function::Named { id: x, .. }, Function::Named { id: y, .. }) => x == y,
                (Function::Builtin(x), Function::Builtin(y)) => x == y,
                _ => Rc::ptr_eq(a, b),
            },
            _ => false,
        }
    }
}

impl fmt::Display for Value<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn write_value(v: &Value, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
            if depth > 8 {
                return write!(f, "…");
            }
            match v {
                Value::Nil => write!(f, "nil"),
                Value::Bool(b) => write!(f, "{b}"),
                Value::Int(i) => write!(f, "{i}"),
                Value::Float(x) => write!(f, "{x:?}"),
                Value::Str(s) => write!(f, "{s}"),
                Value::List(items) => {
                    let Ok(items) = items.try_borrow() else {
                        return write!(f, "[…]");
                    };
                    write!(f, "[")?;
                    for (i, item) in items.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write_value(item, f, depth + 1)?;
                    }
                    write!(f, "]")
                }
                Value::Record(fields) => {
                    let Ok(fields) = fields.try_borrow() else {
                        return write!(f, "{{…}}");
                    };
                    write!(f, "{{")?;
                    for (i, (k, item)) in fields.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{k}: ")?;
                        write_value(item, f, depth + 1)?;
                    }
                    write!(f, "}}")
                }
                Value::Function(func) => write!(f, "<fn {}>", func.label()),
            }
        }
        write_value(self, f, 0)
    }
}

impl fmt::Debug for Value<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({self})", self.type_name())
    }
}
