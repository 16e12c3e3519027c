//! Seeded random program generator.
//!
//! Function `fi` only calls `fj` with `j > i`, and lambdas make no calls,
//! so the call depth is bounded by the function count (at most 5).

use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const MODULE: &str = "g.cc";
pub const EXAMPLE: &str = "ex";
pub const MAX_FUNCTIONS: usize = 5;
pub const MAX_PROBES: usize = 5;

#[derive(Debug, Clone)]
pub struct GenProgram {
    /// Top-level statements of each function body; the last is a return.
    pub functions: Vec<(usize, Vec<String>)>,
    pub body: Vec<String>,
}

impl GenProgram {
    pub fn source(&self) -> String {
        let mut out = String::new();
        for (i, (arity, stmts)) in self.functions.iter().enumerate() {
            let params = ["a", "b"][..*arity].join(", ");
            out.push_str(&format!("fn f{i}({params}) {{\n"));
            for s in stmts {
                out.push_str(&format!("  {s}\n"));
            }
            out.push_str("}\n");
        }
        out.push_str(&format!("#example \"{EXAMPLE}\" {{\n"));
        for s in &self.body {
            out.push_str(&format!("  {s}\n"));
        }
        out.push_str("}\n");
        out
    }

    /// Inserts an unconditional throw into function `f` before statement
    /// `at` (clamped to the final return).
    pub fn with_throw(&self, f: usize, at: usize) -> GenProgram {
        let mut p = self.clone();
        let stmts = &mut p.functions[f].1;
        let at = at.min(stmts.len() - 1);
        stmts.insert(at, format!("throw \"boom-f{f}\";"));
        p
    }
}

struct Ctx<'r> {
    rng: &'r mut ChaCha8Rng,
    /// Index of the function being generated; None for the example body.
    current: Option<usize>,
    functions: usize,
    arities: Vec<usize>,
    probes: usize,
    fresh: usize,
}

#[derive(Clone, Default)]
struct Vars {
    ints: Vec<String>,
    lists: Vec<String>,
    records: Vec<String>,
    lambdas: Vec<String>,
}

impl Ctx<'_> {
    fn name(&mut self, prefix: &str) -> String {
        self.fresh += 1;
        format!("{prefix}{}", self.fresh)
    }

    fn callees(&self) -> std::ops::Range<usize> {
        match self.current {
            Some(i) => i + 1..self.functions,
            None => 0..self.functions,
        }
    }

    fn call(&mut self, vars: &Vars, depth: usize) -> Option<String> {
        let range = self.callees();
        if range.is_empty() {
            return None;
        }
        let j = self.rng.gen_range(range);
        let args: Vec<String> = (0..self.arities[j]).map(|_| self.int_expr(vars, depth + 1)).collect();
        Some(format!("f{j}({})", args.join(", ")))
    }

    fn int_expr(&mut self, vars: &Vars, depth: usize) -> String {
        let leaf = depth >= 3 || self.rng.gen_bool(0.35);
        if leaf {
            if !vars.ints.is_empty() && self.rng.gen_bool(0.6) {
                return vars.ints[self.rng.gen_range(0..vars.ints.len())].clone();
            }
            return self.rng.gen_range(0..10).to_string();
        }
        match self.rng.gen_range(0..10) {
            0 | 1 => format!("({} + {})", self.int_expr(vars, depth + 1), self.int_expr(vars, depth + 1)),
            2 => format!("({} - {})", self.int_expr(vars, depth + 1), self.int_expr(vars, depth + 1)),
            3 => format!("({} * {})", self.int_expr(vars, depth + 1), self.rng.gen_range(0..4)),
            4 | 5 => self.call(vars, depth).unwrap_or_else(|| "1".to_string()),
            6 if self.probes < MAX_PROBES => {
                self.probes += 1;
                format!("@{{ {} }}", self.int_expr(vars, depth + 1))
            }
            7 if !vars.lists.is_empty() => {
                let l = &vars.lists[self.rng.gen_range(0..vars.lists.len())];
                if self.rng.gen_bool(0.5) {
                    format!("len({l})")
                } else {
                    format!("{l}[0]")
                }
            }
            8 if !vars.records.is_empty() => {
                let r = vars.records[self.rng.gen_range(0..vars.records.len())].clone();
                format!("{r}.x")
            }
            9 if !vars.lambdas.is_empty() => {
                let h = vars.lambdas[self.rng.gen_range(0..vars.lambdas.len())].clone();
                format!("{h}({})", self.int_expr(vars, depth + 1))
            }
            _ => self.rng.gen_range(0..10).to_string(),
        }
    }

    fn cond(&mut self, vars: &Vars) -> String {
        let op = ["<", "<=", ">", "==", "!="][self.rng.gen_range(0..5)];
        let c = format!("{} {op} {}", self.int_expr(vars, 2), self.int_expr(vars, 2));
        if self.rng.gen_bool(0.15) {
            format!("{c} && {} < 5", self.int_expr(vars, 3))
        } else {
            c
        }
    }

    fn block(&mut self, vars: &Vars, nesting: usize) -> String {
        let mut inner = vars.clone();
        let n = self.rng.gen_range(1..3);
        let stmts: Vec<String> = (0..n).map(|_| self.stmt(&mut inner, nesting + 1)).collect();
        format!("{{ {} }}", stmts.join(" "))
    }

    fn stmt(&mut self, vars: &mut Vars, nesting: usize) -> String {
        let compound = nesting < 2;
        match self.rng.gen_range(0..14) {
            0..=2 => {
                let v = self.name("v");
                let e = self.int_expr(vars, 0);
                vars.ints.push(v.clone());
                format!("let {v} = {e};")
            }
            3 if !vars.ints.is_empty() => {
                let v = vars.ints[self.rng.gen_range(0..vars.ints.len())].clone();
                format!("{v} = {};", self.int_expr(vars, 1))
            }
            4 if compound => {
                let c = self.cond(vars);
                let t = self.block(vars, nesting);
                if self.rng.gen_bool(0.5) {
                    let e = self.block(vars, nesting);
                    format!("if {c} {t} else {e}")
                } else {
                    format!("if {c} {t}")
                }
            }
            5 if compound => {
                let i = self.name("i");
                let mut inner = vars.clone();
                let body = self.stmt(&mut inner, nesting + 1);
                format!("let {i} = 0; while {i} < 2 {{ {body} {i} = {i} + 1; }}")
            }
            6 => {
                let l = self.name("l");
                let a = self.int_expr(vars, 1);
                let b = self.int_expr(vars, 1);
                vars.lists.push(l.clone());
                format!("let {l} = [{a}, {b}];")
            }
            7 if !vars.lists.is_empty() => {
                let l = vars.lists[self.rng.gen_range(0..vars.lists.len())].clone();
                if self.rng.gen_bool(0.5) {
                    format!("push({l}, {});", self.int_expr(vars, 1))
                } else {
                    format!("{l}[0] = {};", self.int_expr(vars, 1))
                }
            }
            8 => {
                let r = self.name("r");
                let a = self.int_expr(vars, 1);
                let b = self.int_expr(vars, 1);
                vars.records.push(r.clone());
                format!("let {r} = {{x: {a}, y: {b}}};")
            }
            9 if !vars.records.is_empty() => {
                let r = vars.records[self.rng.gen_range(0..vars.records.len())].clone();
                format!("{r}.y = {};", self.int_expr(vars, 1))
            }
            10 if compound => {
                let mut inner = vars.clone();
                let first = self.stmt(&mut inner, nesting + 1);
                let guard = self.cond(&inner);
                let thrown = self.int_expr(&inner, 2);
                let handler = if self.probes < MAX_PROBES && self.rng.gen_bool(0.5) {
                    self.probes += 1;
                    "@{ err };".to_string()
                } else {
                    "print(err);".to_string()
                };
                format!("try {{ {first} if {guard} {{ throw {thrown}; }} }} catch (err) {{ {handler} }}")
            }
            11 if self.current.is_some_and(|i| i + 1 < self.functions) || self.current.is_none() => {
                let h = self.name("h");
                let body = if self.probes < MAX_PROBES && self.rng.gen_bool(0.5) {
                    self.probes += 1;
                    "return @{ x + 1 };"
                } else {
                    "return x * 2;"
                };
                vars.lambdas.push(h.clone());
                format!("let {h} = fn(x) {{ {body} }};")
            }
            12 if self.probes < MAX_PROBES => {
                self.probes += 1;
                let e = if !vars.lists.is_empty() && self.rng.gen_bool(0.3) {
                    vars.lists[0].clone()
                } else if !vars.records.is_empty() && self.rng.gen_bool(0.3) {
                    vars.records[0].clone()
                } else {
                    self.int_expr(vars, 1)
                };
                format!("@{{ {e} }};")
            }
            13 if self.rng.gen_bool(0.3) => {
                let v = self.name("v");
                let e = format!("({} / {})", self.int_expr(vars, 2), self.int_expr(vars, 2));
                vars.ints.push(v.clone());
                format!("let {v} = {e};")
            }
            _ => match self.call(vars, 1) {
                Some(c) => format!("{c};"),
                None => format!("let {} = {};", self.name("v"), self.int_expr(vars, 1)),
            },
        }
    }
}

/// One random program; the caller enforces the dynamic call budget.
pub fn generate(rng: &mut ChaCha8Rng) -> GenProgram {
    let functions = rng.gen_range(1..=MAX_FUNCTIONS);
    let arities: Vec<usize> = (0..functions).map(|_| rng.gen_range(1..=2)).collect();
    let mut ctx = Ctx {
        rng,
        current: None,
        functions,
        arities: arities.clone(),
        probes: 0,
        fresh: 0,
    };
    let mut out = Vec::new();
    for (i, &arity) in arities.iter().enumerate() {
        ctx.current = Some(i);
        let mut vars = Vars {
            ints: ["a", "b"][..arity].iter().map(|s| s.to_string()).collect(),
            ..Vars::default()
        };
        let n = ctx.rng.gen_range(1..5);
        let mut stmts: Vec<String> = (0..n).map(|_| ctx.stmt(&mut vars, 0)).collect();
        let ret = ctx.int_expr(&vars, 0);
        stmts.push(format!("return {ret};"));
        out.push((arity, stmts));
    }
    ctx.current = None;
    let mut vars = Vars::default();
    let n = ctx.rng.gen_range(1..5);
    let mut body: Vec<String> = (0..n).map(|_| ctx.stmt(&mut vars, 0)).collect();
    if let Some(c) = ctx.call(&vars, 0) {
        body.push(format!("{c};"));
    }
    GenProgram { functions: out, body }
}
