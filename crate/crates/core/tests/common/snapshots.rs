//! Mutation-after-observation checks, shared by the unit tests and the
//! acceptance run.

use crosscut::analysis::NodeData;
use crosscut::lang::MethodId;
use crosscut::tracer::ValueSnapshot as V;

use super::{load_one, run};

pub type Check = fn() -> Result<(), String>;

fn ints(xs: &[i64]) -> V {
    V::List(xs.iter().map(|&x| V::Int(x)).collect())
}

fn rec(fields: &[(&str, V)]) -> V {
    V::Record(fields.iter().map(|(k, v)| (k.to_string(), v.clone())).collect())
}

fn hits(src: &str) -> Vec<V> {
    let loaded = load_one(src);
    let id = loaded.examples[0].example_id.clone();
    let (_, tree) = run(&loaded, &id);
    tree.probe_log().into_iter().map(|e| e.value).collect()
}

fn expect<T: PartialEq + std::fmt::Debug>(got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("got {got:?}, want {want:?}"))
    }
}

pub fn push_after_hit() -> Result<(), String> {
    expect(hits("#example \"e\" { let l = [1]; @{ l }; push(l, 2); }"), vec![ints(&[1])])
}

pub fn index_assignment_after_hit() -> Result<(), String> {
    expect(hits("#example \"e\" { let l = [1, 2]; @{ l }; l[0] = 9; }"), vec![ints(&[1, 2])])
}

pub fn field_assignment_after_hit() -> Result<(), String> {
    expect(
        hits("#example \"e\" { let r = {a: 1}; @{ r }; r.a = 5; r.b = 6; }"),
        vec![rec(&[("a", V::Int(1))])],
    )
}

pub fn keyed_record_assignment_after_hit() -> Result<(), String> {
    expect(
        hits("#example \"e\" { let r = {a: 1}; @{ r }; r[\"a\"] = 7; }"),
        vec![rec(&[("a", V::Int(1))])],
    )
}

pub fn nested_list_mutated_through_alias() -> Result<(), String> {
    expect(
        hits("#example \"e\" { let inner = [1]; let outer = [inner]; @{ outer }; push(inner, 2); }"),
        vec![V::List(vec![ints(&[1])])],
    )
}

pub fn call_arguments_are_copied_at_entry() -> Result<(), String> {
    let loaded = load_one("fn grow(l){ push(l, 3); return len(l); } #example \"e\" { let l = [1]; grow(l); }");
    let (_, tree) = run(&loaded, "m.cc#e");
    let idx = tree
        .first_invocation(&MethodId::new("m.cc", "grow"))
        .ok_or("grow not called")?;
    let NodeData::Invocation(inv) = &tree.node(idx).data else {
        return Err("not an invocation".into());
    };
    expect((&inv.args, &inv.result), (&vec![ints(&[1])], &V::Int(2)))
}

pub fn results_are_copied_at_exit() -> Result<(), String> {
    let loaded = load_one("fn make(){ return [1]; } #example \"e\" { let l = make(); push(l, 2); l; }");
    let (trace, tree) = run(&loaded, "m.cc#e");
    let idx = tree
        .first_invocation(&MethodId::new("m.cc", "make"))
        .ok_or("make not called")?;
    expect(&tree.node(idx).invocation().unwrap().result, &ints(&[1]))?;
    expect(trace.result(), Some(&ints(&[1, 2])))
}

pub fn repeated_hits_record_each_state() -> Result<(), String> {
    expect(
        hits("#example \"e\" { let l = []; let i = 0; while i < 3 { push(l, i); @{ l }; i = i + 1; } }"),
        vec![ints(&[0]), ints(&[0, 1]), ints(&[0, 1, 2])],
    )
}

pub fn closure_mutation_after_hit() -> Result<(), String> {
    expect(
        hits("#example \"e\" { let l = [1]; let add = fn(x) { push(l, x); }; @{ l }; add(2); add(3); }"),
        vec![ints(&[1])],
    )
}

pub fn teardown_mutation_after_run() -> Result<(), String> {
    expect(
        hits("#example \"e\" setup { let l = [1]; } { @{ l }; } teardown { push(l, 2); l[0] = 0; }"),
        vec![ints(&[1])],
    )
}

pub const ALL: [(&str, Check); 10] = [
    ("push_after_hit", push_after_hit),
    ("index_assignment_after_hit", index_assignment_after_hit),
    ("field_assignment_after_hit", field_assignment_after_hit),
    ("keyed_record_assignment_after_hit", keyed_record_assignment_after_hit),
    ("nested_list_mutated_through_alias", nested_list_mutated_through_alias),
    ("call_arguments_are_copied_at_entry", call_arguments_are_copied_at_entry),
    ("results_are_copied_at_exit", results_are_copied_at_exit),
    ("repeated_hits_record_each_state", repeated_hits_record_each_state),
    ("closure_mutation_after_hit", closure_mutation_after_hit),
    ("teardown_mutation_after_run", teardown_mutation_after_run),
];
