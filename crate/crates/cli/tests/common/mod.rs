#![allow(dead_code)]

use std::fs;

pub const F2: &str = "fn g(x){ return @{ x * 2 }; }  fn f(a){ return g(a); }  fn h(a){ return g(a + 1); }  #example \"ex1\" { f(3); h(3); g(10); }";
pub const F2_PROBE: &str = "m.cc:1:17";
pub const EMPTY: &str = "fn f(){ return 1; } #example \"empty\" { }";

pub fn project(files: &[(&str, &str)]) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for (path, text) in files {
        let full = dir.path().join(path);
        fs::create_dir_all(full.parent().unwrap()).unwrap();
        fs::write(full, text).unwrap();
    }
    dir
}

/// Drops `run_id`, which differs between sessions.
pub fn without_run_id(mut v: serde_json::Value) -> serde_json::Value {
    if let Some(obj) = v.as_object_mut() {
        obj.remove("run_id");
    }
    v
}
