//! Imports arbitrary bytes as a JSONL trace. Anything the importer accepts
//! must build a call tree and export back to an equal trace.

#![no_main]

use crosscut::analysis::build_call_tree;
use crosscut::tracer::jsonl;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(trace) = jsonl::read_trace(data) else { return };
    build_call_tree(&trace).expect("validated traces are well bracketed");
    let again = jsonl::from_jsonl_str(&jsonl::to_jsonl_string(&trace)).expect("re-import");
    assert_eq!(again, trace);
});
