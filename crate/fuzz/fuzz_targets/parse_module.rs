//! Parses arbitrary text as a module. Accepted modules must extract
//! annotations without panicking and re-parse to the same tree.

#![no_main]

use crosscut::annotations::extract_annotations;
use crosscut::lang::{parse, SourceProgram};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(source) = std::str::from_utf8(data) else { return };
    let Ok(module) = parse(source, "fuzz.cc") else { return };
    assert_eq!(parse(source, "fuzz.cc").ok().as_ref(), Some(&module));
    if let Ok(program) = SourceProgram::from_sources([("fuzz.cc", source)]) {
        let _ = extract_annotations(&program);
    }
});
