#![no_main]

use libfuzzer_sys::fuzz_target;
use lob_tactics::config::{Format, ModelFile};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(file) = ModelFile::parse(text, Format::Json, None) else { return };
    // the normalized echo must parse back to the same file
    let again = ModelFile::parse(&file.normalized_json(), Format::Json, None).expect("normalized form parses");
    assert_eq!(file.hash(), again.hash());
    if file.book.qmax <= 16 {
        let _ = file.build();
    }
});
