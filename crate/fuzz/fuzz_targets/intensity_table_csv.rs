#![no_main]

use libfuzzer_sys::fuzz_target;
use lob_tactics::config::{read_intensity_csv, read_regen_csv};

fuzz_target!(|data: &[u8]| {
    let _ = read_intensity_csv(data);
    let _ = read_regen_csv(data);
});
