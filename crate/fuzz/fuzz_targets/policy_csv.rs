#![no_main]

use libfuzzer_sys::fuzz_target;
use lob_tactics::dp::read_policy_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_policy_csv(data);
});
