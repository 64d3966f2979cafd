#![no_main]

use libfuzzer_sys::fuzz_target;
use lob_tactics::calibrate::{estimate_intensities, read_events, CalibrationOptions};

fuzz_target!(|data: &[u8]| {
    if let Ok(events) = read_events(data) {
        let opts = CalibrationOptions { qmax: 8, ..CalibrationOptions::default() };
        let _ = estimate_intensities(&events, &opts);
    }
});
