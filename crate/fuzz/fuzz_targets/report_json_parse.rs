#![no_main]

use kslab_core::io::{parse_reports, reports_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(reports) = parse_reports(text) {
        let again = parse_reports(&reports_to_json(&reports)).expect("serialised reports re-parse");
        assert_eq!(reports.len(), again.len());
    }
});
