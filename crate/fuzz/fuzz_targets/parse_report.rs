#![no_main]

use hjcheck::report::parse_report;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = parse_report(text) {
        // Any accepted report renders to CSV and re-parses from its JSON.
        let csv = report.to_csv();
        assert!(csv.starts_with("check,instance,value,bound,violation,pass\n"));
        let back = parse_report(&report.to_json()).expect("rendered report parses");
        assert_eq!(back.to_csv(), csv);
    }
});
