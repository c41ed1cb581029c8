#![no_main]

use hjcheck::config::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        // Accepted configurations validate and survive a round trip.
        config.validate().expect("parsed config validates");
        let again = serde_json::to_string(&config).expect("config serializes");
        assert_eq!(parse_config(&again).expect("round trip parses"), config);
    }
});
