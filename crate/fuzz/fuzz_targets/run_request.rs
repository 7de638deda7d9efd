#![no_main]

use libfuzzer_sys::fuzz_target;
use supsim_service::parse_run_request;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(req) = parse_run_request(text) {
        let again = serde_json::to_string(&req).unwrap();
        assert_eq!(parse_run_request(&again).unwrap(), req);
    }
});
