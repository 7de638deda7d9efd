#![no_main]

use libfuzzer_sys::fuzz_target;
use supsim_core::experiments::ScenarioResult;
use supsim_core::export::{write_csv, write_txt};

fuzz_target!(|data: &[u8]| {
    let Ok(result) = serde_json::from_slice::<ScenarioResult>(data) else {
        return;
    };
    // stored results feed the csv download and comparisons
    let _ = write_csv(std::slice::from_ref(&result), std::io::sink());
    let _ = write_txt(std::slice::from_ref(&result), None, std::io::sink());
    let text = serde_json::to_string(&result).unwrap();
    let back: ScenarioResult = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
});
