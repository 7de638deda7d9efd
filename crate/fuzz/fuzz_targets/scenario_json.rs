#![no_main]

use libfuzzer_sys::fuzz_target;
use supsim_core::model::{simulate, SimOptions};
use supsim_core::scenario::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = ScenarioConfig::from_json(text) else {
        return;
    };
    // anything accepted must pass validation and survive a round trip
    assert!(config.validate().is_ok());
    let dumped = config.to_json_pretty();
    let back = ScenarioConfig::from_json(&dumped).expect("dumped config parses");
    assert_eq!(back, config);
    assert_eq!(back.to_json_pretty(), dumped);
    assert_eq!(back.digest(), config.digest());

    // small networks also get a short run, which must not trip an invariant
    let n = &config.network;
    let size = n.stores as u64 * n.items as u64 + n.distribution_centers as u64 * n.items as u64;
    if size <= 24 && n.suppliers <= 8 && config.run.warmup_days < 20 {
        let mut short = config.clone();
        short.run.run_length_days = short.run.run_length_days.min(20);
        if let Err(e) = simulate(&short, 1, &SimOptions::default()) {
            panic!("{e}");
        }
    }
});
