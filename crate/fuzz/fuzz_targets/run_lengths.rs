#![no_main]

use libfuzzer_sys::fuzz_target;
use supsim_cli::parse_lengths;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(lengths) = parse_lengths(text) {
        assert!(!lengths.is_empty());
        assert!(lengths[0] > 0);
        assert!(lengths.windows(2).all(|w| w[0] < w[1]));
        let joined = lengths.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
        assert_eq!(parse_lengths(&joined).unwrap(), lengths);
    }
});
