#![no_main]

use libfuzzer_sys::fuzz_target;

use asyncgp_core::PredictionRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else { return };
    if let Ok(record) = PredictionRecord::from_json_line(line) {
        // Accepted records round-trip through the JSONL trace format.
        let encoded = record.to_json_line();
        let back = PredictionRecord::from_json_line(&encoded).expect("encoded record must re-parse");
        assert_eq!(record, back);
    }
});
