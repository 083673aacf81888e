#![no_main]

use libfuzzer_sys::fuzz_target;

use asyncgp_simnet::stream::read_csv_rows_from_reader;

fuzz_target!(|data: &[u8]| {
    // Parsing an arbitrary byte stream as a dataset must never panic; every
    // accepted row carries exactly the requested finite columns.
    if let Ok(rows) = read_csv_rows_from_reader(data, "fuzz", &[0, 1], 2) {
        for (x, y) in rows {
            assert_eq!(x.len(), 2);
            assert!(x.iter().all(|v| v.is_finite()));
            assert!(y.is_finite());
        }
    }
});
