#![no_main]

use dantzig::io::{parse_vector_csv, vector_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = parse_vector_csv(data) {
        let again = parse_vector_csv(vector_to_csv(&v).as_bytes()).expect("written vector must parse");
        assert_eq!(again, v);
    }
});
