#![no_main]

use dantzig::io::{matrix_to_csv, parse_matrix_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = parse_matrix_csv(data) {
        assert!(m.nrows() > 0 && m.ncols() > 0);
        assert!(m.iter().all(|v| v.is_finite()));
        let again = parse_matrix_csv(matrix_to_csv(&m).as_bytes()).expect("written matrix must parse");
        assert_eq!(again, m);
    }
});
