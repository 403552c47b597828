#![no_main]

use dantzig::io::parse_support;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(support) = parse_support(text) {
        assert!(support.windows(2).all(|w| w[0] < w[1]));
        let listed: Vec<String> = support.iter().map(|i| (i + 1).to_string()).collect();
        assert_eq!(parse_support(&listed.join(",")).unwrap(), support);
    }
});
