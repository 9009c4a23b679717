#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::backends::{parse_numeric_answer, ArithAnswer};
use selfcon::metrics::Equivalence;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    // Keep exponents of huge decimals from dominating the run.
    if s.len() > 256 {
        return;
    }
    if let Some(v) = parse_numeric_answer(s) {
        let canonical = ArithAnswer(v.clone()).to_string();
        assert_eq!(parse_numeric_answer(&canonical), Some(v));
    }
    assert!(Equivalence::Numeric.equivalent(s, s));
});
