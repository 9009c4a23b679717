#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::backends::{evaluate_arith, noisy_answer, oracle_answer};

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let _ = evaluate_arith(s);
    if let Ok(a) = oracle_answer(s) {
        let noisy = noisy_answer(s, 0.0, 1).expect("same prompt decodes twice");
        assert_eq!(a, noisy);
    }
});
