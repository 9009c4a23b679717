#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::datasets::split_sentences;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let mut end = 0;
    for r in split_sentences(s) {
        // Ordered, non-overlapping, on char boundaries.
        assert!(r.start >= end && r.start < r.end && r.end <= s.len());
        assert!(s.is_char_boundary(r.start) && s.is_char_boundary(r.end));
        end = r.end;
    }
});
