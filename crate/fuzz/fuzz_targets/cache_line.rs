#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::backends::CompletionRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rec) = CompletionRecord::from_line(s) {
        assert_eq!(CompletionRecord::from_line(&rec.to_line()), Ok(rec));
    }
});
