#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::prompt::parse_hypothetical_query;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Some(q) = parse_hypothetical_query(s) {
        assert_eq!(q.choices.len(), 5);
    }
});
