#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::funql::extract_funql;
use selfcon::metrics::Equivalence;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    let _ = extract_funql(s);
    assert!(Equivalence::FunQlTree.equivalent(s, s));
});
