#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::funql::parse_funql;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_funql(s) {
        assert_eq!(parse_funql(&t.render()).as_ref(), Ok(&t));
        assert!(t.contains_subparse(&t));
        assert_eq!(t.subparses().len(), t.node_count() - t.leaf_count());
    }
});
