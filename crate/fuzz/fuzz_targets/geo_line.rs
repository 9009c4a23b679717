#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::datasets::GeoExample;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ex) = GeoExample::from_record_line(s, 1) {
        assert!(ex
            .probes()
            .iter()
            .all(|p| !p.gold.is_leaf() && ex.gold.contains_subparse(&p.gold)));
    }
});
