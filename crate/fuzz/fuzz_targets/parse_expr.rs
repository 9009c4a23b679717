#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::expr::parse_expr;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(e) = parse_expr(s) {
        // Whatever parses must render to something that parses back to the same tree.
        let rendered = e.render();
        assert_eq!(parse_expr(&rendered).as_ref(), Ok(&e), "{rendered}");
        let _ = e.evaluate();
    }
});
