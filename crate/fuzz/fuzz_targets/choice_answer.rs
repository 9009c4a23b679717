#![no_main]
use libfuzzer_sys::fuzz_target;
use selfcon::metrics::Equivalence;
use selfcon::prompt::parse_choice_answer;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    if let Some(label) = parse_choice_answer(s, None) {
        assert_eq!(
            parse_choice_answer(&label.as_char().to_string(), None),
            Some(label)
        );
    }
    assert!(Equivalence::ChoiceLetter.equivalent(s, s));
});
