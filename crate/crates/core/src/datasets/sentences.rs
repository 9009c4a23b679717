use std::ops::Range;

/// Tokens that end in a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "jr.", "sr.", "vs.", "etc.", "e.g.", "i.e.",
    "inc.", "ltd.", "co.", "corp.", "no.", "u.s.", "u.k.", "mt.", "ft.", "gen.", "gov.", "sen.",
    "rep.", "rev.", "lt.", "col.", "capt.", "approx.", "dept.", "est.", "fig.", "jan.", "feb.",
    "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.", "dec.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201d}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201c}', '\u{2018}'];

/// Splits `body` into sentence byte ranges.
///
/// A sentence ends at `.`, `!` or `?` (plus any closing quotes or brackets)
/// when followed by whitespace and then an uppercase letter or digit,
/// optionally behind an opening quote or bracket. A period never ends a
/// sentence after a listed abbreviation or a single capital initial.
/// Ranges exclude surrounding whitespace.
pub fn split_sentences(body: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    let mut iter = body.char_indices().peekable();
    while let Some((i, c)) = iter.next() {
        if start.is_none() && !c.is_whitespace() {
            start = Some(i);
        }
        if !matches!(c, '.' | '!' | '?') {
            continue;
        }
        let mut end = i + c.len_utf8();
        while let Some(&(j, d)) = iter.peek() {
            if CLOSERS.contains(&d) || matches!(d, '.' | '!' | '?') {
                end = j + d.len_utf8();
                iter.next();
            } else {
                break;
            }
        }
        if !boundary_follows(&body[end..]) {
            continue;
        }
        if c == '.' && is_abbreviation(&body[..i + 1]) {
            continue;
        }
        if let Some(s) = start.take() {
            out.push(s..end);
        }
    }
    if let Some(s) = start {
        let end = s + body[s..].trim_end().len();
        if end > s {
            out.push(s..end);
        }
    }
    out
}

fn boundary_follows(rest: &str) -> bool {
    let trimmed = rest.trim_start();
    if trimmed.len() == rest.len() {
        return false;
    }
    let trimmed = trimmed.trim_start_matches(OPENERS);
    trimmed
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

fn is_abbreviation(upto_period: &str) -> bool {
    let token = upto_period
        .rsplit(char::is_whitespace)
        .next()
        .unwrap_or(upto_period)
        .trim_start_matches(OPENERS);
    let lowered = token.to_lowercase();
    if ABBREVIATIONS.contains(&lowered.as_str()) {
        return true;
    }
    let mut chars = token.chars();
    matches!((chars.next(), chars.next(), chars.next()), (Some(a), Some('.'), None) if a.is_uppercase())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(body: &str) -> Vec<&str> {
        split_sentences(body)
            .into_iter()
            .map(|r| &body[r])
            .collect()
    }

    #[test]
    fn basic_split() {
        assert_eq!(
            sentences("A b c. D e f. G h i j."),
            ["A b c.", "D e f.", "G h i j."]
        );
        assert_eq!(
            sentences("  One!  Two? 3 is next."),
            ["One!", "Two?", "3 is next."]
        );
        assert_eq!(sentences("no end"), ["no end"]);
        assert!(sentences("   ").is_empty());
    }

    #[test]
    fn no_split_inside_abbreviations_or_lowercase() {
        assert_eq!(
            sentences("Dr. Smith met Mr. Jones in the U.S. Army. It rained."),
            ["Dr. Smith met Mr. Jones in the U.S. Army.", "It rained."]
        );
        assert_eq!(
            sentences("J. R. Tolkien wrote. Yes."),
            ["J. R. Tolkien wrote.", "Yes."]
        );
        assert_eq!(
            sentences("pi is 3.14 or so. ok then."),
            ["pi is 3.14 or so. ok then."]
        );
    }

    #[test]
    fn quotes_and_brackets() {
        assert_eq!(
            sentences("He said \"Go.\" Then \"She left.\" (Fine.) End"),
            ["He said \"Go.\"", "Then \"She left.\"", "(Fine.)", "End"]
        );
    }
}
