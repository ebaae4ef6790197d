//! Text normalization and grounding checks shared by the model, the
//! pipelines and the validator.

/// Collapses runs of Unicode whitespace to a single space, trims, and
/// case-folds.
pub fn normalize_ws(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pending_space = false;
    for ch in text.chars() {
        if ch.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(ch.to_lowercase());
    }
    out
}

/// Name equality used for theme and question dedup.
pub fn same_name(a: &str, b: &str) -> bool {
    normalize_ws(a) == normalize_ws(b)
}

/// True when `quote` is a contiguous substring of the corpus after
/// normalization. An empty quote is never grounded.
pub fn is_grounded<'a, I>(quote: &str, corpus: I) -> bool
where
    I: IntoIterator<Item = &'a str>,
{
    let needle = normalize_ws(quote);
    if needle.is_empty() {
        return false;
    }
    normalized_corpus(corpus).contains(&needle)
}

/// Joins corpus pieces with a single space and normalizes the result.
pub fn normalized_corpus<'a, I>(pieces: I) -> String
where
    I: IntoIterator<Item = &'a str>,
{
    let joined: Vec<&str> = pieces.into_iter().collect();
    normalize_ws(&joined.join(" "))
}

/// Smallest edit distance between `needle` and any substring of
/// `haystack` (approximate substring matching, free start and end in the
/// haystack).
pub fn substring_edit_distance(needle: &str, haystack: &str) -> usize {
    let pattern: Vec<char> = needle.chars().collect();
    if pattern.is_empty() {
        return 0;
    }
    // column over the pattern, rolled across haystack characters
    let mut prev: Vec<usize> = (0..=pattern.len()).collect();
    let mut best = prev[pattern.len()];
    for hc in haystack.chars() {
        let mut cur = vec![0usize; pattern.len() + 1];
        for (i, pc) in pattern.iter().enumerate() {
            let substitute = prev[i] + usize::from(*pc != hc);
            cur[i + 1] = substitute.min(prev[i + 1] + 1).min(cur[i] + 1);
        }
        best = best.min(cur[pattern.len()]);
        prev = cur;
    }
    best
}

/// Splits text into sentences on terminal punctuation and line breaks.
/// Returned slices are trimmed and keep their terminal punctuation.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut iter = text.char_indices().peekable();
    while let Some((idx, ch)) = iter.next() {
        let boundary = match ch {
            '\n' => true,
            '.' | '!' | '?' | '。' | '？' | '！' => iter
                .peek()
                .map(|(_, next)| next.is_whitespace())
                .unwrap_or(true),
            _ => false,
        };
        if boundary {
            let end = idx + ch.len_utf8();
            let piece = text[start..end].trim();
            if piece.chars().any(char::is_alphanumeric) {
                out.push(piece);
            }
            start = end;
        }
    }
    let tail = text[start..].trim();
    if tail.chars().any(char::is_alphanumeric) {
        out.push(tail);
    }
    out
}

/// Lower-cased alphanumeric word tokens.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric() && c != '\'' && c != '’')
        .map(|w| w.trim_matches(|c: char| c == '\'' || c == '’'))
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Number of whitespace-separated tokens.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Maps locale-specific question punctuation onto `?` and reports
/// whether the text ends with a question mark afterwards.
pub fn normalize_question_mark(text: &str) -> Option<String> {
    let trimmed = text.trim();
    let mut chars: Vec<char> = trimmed.chars().collect();
    match chars.last_mut() {
        Some(last) if matches!(*last, '?' | '？' | '؟') => {
            *last = '?';
            Some(chars.into_iter().collect())
        }
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_collapses_and_folds() {
        assert_eq!(normalize_ws("  Hello\t\n  WORLD  "), "hello world");
        assert_eq!(normalize_ws("\u{3000}가\u{00a0}나 "), "가 나");
        assert_eq!(normalize_ws("   "), "");
    }

    #[test]
    fn grounding_is_whitespace_and_case_insensitive() {
        let corpus = ["I retired and now\ncare for my grandson.", "Second answer."];
        assert!(is_grounded("now care for MY grandson", corpus));
        assert!(is_grounded("grandson. second", corpus));
        assert!(!is_grounded("care for my granddaughter", corpus));
        assert!(!is_grounded("  ", corpus));
    }

    #[test]
    fn substring_distance_finds_near_misses() {
        assert_eq!(substring_edit_distance("care for", "i now care for him"), 0);
        assert_eq!(substring_edit_distance("cart for", "i now care for him"), 1);
        assert_eq!(substring_edit_distance("cre fro", "i now care for him"), 2);
        assert!(substring_edit_distance("zzzzzz", "abc") >= 3);
    }

    #[test]
    fn sentence_split_keeps_punctuation() {
        let s = sentences("First one. Second? Third!\nFourth without stop");
        assert_eq!(s, vec!["First one.", "Second?", "Third!", "Fourth without stop"]);
        assert_eq!(sentences("3.5 hours. Done."), vec!["3.5 hours.", "Done."]);
    }

    #[test]
    fn question_mark_mapping() {
        assert_eq!(normalize_question_mark("왜 그런가요？").as_deref(), Some("왜 그런가요?"));
        assert_eq!(normalize_question_mark("Why? ").as_deref(), Some("Why?"));
        assert_eq!(normalize_question_mark("Tell me more."), None);
    }
}
