//! Word splitting for the unique-words counters.

/// Split source text into case-folded words: runs of alphanumerics, further split
/// at camelCase and acronym boundaries (`parseHTTPResponse` → parse, http, response).
pub fn split_words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for run in text.split(|c: char| !c.is_alphanumeric()) {
        if run.is_empty() {
            continue;
        }
        let chars: Vec<char> = run.chars().collect();
        let mut start = 0;
        for i in 1..chars.len() {
            let (prev, cur) = (chars[i - 1], chars[i]);
            let lower_to_upper = (prev.is_lowercase() || prev.is_ascii_digit()) && cur.is_uppercase();
            let acronym_end = prev.is_uppercase()
                && cur.is_uppercase()
                && chars.get(i + 1).is_some_and(|n| n.is_lowercase());
            if lower_to_upper || acronym_end {
                out.push(chars[start..i].iter().collect::<String>().to_lowercase());
                start = i;
            }
        }
        out.push(chars[start..].iter().collect::<String>().to_lowercase());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::split_words;

    #[test]
    fn splits_camel_case_and_acronyms() {
        assert_eq!(split_words("parseHTTPResponse"), vec!["parse", "http", "response"]);
        assert_eq!(split_words("MAX_VALUE"), vec!["max", "value"]);
        assert_eq!(split_words("getX2Y"), vec!["get", "x2", "y"]);
        assert_eq!(split_words("a.b(\"Hello world\")"), vec!["a", "b", "hello", "world"]);
        assert!(split_words("{ }").is_empty());
    }
}
