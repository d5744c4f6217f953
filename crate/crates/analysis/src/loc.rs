//! Lexical line counting for the source languages recognized by the Java-share filter.

use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Language {
    Java,
    Kotlin,
    C,
    Cpp,
    CSharp,
    JavaScript,
    Python,
}

impl Language {
    pub fn from_path(path: &Path) -> Option<Language> {
        match path.extension()?.to_str()? {
            "java" => Some(Language::Java),
            "kt" => Some(Language::Kotlin),
            "c" => Some(Language::C),
            "cpp" => Some(Language::Cpp),
            "cs" => Some(Language::CSharp),
            "js" => Some(Language::JavaScript),
            "py" => Some(Language::Python),
            _ => None,
        }
    }
}

/// Lines holding at least one non-whitespace character outside comments.
pub fn count_code_lines(src: &str, lang: Language) -> u32 {
    match lang {
        Language::Python => count_hash_comment_lines(src),
        _ => count_c_like_lines(src),
    }
}

fn count_hash_comment_lines(src: &str) -> u32 {
    let mut count = 0;
    for line in src.lines() {
        let mut quote: Option<char> = None;
        let mut escaped = false;
        let mut code = false;
        for ch in line.chars() {
            if let Some(q) = quote {
                if escaped {
                    escaped = false;
                } else if ch == '\\' {
                    escaped = true;
                } else if ch == q {
                    quote = None;
                }
                continue;
            }
            match ch {
                '#' => break,
                '"' | '\'' => {
                    quote = Some(ch);
                    code = true;
                }
                c if !c.is_whitespace() => code = true,
                _ => {}
            }
        }
        count += u32::from(code);
    }
    count
}

fn count_c_like_lines(src: &str) -> u32 {
    #[derive(PartialEq)]
    enum State {
        Code,
        Block,
        Str(char),
    }
    let mut state = State::Code;
    let mut count = 0;
    for line in src.lines() {
        let mut code = false;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let ch = chars[i];
            let next = chars.get(i + 1).copied();
            match state {
                State::Block => {
                    if ch == '*' && next == Some('/') {
                        state = State::Code;
                        i += 1;
                    }
                }
                State::Str(q) => {
                    code = true;
                    if ch == '\\' {
                        i += 1;
                    } else if ch == q {
                        state = State::Code;
                    }
                }
                State::Code => match (ch, next) {
                    ('/', Some('/')) => break,
                    ('/', Some('*')) => {
                        state = State::Block;
                        i += 1;
                    }
                    ('"', _) | ('\'', _) => {
                        state = State::Str(ch);
                        code = true;
                    }
                    (c, _) if !c.is_whitespace() => code = true,
                    _ => {}
                },
            }
            i += 1;
        }
        // unterminated string literals do not span lines
        if matches!(state, State::Str(_)) {
            state = State::Code;
        }
        count += u32::from(code);
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_like_comments_and_blanks() {
        let src = "// header\n\nint a; /* x */\n/* multi\n line */ int b;\n/*\n*/\nString s = \"// not a comment\";\n";
        assert_eq!(count_code_lines(src, Language::Java), 3);
    }

    #[test]
    fn python_hash_comments() {
        let src = "# c\nx = 1  # trailing\n\ns = '#'\n";
        assert_eq!(count_code_lines(src, Language::Python), 2);
    }

    #[test]
    fn extensions() {
        assert_eq!(Language::from_path(Path::new("a/B.kt")), Some(Language::Kotlin));
        assert_eq!(Language::from_path(Path::new("a/B.xml")), None);
    }
}
