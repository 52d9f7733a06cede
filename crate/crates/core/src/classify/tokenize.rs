/// Splits on Unicode whitespace and detaches every character that is
/// neither alphanumeric nor whitespace into its own token.
///
/// This is the counting tokenizer behind `token_count` and token yield.
pub fn tokenize_words(text: &str) -> Vec<&str> {
    let mut tokens = Vec::new();
    for chunk in text.split_whitespace() {
        let mut start = None;
        for (i, c) in chunk.char_indices() {
            if c.is_alphanumeric() || c == '_' {
                start.get_or_insert(i);
            } else {
                if let Some(s) = start.take() {
                    tokens.push(&chunk[s..i]);
                }
                tokens.push(&chunk[i..i + c.len_utf8()]);
            }
        }
        if let Some(s) = start {
            tokens.push(&chunk[s..]);
        }
    }
    tokens
}

pub fn count_words(text: &str) -> u64 {
    tokenize_words(text).len() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splits_on_whitespace_runs() {
        assert_eq!(tokenize_words("a b  c"), vec!["a", "b", "c"]);
        assert!(tokenize_words("").is_empty());
        assert!(tokenize_words(" \n\t ").is_empty());
    }

    #[test]
    fn detaches_punctuation() {
        assert_eq!(tokenize_words("x, y"), vec!["x", ",", "y"]);
        assert_eq!(
            tokenize_words("f(x)=1;"),
            vec!["f", "(", "x", ")", "=", "1", ";"]
        );
        assert_eq!(tokenize_words("don't"), vec!["don", "'", "t"]);
    }

    #[test]
    fn keeps_unicode_letters_together() {
        assert_eq!(
            tokenize_words("déjà vu € ok"),
            vec!["déjà", "vu", "€", "ok"]
        );
        assert_eq!(tokenize_words("snake_case"), vec!["snake_case"]);
    }
}
