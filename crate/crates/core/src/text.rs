//! Term tokenization and the embedded English stopword list.

use std::collections::HashSet;
use std::sync::OnceLock;

/// The 179-entry English stopword list, one word per line.
pub const STOPWORDS_TXT: &str = include_str!("stopwords.txt");

pub fn stopwords() -> &'static HashSet<&'static str> {
    static SET: OnceLock<HashSet<&'static str>> = OnceLock::new();
    SET.get_or_init(|| STOPWORDS_TXT.lines().filter(|l| !l.is_empty()).collect())
}

/// Case-insensitive stopword membership.
pub fn is_stopword(word: &str) -> bool {
    let set = stopwords();
    set.contains(word) || set.contains(word.to_lowercase().as_str())
}

/// Lowercased maximal alphanumeric runs of at least two characters, in order.
pub fn term_tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_owned)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_examples() {
        assert_eq!(term_tokenize("COVID-19 spreads!"), vec!["covid", "19", "spreads"]);
        assert!(term_tokenize("a I x").is_empty());
        assert!(term_tokenize("").is_empty());
        assert_eq!(term_tokenize("Café naïve"), vec!["café", "naïve"]);
    }

    #[test]
    fn stopword_list_is_complete() {
        assert_eq!(STOPWORDS_TXT.lines().count(), 179);
        assert_eq!(stopwords().len(), 179);
        for w in ["the", "i", "wouldn't", "ourselves", "ain", "ma"] {
            assert!(is_stopword(w), "{w}");
        }
        assert!(is_stopword("The"));
        assert!(!is_stopword("defensive"));
    }
}
