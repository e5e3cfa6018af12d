//! Tokenizing helpers shared by the manual reader and the lexical provider.

use std::collections::HashSet;
use std::sync::LazyLock;

/// Fixed English stopword list.
pub const STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
    "are", "as", "at", "be", "because", "been", "before", "being", "below", "between", "both",
    "but", "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "either",
    "else", "even", "ever", "every", "few", "for", "from", "further", "get", "gets", "got", "had",
    "has", "have", "having", "he", "her", "here", "hers", "herself", "him", "himself", "his",
    "how", "however", "i", "if", "in", "into", "is", "it", "its", "itself", "just", "least",
    "less", "let", "like", "made", "make", "makes", "many", "may", "me", "might", "more", "most",
    "much", "must", "my", "myself", "never", "no", "nor", "not", "now", "of", "off", "often",
    "on", "once", "one", "only", "or", "other", "others", "our", "ours", "ourselves", "out",
    "over", "own", "per", "rather", "same", "say", "says", "she", "should", "since", "so",
    "some", "still", "such", "than", "that", "the", "their", "theirs", "them", "themselves",
    "then", "there", "these", "they", "this", "those", "though", "through", "thus", "to", "too",
    "under", "until", "up", "upon", "us", "use", "used", "very", "was", "we", "well", "were",
    "what", "when", "where", "whether", "which", "while", "who", "whom", "whose", "why", "will",
    "with", "within", "without", "would", "yet", "you", "your", "yours", "yourself",
    "yourselves",
];

static STOPWORD_SET: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| STOPWORDS.iter().copied().collect());

pub fn is_stopword(word: &str) -> bool {
    STOPWORD_SET.contains(word)
}

/// Lowercased alphabetic runs; everything else separates words.
pub fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase())
}

/// Whitespace-delimited tokens, the unit for chunk sizes.
pub fn token_count(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Split on `.`, `!` or `?` followed by whitespace, and at line breaks.
/// The terminator stays with its sentence.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c == '\n' {
            let s = text[start..i].trim();
            if !s.is_empty() {
                out.push(s);
            }
            start = i + 1;
        } else if matches!(c, '.' | '!' | '?') {
            if let Some(&(_, next)) = chars.peek() {
                if next.is_whitespace() {
                    let s = text[start..=i].trim();
                    if !s.is_empty() {
                        out.push(s);
                    }
                    start = i + 1;
                }
            }
        }
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        out.push(tail);
    }
    out
}

/// Crude suffix folding so that inflected forms compare equal
/// (`losing`/`lose`, `ghosts`/`ghost`, `scored`/`score`).
pub fn stem(word: &str) -> String {
    let mut w = word.to_lowercase();
    let n = w.len();
    if n > 4 && w.ends_with("ing") {
        w.truncate(n - 3);
    } else if n > 3 && (w.ends_with("ed") || w.ends_with("es")) {
        w.truncate(n - 2);
    } else if n > 2 && w.ends_with('s') && !w.ends_with("ss") && !w.ends_with("us") {
        w.truncate(n - 1);
    }
    if w.len() > 3 && w.ends_with('e') {
        w.pop();
    }
    w
}

/// Stemmed non-stopword words.
pub fn content_stems(text: &str) -> Vec<String> {
    words(text).filter(|w| !is_stopword(w)).map(|w| stem(&w)).collect()
}
