//! Reading a game manual: normalization, chunking, keyword ranking and
//! question answering into per-object context bundles.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::GameKind;
use crate::provider::{ExtractiveQuery, ProviderError, QaProvider};
use crate::text::{is_stopword, stem, words};

pub const DEFAULT_MAX_TOKENS: usize = 256;
pub const MIN_MAX_TOKENS: usize = 32;
pub const DEFAULT_TOP_K: usize = 10;

pub const GENERIC_QUESTIONS: [&str; 4] = [
    "What is the objective of the game?",
    "How to succeed in the game?",
    "How to score at the game?",
    "Who are your enemies?",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManualError {
    #[error("manual is empty after normalization")]
    Empty,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("provider failed on chunk {chunk}: {source}")]
    Provider { chunk: usize, source: ProviderError },
    #[error("no question about `{0}` has an answer")]
    EmptyContext(String),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Official,
    Wiki,
    Custom,
}

impl FromStr for SourceTag {
    type Err = ManualError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "official" => Ok(SourceTag::Official),
            "wiki" => Ok(SourceTag::Wiki),
            "custom" => Ok(SourceTag::Custom),
            _ => Err(ManualError::InvalidArgument(format!("unknown source tag `{s}`"))),
        }
    }
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceTag::Official => "official",
            SourceTag::Wiki => "wiki",
            SourceTag::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManualDoc {
    pub source_tag: SourceTag,
    pub text: String,
    pub paragraphs: Vec<String>,
    /// Lowercased copy of `text`, same length in chars.
    pub shadow: String,
}

static BLOCK_TAG: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)<\s*(/\s*(p|div|li|ul|ol|h[1-6]|tr|table|section|article)|br\s*/?|hr\s*/?)\s*>").unwrap()
});
static SCRIPT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)<(script|style)\b.*?</(script|style)\s*>").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());
static BLANK_LINE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n[ \t\r]*\n").unwrap());

fn decode_entities(s: &str) -> String {
    s.replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Strip markup, split paragraphs on blank lines, collapse whitespace.
pub fn normalize(raw: &str, source_tag: SourceTag) -> Result<ManualDoc, ManualError> {
    let raw = raw.replace("\r\n", "\n");
    let no_script = SCRIPT.replace_all(&raw, "");
    let blocks = BLOCK_TAG.replace_all(&no_script, "\n\n");
    let plain = decode_entities(&TAG.replace_all(&blocks, " "));
    let paragraphs: Vec<String> = BLANK_LINE
        .split(&plain)
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|p| !p.is_empty())
        .collect();
    if paragraphs.is_empty() {
        return Err(ManualError::Empty);
    }
    let text = paragraphs.join("\n\n");
    let shadow = text.to_lowercase();
    Ok(ManualDoc {
        source_tag,
        text,
        paragraphs,
        shadow,
    })
}

pub fn load_manual(path: &Path, source_tag: SourceTag) -> Result<ManualDoc, ManualError> {
    let raw = fs::read_to_string(path).map_err(|e| ManualError::Io(format!("{}: {e}", path.display())))?;
    normalize(&raw, source_tag)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chunk {
    pub text: String,
    pub token_count: usize,
    pub index: usize,
}

/// Greedy packing of whole paragraphs into chunks of at most `max_tokens`
/// whitespace tokens. A paragraph longer than that is cut into
/// `max_tokens`-sized pieces first.
pub fn chunk(doc: &ManualDoc, max_tokens: usize) -> Result<Vec<Chunk>, ManualError> {
    if max_tokens < MIN_MAX_TOKENS {
        return Err(ManualError::InvalidArgument(format!(
            "max_tokens {max_tokens} below {MIN_MAX_TOKENS}"
        )));
    }
    let mut units: Vec<(String, usize)> = Vec::new();
    for p in &doc.paragraphs {
        let toks: Vec<&str> = p.split_whitespace().collect();
        if toks.len() <= max_tokens {
            units.push((p.clone(), toks.len()));
        } else {
            for piece in toks.chunks(max_tokens) {
                units.push((piece.join(" "), piece.len()));
            }
        }
    }
    let mut chunks = Vec::new();
    let mut cur: Vec<String> = Vec::new();
    let mut cur_n = 0;
    for (text, n) in units {
        if cur_n + n > max_tokens && !cur.is_empty() {
            chunks.push(Chunk {
                text: cur.join("\n\n"),
                token_count: cur_n,
                index: chunks.len(),
            });
            cur.clear();
            cur_n = 0;
        }
        cur.push(text);
        cur_n += n;
    }
    if !cur.is_empty() {
        chunks.push(Chunk {
            text: cur.join("\n\n"),
            token_count: cur_n,
            index: chunks.len(),
        });
    }
    Ok(chunks)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Keyword {
    pub term: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordRanking {
    pub entries: Vec<Keyword>,
    /// Fewer than `k` candidate terms existed.
    pub short: bool,
}

impl KeywordRanking {
    pub fn terms(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|k| k.term.as_str())
    }
}

fn is_candidate(w: &str) -> bool {
    w.chars().count() >= 3 && !is_stopword(w)
}

/// TF-IDF with the manual's paragraphs as the document collection. A term's
/// score is its best tf-idf over paragraphs.
pub fn tfidf_rank(doc: &ManualDoc, k: usize) -> Result<KeywordRanking, ManualError> {
    if k == 0 {
        return Err(ManualError::InvalidArgument("k must be at least 1".into()));
    }
    let paras: Vec<Vec<String>> = doc.paragraphs.iter().map(|p| words(p).collect()).collect();
    let n = paras.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    let mut counts: Vec<HashMap<&str, usize>> = Vec::with_capacity(paras.len());
    for toks in &paras {
        let mut c: HashMap<&str, usize> = HashMap::new();
        for t in toks.iter().filter(|t| is_candidate(t)) {
            *c.entry(t.as_str()).or_default() += 1;
        }
        for t in c.keys() {
            *df.entry(t).or_default() += 1;
        }
        counts.push(c);
    }
    let mut best: HashMap<&str, f64> = HashMap::new();
    for (toks, c) in paras.iter().zip(&counts) {
        let len = toks.len() as f64;
        for (t, cnt) in c {
            let idf = ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0;
            let s = *cnt as f64 / len * idf;
            let e = best.entry(t).or_insert(0.0);
            if s > *e {
                *e = s;
            }
        }
    }
    let mut entries: Vec<Keyword> = best
        .into_iter()
        .map(|(t, s)| Keyword {
            term: t.to_string(),
            score: s,
        })
        .collect();
    entries.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.term.cmp(&b.term)));
    let short = entries.len() < k;
    entries.truncate(k);
    Ok(KeywordRanking { entries, short })
}

pub fn generic_questions() -> Vec<String> {
    GENERIC_QUESTIONS.iter().map(|q| q.to_string()).collect()
}

pub fn object_question(object: &str) -> Result<String, ManualError> {
    if object.is_empty() || object.chars().any(|c| !(c.is_lowercase() || c == '_' || c.is_ascii_digit())) {
        return Err(ManualError::InvalidArgument(format!(
            "object must be a nonempty lowercase token, got `{object}`"
        )));
    }
    Ok(format!("What happens when the player hit a {object}?"))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaPair {
    #[serde(rename = "q")]
    pub question: String,
    #[serde(rename = "a")]
    pub answer: String,
}

impl QaPair {
    pub fn render(&self) -> String {
        let a = self.answer.trim();
        let stop = if a.ends_with(['.', '!', '?']) { "" } else { "." };
        format!("Question: {} Answer: {a}{stop}", self.question)
    }
}

fn ask_chunks<P: QaProvider + ?Sized>(
    provider: &P,
    chunks: &[Chunk],
    question: &str,
) -> Result<QaPair, ManualError> {
    let mut parts = Vec::new();
    for c in chunks {
        let q = ExtractiveQuery::new(c.text.as_str(), question).map_err(|source| ManualError::Provider {
            chunk: c.index,
            source,
        })?;
        let a = provider.answer(&q).map_err(|source| ManualError::Provider {
            chunk: c.index,
            source,
        })?;
        let a = a.trim();
        if !a.is_empty() {
            parts.push(a.to_string());
        }
    }
    let last = parts.len().saturating_sub(1);
    let joined = parts
        .iter()
        .enumerate()
        .map(|(i, p)| if i < last { p.trim_end_matches('.') } else { p.as_str() })
        .collect::<Vec<_>>()
        .join(". ");
    Ok(QaPair {
        question: question.to_string(),
        answer: joined,
    })
}

/// Ask `question` of every chunk and join the non-empty answers with ". ".
pub fn extract<P: QaProvider + ?Sized>(
    provider: &P,
    doc: &ManualDoc,
    question: &str,
    max_tokens: usize,
) -> Result<QaPair, ManualError> {
    ask_chunks(provider, &chunk(doc, max_tokens)?, question)
}

/// Generic pairs followed by the object pair; empty answers never appear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub object: String,
    pub pairs: Vec<QaPair>,
    pub rendered: String,
}

impl ContextBundle {
    /// Drops empty answers and renders the rest in order.
    pub fn from_pairs(object: impl Into<String>, pairs: Vec<QaPair>) -> Self {
        let pairs: Vec<QaPair> = pairs
            .into_iter()
            .map(|p| QaPair {
                answer: p.answer.trim_start_matches(|c: char| !c.is_alphanumeric()).trim_end().to_string(),
                ..p
            })
            .filter(|p| !p.answer.is_empty())
            .collect();
        let rendered = pairs.iter().map(QaPair::render).collect::<Vec<_>>().join("\n");
        ContextBundle {
            object: object.into(),
            pairs,
            rendered,
        }
    }
}

/// Answers to the generic questions with consecutive repeats collapsed.
pub fn generic_pairs<P: QaProvider + ?Sized>(
    provider: &P,
    chunks: &[Chunk],
) -> Result<Vec<QaPair>, ManualError> {
    let mut out: Vec<QaPair> = Vec::new();
    for q in GENERIC_QUESTIONS {
        let p = ask_chunks(provider, chunks, q)?;
        if p.answer.is_empty() {
            continue;
        }
        if out.last().is_some_and(|prev| prev.answer == p.answer) {
            continue;
        }
        out.push(p);
    }
    Ok(out)
}

pub fn build_context<P: QaProvider + ?Sized>(
    provider: &P,
    doc: &ManualDoc,
    object: &str,
) -> Result<ContextBundle, ManualError> {
    build_context_with(provider, doc, object, DEFAULT_MAX_TOKENS)
}

pub fn build_context_with<P: QaProvider + ?Sized>(
    provider: &P,
    doc: &ManualDoc,
    object: &str,
    max_tokens: usize,
) -> Result<ContextBundle, ManualError> {
    let chunks = chunk(doc, max_tokens)?;
    let generic = generic_pairs(provider, &chunks)?;
    bundle_for(provider, &chunks, generic, object)
}

/// Context for `object` reusing already-computed generic pairs.
pub fn bundle_for<P: QaProvider + ?Sized>(
    provider: &P,
    chunks: &[Chunk],
    generic: Vec<QaPair>,
    object: &str,
) -> Result<ContextBundle, ManualError> {
    let oq = object_question(object)?;
    let mut pairs = generic;
    let op = ask_chunks(provider, chunks, &oq)?;
    if !op.answer.is_empty() {
        pairs.push(op);
    }
    if pairs.is_empty() {
        return Err(ManualError::EmptyContext(object.to_string()));
    }
    Ok(ContextBundle::from_pairs(object, pairs))
}

/// Game classes in keyword-rank order (singular/plural folded), followed by
/// the classes the manual never ranked.
pub fn ground_objects(ranking: &KeywordRanking, game: GameKind) -> (Vec<&'static str>, Vec<&'static str>) {
    let classes = game.object_classes();
    let mut ranked: Vec<&'static str> = Vec::new();
    for term in ranking.terms() {
        let s = stem(term);
        if let Some(c) = classes.iter().find(|c| stem(c) == s) {
            if !ranked.contains(c) {
                ranked.push(c);
            }
        }
    }
    let rest = classes.iter().copied().filter(|c| !ranked.contains(c)).collect();
    (ranked, rest)
}

/// On-disk form of `readward read` output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextFile {
    pub game: GameKind,
    pub source_tag: SourceTag,
    pub keywords: Vec<Keyword>,
    pub contexts: Vec<ContextBundle>,
}

impl ContextFile {
    pub fn load(path: &Path) -> Result<Self, ManualError> {
        let raw = fs::read_to_string(path).map_err(|e| ManualError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&raw).map_err(|e| ManualError::Io(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("context file serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<(), ManualError> {
        fs::write(path, self.to_json()).map_err(|e| ManualError::Io(format!("{}: {e}", path.display())))
    }
}

/// Keyword ranking plus contexts for `objects` (or the grounded game classes).
pub fn read_manual<P: QaProvider + ?Sized>(
    provider: &P,
    doc: &ManualDoc,
    game: GameKind,
    k: usize,
    objects: Option<&[String]>,
    max_tokens: usize,
) -> Result<ContextFile, ManualError> {
    let ranking = tfidf_rank(doc, k)?;
    let targets: Vec<String> = match objects {
        Some(o) => o.to_vec(),
        None => {
            let (ranked, rest) = ground_objects(&ranking, game);
            if !rest.is_empty() {
                log::info!("classes not among the top {k} keywords: {rest:?}");
            }
            ranked.into_iter().chain(rest).map(String::from).collect()
        }
    };
    let chunks = chunk(doc, max_tokens)?;
    let generic = generic_pairs(provider, &chunks)?;
    let mut contexts = Vec::new();
    for o in &targets {
        match bundle_for(provider, &chunks, generic.clone(), o) {
            Ok(b) => contexts.push(b),
            Err(ManualError::EmptyContext(o)) => log::warn!("nothing in the manual about `{o}`; skipped"),
            Err(e) => return Err(e),
        }
    }
    Ok(ContextFile {
        game,
        source_tag: doc.source_tag,
        keywords: ranking.entries,
        contexts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{ChoiceQuery, ChoiceScores, LexicalProvider};
    use crate::text::token_count;
    use proptest::prelude::*;

    fn doc(text: &str) -> ManualDoc {
        normalize(text, SourceTag::Custom).unwrap()
    }

    fn words_n(n: usize, w: &str) -> String {
        vec![w; n].join(" ")
    }

    #[test]
    fn html_is_stripped() {
        let d = doc("<p>Hello  world</p>");
        assert_eq!(d.text, "Hello world");
        assert_eq!(d.paragraphs.len(), 1);
        let d = doc("<p>One</p><p>Two &amp; three</p>");
        assert_eq!(d.paragraphs, vec!["One", "Two & three"]);
    }

    #[test]
    fn blank_lines_split_paragraphs() {
        assert_eq!(doc("first para\nstill first\n\nsecond").paragraphs.len(), 2);
    }

    #[test]
    fn markup_only_is_empty() {
        assert_eq!(normalize("<div><br/></div>", SourceTag::Custom), Err(ManualError::Empty));
    }

    #[test]
    fn greedy_packing_of_three_paragraphs() {
        let p = words_n(100, "x");
        let d = doc(&format!("{p}\n\n{p}\n\n{p}"));
        let c = chunk(&d, 250).unwrap();
        assert_eq!(c.iter().map(|c| c.token_count).collect::<Vec<_>>(), vec![200, 100]);
        assert_eq!(c[0].text, format!("{p}\n\n{p}"));
    }

    #[test]
    fn short_doc_single_chunk() {
        assert_eq!(chunk(&doc("just a few words"), 256).unwrap().len(), 1);
    }

    #[test]
    fn long_paragraph_is_cut() {
        let c = chunk(&doc(&words_n(600, "y")), 256).unwrap();
        assert_eq!(c.iter().map(|c| c.token_count).collect::<Vec<_>>(), vec![256, 256, 88]);
    }

    #[test]
    fn tiny_max_tokens_rejected() {
        assert!(chunk(&doc("a"), 31).is_err());
    }

    #[test]
    fn tfidf_toy_document() {
        // hand computation: N = 3; "ghost" df = 1, idf = ln(4/2) + 1;
        // paragraph 1 has 7 tokens with 6 ghosts
        let d = doc(
            "ghost ghost ghost ghost ghost the ghost\n\n\
             the player moves around the maze and the player eats\n\n\
             the player and the maze are shown on screen",
        );
        let r = tfidf_rank(&d, 10).unwrap();
        assert_eq!(r.entries[0].term, "ghost");
        let expected = 6.0 / 7.0 * ((4.0f64 / 2.0).ln() + 1.0);
        assert!((r.entries[0].score - expected).abs() < 1e-12);
        // "player" appears in two paragraphs: idf = ln(4/3) + 1, best tf = 2/10
        let player = r.entries.iter().find(|k| k.term == "player").unwrap();
        assert!((player.score - 0.2 * ((4.0f64 / 3.0).ln() + 1.0)).abs() < 1e-12);
        assert!(r.short);
    }

    #[test]
    fn stopwords_only_gives_short_empty_ranking() {
        let r = tfidf_rank(&doc("the and of to it is"), 10).unwrap();
        assert!(r.entries.is_empty() && r.short);
        assert!(tfidf_rank(&doc("x"), 0).is_err());
    }

    #[test]
    fn question_templates() {
        let g = generic_questions();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], "What is the objective of the game?");
        assert_eq!(g[3], "Who are your enemies?");
        assert_eq!(object_question("ghost").unwrap(), "What happens when the player hit a ghost?");
        assert_eq!(object_question("tree").unwrap(), "What happens when the player hit a tree?");
        assert!(object_question("").is_err());
        assert!(object_question("Ghost").is_err());
    }

    /// Answers from a fixed map of (chunk substring, question) to span.
    struct Spans(Vec<(&'static str, &'static str, &'static str)>);

    impl QaProvider for Spans {
        fn name(&self) -> String {
            "spans".into()
        }
        fn answer(&self, q: &ExtractiveQuery) -> Result<String, ProviderError> {
            Ok(self
                .0
                .iter()
                .find(|(needle, question, _)| q.passage.contains(needle) && q.question == *question)
                .map(|(_, _, a)| a.to_string())
                .unwrap_or_default())
        }
        fn score_choices(&self, _: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
            Err(ProviderError::Abstain)
        }
    }

    #[test]
    fn answers_from_two_chunks_are_joined() {
        let a = words_n(40, "alpha");
        let b = words_n(40, "beta");
        let d = doc(&format!("{a}\n\n{b}"));
        let p = Spans(vec![
            ("alpha", "Who are your enemies?", "Ghosts"),
            ("beta", "Who are your enemies?", "stay close to an energy pill."),
        ]);
        let pair = extract(&p, &d, "Who are your enemies?", 40).unwrap();
        assert_eq!(pair.answer, "Ghosts. stay close to an energy pill.");
        let none = extract(&p, &d, "How to score at the game?", 40).unwrap();
        assert_eq!(none.answer, "");
    }

    #[test]
    fn provider_error_carries_chunk_index() {
        struct Failing;
        impl QaProvider for Failing {
            fn name(&self) -> String {
                "failing".into()
            }
            fn answer(&self, q: &ExtractiveQuery) -> Result<String, ProviderError> {
                if q.passage.contains("beta") {
                    Err(ProviderError::Transport("down".into()))
                } else {
                    Ok(String::new())
                }
            }
            fn score_choices(&self, _: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
                Err(ProviderError::Abstain)
            }
        }
        let d = doc(&format!("{}\n\n{}", words_n(40, "alpha"), words_n(40, "beta")));
        match extract(&Failing, &d, "q?", 40) {
            Err(ManualError::Provider { chunk, .. }) => assert_eq!(chunk, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn repeated_generic_answers_collapse() {
        let same = "The player earns points by eating pellets and avoiding ghosts.";
        let d = doc("Pac-Man wiki text.");
        let p = Spans(vec![
            ("wiki", GENERIC_QUESTIONS[0], same),
            ("wiki", GENERIC_QUESTIONS[1], same),
            ("wiki", GENERIC_QUESTIONS[2], same),
        ]);
        let ctx = build_context(&p, &d, "ghost").unwrap();
        assert_eq!(ctx.pairs.len(), 1);
        assert_eq!(ctx.rendered, format!("Question: What is the objective of the game? Answer: {same}"));
    }

    #[test]
    fn generic_precede_object_pair() {
        let d = doc("The goal is to eat pellets. Ghosts are enemies. You lose a life when a ghost catches you.");
        let ctx = build_context(&LexicalProvider, &d, "ghost").unwrap();
        let last = ctx.pairs.last().unwrap();
        assert_eq!(last.question, "What happens when the player hit a ghost?");
        assert!(ctx.pairs[..ctx.pairs.len() - 1]
            .iter()
            .all(|p| GENERIC_QUESTIONS.contains(&p.question.as_str())));
    }

    #[test]
    fn nothing_answered_is_empty_context() {
        let d = doc("Unrelated prose about weather.");
        assert_eq!(
            build_context(&Spans(vec![]), &d, "ghost"),
            Err(ManualError::EmptyContext("ghost".into()))
        );
    }

    #[test]
    fn grounding_folds_plurals() {
        let r = KeywordRanking {
            entries: vec![
                Keyword { term: "maze".into(), score: 1.0 },
                Keyword { term: "ghosts".into(), score: 0.9 },
            ],
            short: false,
        };
        let (ranked, rest) = ground_objects(&r, GameKind::DotMaze);
        assert_eq!(ranked, vec!["ghost"]);
        assert_eq!(rest, vec!["pellet"]);
    }

    fn para_strategy() -> impl Strategy<Value = String> {
        prop::collection::vec("[a-z]{1,8}", 1..120).prop_map(|w| w.join(" "))
    }

    proptest! {
        #[test]
        fn chunks_cover_document(paras in prop::collection::vec(para_strategy(), 1..6), max in 32usize..200) {
            let d = doc(&paras.join("\n\n"));
            let chunks = chunk(&d, max).unwrap();
            let joined: Vec<String> = chunks.iter().flat_map(|c| c.text.split_whitespace().map(String::from)).collect();
            let original: Vec<String> = d.text.split_whitespace().map(String::from).collect();
            prop_assert_eq!(joined, original);
            for (i, c) in chunks.iter().enumerate() {
                prop_assert!(c.token_count <= max);
                prop_assert_eq!(c.token_count, token_count(&c.text));
                prop_assert_eq!(c.index, i);
            }
        }

        #[test]
        fn more_occurrences_never_lower_score(
            paras in prop::collection::vec(para_strategy(), 1..5),
            pick in any::<prop::sample::Index>(),
            extra in 1usize..6,
        ) {
            let d = doc(&paras.join("\n\n"));
            let base = tfidf_rank(&d, 10_000).unwrap();
            let Some(kw) = base.entries.first().cloned() else { return Ok(()); };
            // only paragraphs already holding the term: otherwise df grows
            let holders: Vec<usize> = d.paragraphs.iter().enumerate()
                .filter(|(_, p)| words(p).any(|w| w == kw.term))
                .map(|(i, _)| i)
                .collect();
            let target = holders[pick.index(holders.len())];
            let mut grown = d.paragraphs.clone();
            grown[target] = format!("{} {}", grown[target], vec![kw.term.as_str(); extra].join(" "));
            let d2 = doc(&grown.join("\n\n"));
            let after = tfidf_rank(&d2, 10_000).unwrap();
            let s = after.entries.iter().find(|k| k.term == kw.term).unwrap().score;
            prop_assert!(s >= kw.score - 1e-12);
            prop_assert_eq!(tfidf_rank(&d2, 10_000).unwrap(), after);
        }

        #[test]
        fn rendering_never_leaks_empty_answers(
            answers in prop::collection::vec(prop_oneof!["", " ", "[A-Za-z .]{1,20}"], 0..6)
        ) {
            let pairs = answers.iter().map(|a| QaPair { question: "Q?".into(), answer: a.clone() }).collect();
            let ctx = ContextBundle::from_pairs("ghost", pairs);
            prop_assert!(!ctx.rendered.contains("Answer: ."));
            prop_assert!(ctx.pairs.iter().all(|p| !p.answer.trim().is_empty()));
        }

        #[test]
        fn object_template_shape(object in "[a-z]{1,12}") {
            let re = Regex::new(r"What happens when the player hit a .+\?").unwrap();
            prop_assert!(re.is_match(&object_question(&object).unwrap()));
        }
    }
}
