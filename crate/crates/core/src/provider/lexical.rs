use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::{ChoiceQuery, ChoiceScores, ExtractiveQuery, ProviderError, QaProvider};
use crate::text::{content_stems, sentences, stem, words};

pub const NEGATIVE_CUES: &[&str] = &[
    "avoid", "lose", "enemy", "enemies", "penalty", "death", "dies", "wrapped", "crash",
];
pub const POSITIVE_CUES: &[&str] = &["score", "points", "eat", "gobble", "win", "bonus", "collect"];

/// Minimum share of question content words a sentence must cover.
pub const ANSWER_THRESHOLD: f64 = 0.15;

static NEG_STEMS: LazyLock<HashSet<String>> =
    LazyLock::new(|| NEGATIVE_CUES.iter().map(|w| stem(w)).collect());
static POS_STEMS: LazyLock<HashSet<String>> =
    LazyLock::new(|| POSITIVE_CUES.iter().map(|w| stem(w)).collect());
static PAIR_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^Question: (.*?) Answer: ?(.*)$").unwrap());
static WIN_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"Should you hit an? (.+?) if you want to win\?").unwrap());
static OBJECT_Q_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^What happens when the player hits? an? (.+?)\?$").unwrap());
static CLAUSE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[,;:.!?]|\band\b|\bbut\b|\bor\b").unwrap());

/// Hermetic provider built on word overlap and cue lexicons.
#[derive(Debug, Clone, Default)]
pub struct LexicalProvider;

impl LexicalProvider {
    pub fn new() -> Self {
        LexicalProvider
    }
}

fn mentions(text: &str, object_stem: &str) -> bool {
    words(text).any(|w| stem(&w) == object_stem)
}

/// (positive, negative) cue counts.
fn cues(text: &str) -> (f64, f64) {
    let mut pos = 0.0;
    let mut neg = 0.0;
    for w in words(text) {
        let s = stem(&w);
        if POS_STEMS.contains(&s) {
            pos += 1.0;
        }
        if NEG_STEMS.contains(&s) {
            neg += 1.0;
        }
    }
    (pos, neg)
}

fn clauses(text: &str) -> Vec<&str> {
    CLAUSE_RE
        .split(text)
        .map(str::trim)
        .filter(|c| !c.is_empty())
        .collect()
}

/// Cue totals for a rendered context and the object it asks about.
///
/// The object's own pair counts double and, if any of its clauses name the
/// object, only those clauses. Generic pairs only contribute clauses that
/// name the object, plus their question's cues when the answer names it.
fn weigh(prompt: &str) -> (f64, f64) {
    let object = WIN_RE.captures(prompt).map(|c| c[1].to_string());
    let Some(object) = object else {
        return cues(prompt);
    };
    let ostem = stem(&object);
    let (mut pos, mut neg) = (0.0, 0.0);
    for line in prompt.lines() {
        let Some(cap) = PAIR_RE.captures(line.trim()) else {
            continue;
        };
        let (q, a) = (&cap[1], &cap[2]);
        if WIN_RE.is_match(q) {
            continue;
        }
        let is_object_pair = OBJECT_Q_RE
            .captures(q)
            .is_some_and(|c| stem(&c[1]) == ostem);
        let parts = clauses(a);
        let (p, n) = if is_object_pair {
            let named: Vec<&str> = parts.iter().copied().filter(|c| mentions(c, &ostem)).collect();
            let used = if named.is_empty() { parts } else { named };
            let (p, n) = used.iter().fold((0.0, 0.0), |acc, c| {
                let (p, n) = cues(c);
                (acc.0 + p, acc.1 + n)
            });
            (2.0 * p, 2.0 * n)
        } else {
            let mut acc = parts
                .iter()
                .filter(|c| mentions(c, &ostem))
                .fold((0.0, 0.0), |acc, c| {
                    let (p, n) = cues(c);
                    (acc.0 + p, acc.1 + n)
                });
            if mentions(a, &ostem) {
                let (p, n) = cues(q);
                acc.0 += p;
                acc.1 += n;
            }
            acc
        };
        pos += p;
        neg += n;
    }
    (pos, neg)
}

impl QaProvider for LexicalProvider {
    fn name(&self) -> String {
        "lexical".into()
    }

    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        let q: HashSet<String> = content_stems(&query.question).into_iter().collect();
        if q.is_empty() {
            return Ok(String::new());
        }
        let mut best: Option<(f64, &str)> = None;
        // a question in the passage is never its answer
        for s in sentences(&query.passage).into_iter().filter(|s| !s.ends_with('?')) {
            let sw: HashSet<String> = content_stems(s).into_iter().collect();
            let score = q.intersection(&sw).count() as f64 / q.len() as f64;
            if best.is_none_or(|(b, _)| score > b) {
                best = Some((score, s));
            }
        }
        Ok(match best {
            Some((score, s)) if score >= ANSWER_THRESHOLD => s.to_string(),
            _ => String::new(),
        })
    }

    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        let (pos, neg) = weigh(&query.prompt);
        let scores = query
            .choices
            .iter()
            .map(|c| match c.trim().to_lowercase().as_str() {
                "yes" => Ok(pos),
                "no" => Ok(neg),
                other => Err(ProviderError::InvalidQuery(format!(
                    "lexical scorer only handles Yes/No, got `{other}`"
                ))),
            })
            .collect::<Result<Vec<f64>, _>>()?;
        ChoiceScores::new(scores)?.check_support()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ask(passage: &str, question: &str) -> String {
        LexicalProvider
            .answer(&ExtractiveQuery::new(passage, question).unwrap())
            .unwrap()
    }

    fn yes_no(prompt: &str) -> Result<Vec<f64>, ProviderError> {
        LexicalProvider
            .score_choices(&ChoiceQuery::yes_no(prompt))
            .map(|s| s.scores)
    }

    #[test]
    fn answers_with_best_overlapping_sentence() {
        let p = "The goal is to eat pellets. Ghosts are enemies.";
        assert_eq!(ask(p, "Who are your enemies?"), "Ghosts are enemies.");
        assert_eq!(ask(p, "What is the goal?"), "The goal is to eat pellets.");
    }

    #[test]
    fn questions_are_not_answers() {
        let p = "Who are your enemies? Ghosts are your enemies.";
        assert_eq!(ask(p, "Who are your enemies?"), "Ghosts are your enemies.");
    }

    #[test]
    fn unrelated_question_gets_empty_answer() {
        assert_eq!(ask("The goal is to eat pellets.", "How many lives remain?"), "");
        assert_eq!(ask("The goal is to eat pellets.", "What is it?"), "");
    }

    #[test]
    fn deterministic() {
        let p = "Eat pellets to score. Avoid ghosts or you lose a life.";
        assert_eq!(ask(p, "How do you score?"), ask(p, "How do you score?"));
    }

    #[test]
    fn object_pair_drives_verdict() {
        let ghost = "Question: What happens when the player hit a ghost? Answer: You lose a life.\n\
                     Question: Should you hit a ghost if you want to win? Answer: ";
        let s = yes_no(ghost).unwrap();
        assert!(s[1] > s[0]);
        let pellet = "Question: What happens when the player hit a pellet? Answer: You score points.\n\
                      Question: Should you hit a pellet if you want to win? Answer: ";
        let s = yes_no(pellet).unwrap();
        assert!(s[0] > s[1]);
    }

    #[test]
    fn generic_cues_only_count_near_the_object() {
        let prompt = "Question: What is the objective of the game? Answer: Eat pellets to score, avoid ghosts.\n\
                      Question: Should you hit a ghost if you want to win? Answer: ";
        let s = yes_no(prompt).unwrap();
        assert_eq!(s, vec![0.0, 1.0]);
        let prompt = prompt.replace("hit a ghost", "hit a pellet");
        let s = yes_no(&prompt).unwrap();
        assert!(s[0] > s[1]);
    }

    #[test]
    fn no_cues_abstains() {
        let prompt = "Question: What happens when the player hit a tree? Answer: It is green.\n\
                      Question: Should you hit a tree if you want to win? Answer: ";
        assert_eq!(yes_no(prompt), Err(ProviderError::Abstain));
    }

    #[test]
    fn rejects_non_binary_choices() {
        let q = ChoiceQuery::new("x", vec!["Maybe".into(), "No".into()]).unwrap();
        assert!(matches!(
            LexicalProvider.score_choices(&q),
            Err(ProviderError::InvalidQuery(_))
        ));
    }
}
