use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{sha256_hex, ChoiceQuery, ChoiceScores, ExtractiveQuery, ProviderError, QaProvider};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    Answer,
    Score,
}

/// One recorded provider result. Answers are keyed by passage and question
/// hashes, scores by prompt hash. The plain-text fields are informational.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub kind: FixtureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub passage_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    pub result: FixtureResult,
}

/// A recorded answer string or a list of choice scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixtureResult {
    Answer(String),
    Scores(Vec<f64>),
}

impl FixtureEntry {
    pub fn answer(query: &ExtractiveQuery, answer: &str) -> Self {
        FixtureEntry {
            kind: FixtureKind::Answer,
            passage_sha256: Some(sha256_hex(&query.passage)),
            question_sha256: Some(sha256_hex(&query.question)),
            question: Some(query.question.clone()),
            prompt_sha256: None,
            result: FixtureResult::Answer(answer.to_string()),
        }
    }

    pub fn score(query: &ChoiceQuery, scores: &ChoiceScores) -> Self {
        FixtureEntry {
            kind: FixtureKind::Score,
            passage_sha256: None,
            question_sha256: None,
            question: None,
            prompt_sha256: Some(sha256_hex(&query.prompt)),
            result: FixtureResult::Scores(scores.scores.clone()),
        }
    }

    fn key(&self) -> String {
        match self.kind {
            FixtureKind::Answer => format!(
                "a:{}:{}",
                self.passage_sha256.as_deref().unwrap_or(""),
                self.question_sha256.as_deref().unwrap_or("")
            ),
            FixtureKind::Score => format!("s:{}", self.prompt_sha256.as_deref().unwrap_or("")),
        }
    }
}

/// Replays recorded results. Anything not recorded is an error.
#[derive(Debug, Clone, Default)]
pub struct FixtureProvider {
    answers: HashMap<(String, String), String>,
    scores: HashMap<String, Vec<f64>>,
    label: String,
}

impl FixtureProvider {
    pub fn from_entries(entries: Vec<FixtureEntry>) -> Result<Self, ProviderError> {
        let mut p = FixtureProvider {
            label: "fixture".into(),
            ..Default::default()
        };
        p.extend(entries)?;
        Ok(p)
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let mut p = Self::from_entries(read_entries(path)?)?;
        p.label = format!("fixture:{}", path.display());
        Ok(p)
    }

    /// Load several files; later files override earlier ones.
    pub fn load_all<P: AsRef<Path>>(paths: &[P]) -> Result<Self, ProviderError> {
        let mut p = Self::from_entries(Vec::new())?;
        for path in paths {
            p.extend(read_entries(path.as_ref())?)?;
        }
        Ok(p)
    }

    fn extend(&mut self, entries: Vec<FixtureEntry>) -> Result<(), ProviderError> {
        for e in entries {
            let malformed = || ProviderError::Format(format!("incomplete fixture entry {e:?}"));
            match e.kind {
                FixtureKind::Answer => {
                    let key = (
                        e.passage_sha256.clone().ok_or_else(malformed)?,
                        e.question_sha256.clone().ok_or_else(malformed)?,
                    );
                    let FixtureResult::Answer(a) = &e.result else {
                        return Err(malformed());
                    };
                    self.answers.insert(key, a.clone());
                }
                FixtureKind::Score => {
                    let key = e.prompt_sha256.clone().ok_or_else(malformed)?;
                    let FixtureResult::Scores(scores) = &e.result else {
                        return Err(malformed());
                    };
                    self.scores.insert(key, scores.clone());
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.answers.len() + self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn read_entries(path: &Path) -> Result<Vec<FixtureEntry>, ProviderError> {
    let raw = fs::read_to_string(path).map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| ProviderError::Format(format!("{}: {e}", path.display())))
}

pub fn write_entries(path: &Path, entries: &[FixtureEntry]) -> Result<(), ProviderError> {
    let json = serde_json::to_string_pretty(entries).map_err(|e| ProviderError::Format(e.to_string()))?;
    fs::write(path, json + "\n").map_err(|e| ProviderError::Io(format!("{}: {e}", path.display())))
}

impl QaProvider for FixtureProvider {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        let key = (sha256_hex(&query.passage), sha256_hex(&query.question));
        self.answers
            .get(&key)
            .cloned()
            .ok_or_else(|| ProviderError::FixtureMiss {
                kind: "answer",
                key: format!("{}/{}", key.0, key.1),
            })
    }

    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        let key = sha256_hex(&query.prompt);
        let scores = self.scores.get(&key).ok_or(ProviderError::FixtureMiss {
            kind: "score",
            key,
        })?;
        if scores.len() != query.choices.len() {
            return Err(ProviderError::Format(format!(
                "recorded {} scores for {} choices",
                scores.len(),
                query.choices.len()
            )));
        }
        ChoiceScores::new(scores.clone())?.check_support()
    }
}

/// Wraps a provider and keeps every result it returns, for writing a
/// fixture file afterwards.
pub struct Recorder<P> {
    inner: P,
    entries: Mutex<Vec<FixtureEntry>>,
}

impl<P: QaProvider> Recorder<P> {
    pub fn new(inner: P) -> Self {
        Recorder {
            inner,
            entries: Mutex::new(Vec::new()),
        }
    }

    fn push(&self, e: FixtureEntry) {
        let mut entries = self.entries.lock().unwrap();
        let key = e.key();
        match entries.iter_mut().find(|x| x.key() == key) {
            Some(old) => *old = e,
            None => entries.push(e),
        }
    }

    pub fn entries(&self) -> Vec<FixtureEntry> {
        self.entries.lock().unwrap().clone()
    }

    pub fn save(&self, path: &Path) -> Result<(), ProviderError> {
        write_entries(path, &self.entries())
    }
}

impl<P: QaProvider> QaProvider for Recorder<P> {
    fn name(&self) -> String {
        format!("record({})", self.inner.name())
    }

    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        let a = self.inner.answer(query)?;
        self.push(FixtureEntry::answer(query, &a));
        Ok(a)
    }

    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        match self.inner.score_choices(query) {
            Ok(s) => {
                self.push(FixtureEntry::score(query, &s));
                Ok(s)
            }
            Err(ProviderError::Abstain) => {
                // zeros replay as an abstention
                let zeros = ChoiceScores {
                    scores: vec![0.0; query.choices.len()],
                };
                self.push(FixtureEntry::score(query, &zeros));
                Err(ProviderError::Abstain)
            }
            Err(e) => Err(e),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::LexicalProvider;

    #[test]
    fn replay_matches_recording() {
        let rec = Recorder::new(LexicalProvider::new());
        let q = ExtractiveQuery::new("Eat pellets to score. Ghosts are enemies.", "Who are the enemies?").unwrap();
        let c = ChoiceQuery::yes_no(
            "Question: What happens when the player hit a ghost? Answer: You lose.\n\
             Question: Should you hit a ghost if you want to win? Answer: ",
        );
        let a = rec.answer(&q).unwrap();
        let s = rec.score_choices(&c).unwrap();
        rec.answer(&q).unwrap();
        assert_eq!(rec.entries().len(), 2);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("fx.json");
        rec.save(&path).unwrap();
        let fx = FixtureProvider::load(&path).unwrap();
        assert_eq!(fx.answer(&q).unwrap(), a);
        assert_eq!(fx.score_choices(&c).unwrap(), s);
    }

    #[test]
    fn unknown_query_is_an_explicit_miss() {
        let fx = FixtureProvider::from_entries(Vec::new()).unwrap();
        let q = ExtractiveQuery::new("p", "q").unwrap();
        assert!(matches!(fx.answer(&q), Err(ProviderError::FixtureMiss { kind: "answer", .. })));
        assert!(matches!(
            fx.score_choices(&ChoiceQuery::yes_no("x")),
            Err(ProviderError::FixtureMiss { kind: "score", .. })
        ));
    }

    #[test]
    fn incomplete_entry_rejected() {
        let e = FixtureEntry {
            kind: FixtureKind::Score,
            passage_sha256: None,
            question_sha256: None,
            question: None,
            prompt_sha256: Some("ab".into()),
            result: FixtureResult::Answer("yes".into()),
        };
        assert!(FixtureProvider::from_entries(vec![e]).is_err());
    }
}
