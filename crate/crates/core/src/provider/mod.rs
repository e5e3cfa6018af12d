//! Question-answering back ends.
//!
//! A provider answers two kinds of query: extractive (pick a span of a
//! passage that answers a question) and multiple choice (score each option of
//! a prompt). The built-in [`LexicalProvider`] is hermetic and deterministic;
//! [`FixtureProvider`] replays recorded results; [`HttpProvider`] talks to a
//! live model service.

mod cache;
mod fixture;
mod http;
mod lexical;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use cache::CachedProvider;
pub use fixture::{write_entries, FixtureEntry, FixtureKind, FixtureProvider, FixtureResult, Recorder};
pub use http::{HttpProvider, HttpSettings};
pub use lexical::{LexicalProvider, NEGATIVE_CUES, POSITIVE_CUES};

pub const QA_URL_ENV: &str = "READWARD_QA_URL";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProviderError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("no recorded {kind} result for key {key}")]
    FixtureMiss { kind: &'static str, key: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("scorer abstained: no choice has positive support")]
    Abstain,
    #[error("provider I/O: {0}")]
    Io(String),
    #[error("malformed provider data: {0}")]
    Format(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractiveQuery {
    pub passage: String,
    pub question: String,
}

impl ExtractiveQuery {
    pub fn new(passage: impl Into<String>, question: impl Into<String>) -> Result<Self, ProviderError> {
        let q = ExtractiveQuery {
            passage: passage.into(),
            question: question.into(),
        };
        if q.passage.trim().is_empty() || q.question.trim().is_empty() {
            return Err(ProviderError::InvalidQuery("passage and question must be non-empty".into()));
        }
        Ok(q)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceQuery {
    pub prompt: String,
    pub choices: Vec<String>,
}

impl ChoiceQuery {
    pub fn new(prompt: impl Into<String>, choices: Vec<String>) -> Result<Self, ProviderError> {
        let mut distinct = choices.clone();
        distinct.sort();
        distinct.dedup();
        if distinct.len() < 2 || distinct.len() != choices.len() {
            return Err(ProviderError::InvalidQuery("need at least two distinct choices".into()));
        }
        Ok(ChoiceQuery {
            prompt: prompt.into(),
            choices,
        })
    }

    pub fn yes_no(prompt: impl Into<String>) -> Self {
        ChoiceQuery {
            prompt: prompt.into(),
            choices: vec!["Yes".into(), "No".into()],
        }
    }
}

/// One finite score per choice, in choice order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChoiceScores {
    pub scores: Vec<f64>,
}

impl ChoiceScores {
    pub fn new(scores: Vec<f64>) -> Result<Self, ProviderError> {
        if scores.is_empty() || scores.iter().any(|s| !s.is_finite()) {
            return Err(ProviderError::Format("scores must be finite and non-empty".into()));
        }
        Ok(ChoiceScores { scores })
    }

    /// Index of the best score; earlier choices win ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, s) in self.scores.iter().enumerate() {
            if *s > self.scores[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn check_support(self) -> Result<Self, ProviderError> {
        if self.scores.iter().all(|s| *s == 0.0) {
            Err(ProviderError::Abstain)
        } else {
            Ok(self)
        }
    }
}

pub trait QaProvider: Send + Sync {
    fn name(&self) -> String;

    /// Best answer span, or an empty string when the passage has none.
    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError>;

    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError>;
}

impl<P: QaProvider + ?Sized> QaProvider for Box<P> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        (**self).answer(query)
    }
    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        (**self).score_choices(query)
    }
}

impl<P: QaProvider + ?Sized> QaProvider for &P {
    fn name(&self) -> String {
        (**self).name()
    }
    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        (**self).answer(query)
    }
    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        (**self).score_choices(query)
    }
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Which provider to build: `lexical`, `fixture:<path>`, `http:<url>`, or
/// bare `http` (URL from `READWARD_QA_URL`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProviderSpec {
    Lexical,
    Fixture(PathBuf),
    Http(Option<String>),
}

impl FromStr for ProviderSpec {
    type Err = ProviderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "lexical" {
            Ok(ProviderSpec::Lexical)
        } else if let Some(path) = s.strip_prefix("fixture:") {
            Ok(ProviderSpec::Fixture(PathBuf::from(path)))
        } else if s == "http" {
            Ok(ProviderSpec::Http(None))
        } else if let Some(url) = s.strip_prefix("http:") {
            Ok(ProviderSpec::Http(Some(url.to_string())))
        } else {
            Err(ProviderError::InvalidQuery(format!(
                "unknown provider `{s}` (lexical | fixture:<path> | http:<url>)"
            )))
        }
    }
}

impl TryFrom<String> for ProviderSpec {
    type Error = ProviderError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ProviderSpec> for String {
    fn from(p: ProviderSpec) -> String {
        p.to_string()
    }
}

impl fmt::Display for ProviderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProviderSpec::Lexical => f.write_str("lexical"),
            ProviderSpec::Fixture(p) => write!(f, "fixture:{}", p.display()),
            ProviderSpec::Http(None) => f.write_str("http"),
            ProviderSpec::Http(Some(u)) => write!(f, "http:{u}"),
        }
    }
}

impl ProviderSpec {
    /// `READWARD_QA_URL`, when set, wins over any configured URL.
    pub fn build(&self) -> Result<Box<dyn QaProvider>, ProviderError> {
        match self {
            ProviderSpec::Lexical => Ok(Box::new(LexicalProvider::new())),
            ProviderSpec::Fixture(path) => Ok(Box::new(FixtureProvider::load(path)?)),
            ProviderSpec::Http(url) => {
                let url = std::env::var(QA_URL_ENV)
                    .ok()
                    .filter(|u| !u.is_empty())
                    .or_else(|| url.clone())
                    .ok_or_else(|| {
                        ProviderError::InvalidQuery(format!("http provider needs a URL or {QA_URL_ENV}"))
                    })?;
                Ok(Box::new(HttpProvider::new(url, HttpSettings::default())?))
            }
        }
    }
}
