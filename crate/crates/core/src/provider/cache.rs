use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use super::{sha256_hex, ChoiceQuery, ChoiceScores, ExtractiveQuery, ProviderError, QaProvider};

/// Disk cache for choice scores keyed by prompt hash. Extractive answers
/// pass straight through.
pub struct CachedProvider<P> {
    inner: P,
    path: PathBuf,
    entries: Mutex<BTreeMap<String, Vec<f64>>>,
}

impl<P: QaProvider> CachedProvider<P> {
    pub fn open(inner: P, path: impl Into<PathBuf>) -> Result<Self, ProviderError> {
        let path = path.into();
        let entries = if path.exists() {
            let raw = fs::read_to_string(&path).map_err(|e| ProviderError::Io(e.to_string()))?;
            serde_json::from_str(&raw).map_err(|e| ProviderError::Format(format!("{}: {e}", path.display())))?
        } else {
            BTreeMap::new()
        };
        Ok(CachedProvider {
            inner,
            path,
            entries: Mutex::new(entries),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.entries.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn persist(&self, entries: &BTreeMap<String, Vec<f64>>) -> Result<(), ProviderError> {
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| ProviderError::Io(e.to_string()))?;
        }
        let json = serde_json::to_string_pretty(entries).map_err(|e| ProviderError::Format(e.to_string()))?;
        fs::write(&self.path, json).map_err(|e| ProviderError::Io(e.to_string()))
    }
}

impl<P: QaProvider> QaProvider for CachedProvider<P> {
    fn name(&self) -> String {
        format!("cached({})", self.inner.name())
    }

    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        self.inner.answer(query)
    }

    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        let key = sha256_hex(&format!("{}\u{1f}{}", query.prompt, query.choices.join("\u{1f}")));
        if let Some(s) = self.entries.lock().unwrap().get(&key) {
            return ChoiceScores::new(s.clone());
        }
        let scores = self.inner.score_choices(query)?;
        let mut entries = self.entries.lock().unwrap();
        entries.insert(key, scores.scores.clone());
        self.persist(&entries)?;
        Ok(scores)
    }
}
