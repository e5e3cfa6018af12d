use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{ChoiceQuery, ChoiceScores, ExtractiveQuery, ProviderError, QaProvider};

#[derive(Debug, Clone)]
pub struct HttpSettings {
    pub timeout: Duration,
    pub retries: u32,
    /// First retry waits this long; each further retry doubles it.
    pub backoff: Duration,
    pub max_in_flight: usize,
}

impl Default for HttpSettings {
    fn default() -> Self {
        HttpSettings {
            timeout: Duration::from_secs(30),
            retries: 2,
            backoff: Duration::from_millis(250),
            max_in_flight: 4,
        }
    }
}

#[derive(Serialize)]
struct AnswerRequest<'a> {
    passage: &'a str,
    question: &'a str,
}

#[derive(Deserialize)]
struct AnswerResponse {
    answer: String,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    prompt: &'a str,
    choices: &'a [String],
}

#[derive(Deserialize)]
struct ScoreResponse {
    scores: Vec<f64>,
}

struct Gate {
    in_flight: Mutex<usize>,
    freed: Condvar,
    cap: usize,
}

impl Gate {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap();
        while *n >= self.cap {
            n = self.freed.wait(n).unwrap();
        }
        *n += 1;
        Permit(self)
    }
}

struct Permit<'a>(&'a Gate);

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.in_flight.lock().unwrap() -= 1;
        self.0.freed.notify_one();
    }
}

/// Client for a model service exposing `POST /answer` and `POST /score`.
pub struct HttpProvider {
    base: String,
    client: reqwest::blocking::Client,
    settings: HttpSettings,
    gate: Gate,
}

impl HttpProvider {
    pub fn new(base: impl Into<String>, settings: HttpSettings) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(settings.timeout)
            .build()
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        let gate = Gate {
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
            cap: settings.max_in_flight.max(1),
        };
        Ok(HttpProvider {
            base: base.into().trim_end_matches('/').to_string(),
            client,
            settings,
            gate,
        })
    }

    /// One logical call. Retries stay inside the caller's permit, so a
    /// retrying request never takes a second slot.
    fn post<Req: Serialize, Resp: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &Req,
    ) -> Result<Resp, ProviderError> {
        let _permit = self.gate.acquire();
        let url = format!("{}{}", self.base, path);
        let mut wait = self.settings.backoff;
        let mut last = String::new();
        for attempt in 0..=self.settings.retries {
            if attempt > 0 {
                debug!("retry {attempt} for {url} after {wait:?}");
                thread::sleep(wait);
                wait *= 2;
            }
            match self.client.post(&url).json(body).send() {
                Ok(resp) if resp.status().is_success() => {
                    return resp
                        .json::<Resp>()
                        .map_err(|e| ProviderError::Format(format!("{url}: {e}")));
                }
                Ok(resp) => last = format!("{url}: HTTP {}", resp.status()),
                Err(e) => last = format!("{url}: {e}"),
            }
            warn!("{last}");
        }
        Err(ProviderError::Transport(last))
    }
}

impl QaProvider for HttpProvider {
    fn name(&self) -> String {
        format!("http:{}", self.base)
    }

    fn answer(&self, query: &ExtractiveQuery) -> Result<String, ProviderError> {
        let r: AnswerResponse = self.post(
            "/answer",
            &AnswerRequest {
                passage: &query.passage,
                question: &query.question,
            },
        )?;
        Ok(r.answer)
    }

    fn score_choices(&self, query: &ChoiceQuery) -> Result<ChoiceScores, ProviderError> {
        let r: ScoreResponse = self.post(
            "/score",
            &ScoreRequest {
                prompt: &query.prompt,
                choices: &query.choices,
            },
        )?;
        if r.scores.len() != query.choices.len() {
            return Err(ProviderError::Format(format!(
                "service returned {} scores for {} choices",
                r.scores.len(),
                query.choices.len()
            )));
        }
        ChoiceScores::new(r.scores)?.check_support()
    }
}
