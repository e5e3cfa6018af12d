//! Python bindings for readward. Structured results cross the boundary as
//! plain dicts and lists.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBytes, PyDict, PyList};
use serde::Serialize;

use readward::agents::{train as train_agent, AgentKind, NoObserver, TrainSpec};
use readward::env::{make_env, EnvConfig, Environment, GameKind, StepResult};
use readward::harness::{self, episode_points, RunConfig, RunReport};
use readward::interact::NoiseModel;
use readward::manual::{self, ContextFile, SourceTag};
use readward::provider::ProviderSpec;
use readward::reason::{self, RewardTable};

create_exception!(readward_py, ReadwardError, PyException);
create_exception!(readward_py, ProviderFailure, ReadwardError);
create_exception!(readward_py, Divergence, ReadwardError);

fn config_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn harness_err(e: harness::HarnessError) -> PyErr {
    match e.exit_code() {
        3 => ProviderFailure::new_err(e.to_string()),
        4 => Divergence::new_err(e.to_string()),
        _ => ReadwardError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| ReadwardError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: serde::de::DeserializeOwned>(v: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = match v.extract::<String>() {
        Ok(s) => s,
        Err(_) => v.py().import("json")?.call_method1("dumps", (v,))?.extract()?,
    };
    serde_json::from_str(&s).map_err(config_err)
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: ToString,
{
    s.parse().map_err(|e: T::Err| config_err(e.to_string()))
}

fn step_dict<'py>(py: Python<'py>, r: &StepResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("reward", r.reward)?;
    d.set_item("terminal", r.terminal)?;
    d.set_item("step", r.info.step)?;
    d.set_item("native_reward", r.info.native_reward)?;
    d.set_item("lives", r.info.lives)?;
    d.set_item("objects", to_py(py, &r.objects)?)?;
    d.set_item("frame", PyBytes::new(py, &r.frame.cells))?;
    d.set_item("frame_shape", (r.frame.height, r.frame.width))?;
    Ok(d)
}

/// A game instance. `reset()` and `step(action)` return dicts with reward,
/// terminal, step, lives, objects and the raw cell frame.
#[pyclass(unsendable)]
struct Env {
    inner: Box<dyn Environment>,
}

#[pymethods]
impl Env {
    #[new]
    #[pyo3(signature = (game, seed = 0, delayed = false, episode_cap = 1000))]
    fn new(game: &str, seed: u64, delayed: bool, episode_cap: u64) -> PyResult<Self> {
        let cfg = EnvConfig::new(parse(game)?, seed).delayed(delayed).with_cap(episode_cap);
        Ok(Env {
            inner: make_env(&cfg).map_err(config_err)?,
        })
    }

    #[getter]
    fn game(&self) -> &'static str {
        self.inner.game().as_str()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn delayed(&self) -> bool {
        self.inner.is_delayed()
    }

    fn reset<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        step_dict(py, &self.inner.reset())
    }

    fn step<'py>(&mut self, py: Python<'py>, action: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.step(action).map_err(config_err)?;
        step_dict(py, &r)
    }
}

/// Object classes an agent can interact with in `game`.
#[pyfunction]
fn object_classes(game: &str) -> PyResult<Vec<&'static str>> {
    Ok(parse::<GameKind>(game)?.object_classes().to_vec())
}

/// Read a manual into per-object contexts (the context.json layout).
#[pyfunction]
#[pyo3(signature = (path, game, provider = "lexical", source_tag = "custom", top_k = manual::DEFAULT_TOP_K, max_tokens = manual::DEFAULT_MAX_TOKENS, objects = None))]
#[allow(clippy::too_many_arguments)]
fn read_manual<'py>(
    py: Python<'py>,
    path: PathBuf,
    game: &str,
    provider: &str,
    source_tag: &str,
    top_k: usize,
    max_tokens: usize,
    objects: Option<Vec<String>>,
) -> PyResult<Bound<'py, PyAny>> {
    let game: GameKind = parse(game)?;
    let tag: SourceTag = parse(source_tag)?;
    let spec: ProviderSpec = parse(provider)?;
    let ctx = py
        .detach(|| -> Result<ContextFile, String> {
            let p = spec.build().map_err(|e| e.to_string())?;
            let doc = manual::load_manual(&path, tag).map_err(|e| e.to_string())?;
            manual::read_manual(p.as_ref(), &doc, game, top_k, objects.as_deref(), max_tokens).map_err(|e| e.to_string())
        })
        .map_err(ReadwardError::new_err)?;
    to_py(py, &ctx)
}

/// Decide a reward for every context. `context` is the dict (or JSON text)
/// produced by `read_manual`.
#[pyfunction]
#[pyo3(signature = (context, provider = "lexical", r_p = reason::DEFAULT_REWARD, r_n = reason::DEFAULT_REWARD))]
fn build_table<'py>(
    py: Python<'py>,
    context: &Bound<'py, PyAny>,
    provider: &str,
    r_p: f64,
    r_n: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let ctx: ContextFile = from_py(context)?;
    let spec: ProviderSpec = parse(provider)?;
    let table = py
        .detach(|| -> Result<RewardTable, String> {
            let p = spec.build().map_err(|e| e.to_string())?;
            reason::build_table(p.as_ref(), &ctx.contexts, r_p, r_n).map_err(|e| e.to_string())
        })
        .map_err(ReadwardError::new_err)?;
    to_py(py, &table)
}

/// Train one agent for `steps` steps; returns one dict per finished episode
/// (the curves.csv rows).
#[pyfunction]
#[pyo3(signature = (game, agent = "q", steps = 20_000, seed = 1, delayed = false, rewards = None, noise = None))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    game: &str,
    agent: &str,
    steps: u64,
    seed: u64,
    delayed: bool,
    rewards: Option<&Bound<'py, PyAny>>,
    noise: Option<&str>,
) -> PyResult<Bound<'py, PyList>> {
    let kind: AgentKind = parse(agent)?;
    let table: Option<RewardTable> = rewards.map(from_py).transpose()?;
    let mut spec = TrainSpec::new(EnvConfig::new(parse(game)?, seed).delayed(delayed), kind, steps, seed);
    spec.noise = noise.map(parse::<NoiseModel>).transpose()?;
    let out = py
        .detach(|| train_agent(&spec, table.as_ref(), &mut NoObserver))
        .map_err(|e| match e {
            readward::agents::AgentError::Divergence(m) => Divergence::new_err(m),
            other => config_err(other),
        })?;
    let rows = PyList::empty(py);
    for p in episode_points(&out.traces) {
        rows.append(to_py(py, &p)?)?;
    }
    Ok(rows)
}

/// Run baseline and assisted arms over several seeds. `config` is TOML text
/// in the `--config` format; the report is also written under its `out`.
#[pyfunction]
fn run<'py>(py: Python<'py>, config: &str) -> PyResult<Bound<'py, PyAny>> {
    let cfg = RunConfig::from_toml(config).map_err(harness_err)?;
    let report = py.detach(|| harness::run(&cfg)).map_err(harness_err)?;
    to_py(py, &report)
}

/// Compare two saved report.json files; `a` is the reference.
#[pyfunction]
fn compare<'py>(py: Python<'py>, a: PathBuf, b: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let ra = RunReport::load(&a).map_err(harness_err)?;
    let rb = RunReport::load(&b).map_err(harness_err)?;
    to_py(py, &harness::compare(&ra, &rb).map_err(harness_err)?)
}

#[pymodule]
pub fn readward_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Env>()?;
    m.add_function(wrap_pyfunction!(object_classes, m)?)?;
    m.add_function(wrap_pyfunction!(read_manual, m)?)?;
    m.add_function(wrap_pyfunction!(build_table, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(compare, m)?)?;
    m.add("ReadwardError", m.py().get_type::<ReadwardError>())?;
    m.add("ProviderFailure", m.py().get_type::<ProviderFailure>())?;
    m.add("Divergence", m.py().get_type::<Divergence>())?;
    Ok(())
}
