use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::agents::{AgentError, StepObserver};
use crate::env::StepResult;
use crate::interact::{EventLogLine, InteractionEvent};
use crate::reason::RewardTable;

fn io(path: &Path, e: std::io::Error) -> AgentError {
    AgentError::Io(format!("{}: {e}", path.display()))
}

/// Writes every frame as `frame-<step>.pgm`.
pub struct FrameDumper {
    dir: PathBuf,
}

impl FrameDumper {
    pub fn new(dir: &Path) -> Result<Self, AgentError> {
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(FrameDumper { dir: dir.to_path_buf() })
    }
}

impl StepObserver for FrameDumper {
    fn on_step(&mut self, step: u64, r: &StepResult, _: &[InteractionEvent], _: Option<&RewardTable>) -> Result<(), AgentError> {
        let path = self.dir.join(format!("frame-{step:08}.pgm"));
        r.frame.write_pgm(&path).map_err(|e| io(&path, e))
    }
}

/// One JSON line per interaction event.
pub struct EventLogger {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EventLogger {
    pub fn create(path: &Path) -> Result<Self, AgentError> {
        let f = File::create(path).map_err(|e| io(path, e))?;
        Ok(EventLogger {
            path: path.to_path_buf(),
            out: BufWriter::new(f),
        })
    }
}

impl StepObserver for EventLogger {
    fn on_step(
        &mut self,
        step: u64,
        _: &StepResult,
        events: &[InteractionEvent],
        table: Option<&RewardTable>,
    ) -> Result<(), AgentError> {
        for e in events {
            let line = EventLogLine {
                step,
                object_class: e.object_class.clone(),
                track_id: e.track_id,
                reward: table.and_then(|t| t.reward_for(&e.object_class)).unwrap_or(0.0),
            };
            let json = serde_json::to_string(&line).map_err(|e| AgentError::Io(e.to_string()))?;
            writeln!(self.out, "{json}").map_err(|e| io(&self.path, e))?;
        }
        Ok(())
    }
}

impl Drop for EventLogger {
    fn drop(&mut self) {
        let _ = self.out.flush();
    }
}

/// Fans a step out to several observers.
#[derive(Default)]
pub struct Observers(pub Vec<Box<dyn StepObserver>>);

impl StepObserver for Observers {
    fn on_step(
        &mut self,
        step: u64,
        r: &StepResult,
        events: &[InteractionEvent],
        table: Option<&RewardTable>,
    ) -> Result<(), AgentError> {
        for o in &mut self.0 {
            o.on_step(step, r, events, table)?;
        }
        Ok(())
    }
}
