use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::failure::Failure;

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

/// Header row comes from the field names of `T`.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Timestamped log kept apart from the deterministic artifacts.
pub struct RunLog {
    path: PathBuf,
    started: Instant,
    lines: Vec<String>,
}

impl RunLog {
    pub fn new(dir: &Path, command: &str) -> Self {
        let mut log = RunLog {
            path: dir.join("run.log"),
            started: Instant::now(),
            lines: Vec::new(),
        };
        log.line(format!("start {command}"));
        log
    }

    pub fn line(&mut self, msg: impl AsRef<str>) {
        let now = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
        self.lines.push(format!("[{:.3}] {}", now.as_secs_f64(), msg.as_ref()));
    }

    pub fn finish(mut self, exit_code: u8) -> Result<(), Failure> {
        let secs = self.started.elapsed().as_secs_f64();
        self.line(format!("exit {exit_code} wall_time_secs {secs:.3}"));
        let mut f = fs::File::create(&self.path)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", self.path.display())))?;
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}
