use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use crate::error::Result;
use crate::protocol::Command;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Endpoint {
    Driver,
    Worker(usize),
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Driver => f.write_str("driver"),
            Endpoint::Worker(r) => write!(f, "worker{r}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LogEntry {
    pub endpoint: Endpoint,
    pub session_id: u64,
    pub command: Command,
}

/// Startup banner and per-frame command log.
///
/// Lines go to the log file when one is configured. Entries are also kept
/// in memory when `record` is set.
pub struct CommandLog {
    file: Option<Mutex<BufWriter<File>>>,
    record: bool,
    entries: Mutex<Vec<LogEntry>>,
}

impl CommandLog {
    pub fn open(path: Option<&Path>, record: bool) -> Result<Self> {
        let file = match path {
            Some(p) => Some(Mutex::new(BufWriter::new(File::create(p)?))),
            None => None,
        };
        Ok(Self { file, record, entries: Mutex::new(Vec::new()) })
    }

    pub fn has_file(&self) -> bool {
        self.file.is_some()
    }

    pub fn line(&self, text: &str) {
        if let Some(f) = &self.file {
            let mut f = f.lock().unwrap_or_else(|e| e.into_inner());
            let _ = writeln!(f, "{text}");
            let _ = f.flush();
        }
    }

    pub fn command(&self, endpoint: Endpoint, session_id: u64, command: Command) {
        log::debug!("{endpoint} session={session_id} {command}");
        self.line(&format!("{endpoint} session={session_id} cmd={command}"));
        if self.record {
            self.entries.lock().unwrap_or_else(|e| e.into_inner()).push(LogEntry { endpoint, session_id, command });
        }
    }

    pub fn entries(&self) -> Vec<LogEntry> {
        self.entries.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}
