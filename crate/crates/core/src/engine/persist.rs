use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::TurnResult;
use crate::consult::{is_valid_session_id, SessionState, Speaker};

/// Rewrites user free text before it is written to disk.
pub trait Redactor: Send + Sync {
    fn redact(&self, text: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PassThrough;

impl Redactor for PassThrough {
    fn redact(&self, text: &str) -> String {
        text.to_string()
    }
}

/// Encodes whole log lines, e.g. for at-rest encryption. Encoded output must
/// not contain a newline.
pub trait LogCodec: Send + Sync {
    fn encode(&self, line: &str) -> String;
    fn decode(&self, line: &str) -> Result<String, String>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PlainCodec;

impl LogCodec for PlainCodec {
    fn encode(&self, line: &str) -> String {
        line.to_string()
    }

    fn decode(&self, line: &str) -> Result<String, String> {
        Ok(line.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LogRecord {
    Created {
        state: SessionState,
    },
    Turn {
        state: SessionState,
        result: Box<TurnResult>,
    },
}

impl LogRecord {
    fn state(&self) -> &SessionState {
        match self {
            LogRecord::Created { state } | LogRecord::Turn { state, .. } => state,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PersistError {
    #[error("{context} {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        source: io::Error,
    },
    #[error("encoding log record: {0}")]
    Encode(#[from] serde_json::Error),
}

fn io_err<'a>(
    context: &'static str,
    path: &'a Path,
) -> impl FnOnce(io::Error) -> PersistError + 'a {
    move |source| PersistError::Io {
        context,
        path: path.to_path_buf(),
        source,
    }
}

/// Append-only per-session JSONL logs under `<data_dir>/sessions/`.
pub struct SessionLog {
    dir: PathBuf,
    fsync: bool,
    redactor: Arc<dyn Redactor>,
    codec: Arc<dyn LogCodec>,
}

impl std::fmt::Debug for SessionLog {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SessionLog")
            .field("dir", &self.dir)
            .field("fsync", &self.fsync)
            .finish_non_exhaustive()
    }
}

impl SessionLog {
    /// Creates the directory and checks it is writable.
    pub fn open(
        data_dir: &Path,
        fsync: bool,
        redactor: Arc<dyn Redactor>,
        codec: Arc<dyn LogCodec>,
    ) -> Result<Self, PersistError> {
        let dir = data_dir.join("sessions");
        fs::create_dir_all(&dir).map_err(io_err("creating", &dir))?;
        let probe = dir.join(".write-probe");
        File::create(&probe)
            .and_then(|mut f| f.write_all(b"ok"))
            .map_err(io_err("writing", &probe))?;
        fs::remove_file(&probe).map_err(io_err("removing", &probe))?;
        Ok(Self {
            dir,
            fsync,
            redactor,
            codec,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    fn redact_state(&self, state: &SessionState) -> SessionState {
        let mut s = state.clone();
        let r = &self.redactor;
        s.chief_complaint = s.chief_complaint.map(|c| r.redact(&c));
        for e in s
            .transcript
            .iter_mut()
            .filter(|e| e.speaker == Speaker::User)
        {
            e.text = r.redact(&e.text);
        }
        for slot in s.slots.values_mut() {
            slot.value = slot.value.as_ref().map(|v| r.redact(v));
        }
        s
    }

    pub fn append(&self, record: &LogRecord) -> Result<(), PersistError> {
        let record = match record {
            LogRecord::Created { state } => LogRecord::Created {
                state: self.redact_state(state),
            },
            LogRecord::Turn { state, result } => LogRecord::Turn {
                state: self.redact_state(state),
                result: result.clone(),
            },
        };
        let mut line = self.codec.encode(&serde_json::to_string(&record)?);
        line.push('\n');
        let path = self.path_for(&record.state().session_id);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io_err("opening", &path))?;
        f.write_all(line.as_bytes())
            .map_err(io_err("appending to", &path))?;
        if self.fsync {
            f.sync_data().map_err(io_err("syncing", &path))?;
        }
        Ok(())
    }

    /// Latest state of every logged session. A log whose tail is torn or
    /// unreadable is truncated back to its last good record.
    pub fn recover(&self) -> Result<Vec<SessionState>, PersistError> {
        let mut out = Vec::new();
        let entries = fs::read_dir(&self.dir).map_err(io_err("listing", &self.dir))?;
        let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl")
                || !is_valid_session_id(id)
            {
                continue;
            }
            if let Some(state) = self.recover_file(&path, id)? {
                out.push(state);
            }
        }
        Ok(out)
    }

    fn recover_file(&self, path: &Path, id: &str) -> Result<Option<SessionState>, PersistError> {
        let bytes = fs::read(path).map_err(io_err("reading", path))?;
        let mut last: Option<SessionState> = None;
        let mut good_len = 0usize;
        let mut offset = 0usize;
        let mut problem = None;
        while offset < bytes.len() {
            let Some(nl) = bytes[offset..].iter().position(|&b| b == b'\n') else {
                problem = Some("partial trailing line");
                break;
            };
            let raw = &bytes[offset..offset + nl];
            let parsed = std::str::from_utf8(raw)
                .map_err(|e| e.to_string())
                .and_then(|s| self.codec.decode(s))
                .and_then(|s| serde_json::from_str::<LogRecord>(&s).map_err(|e| e.to_string()));
            match parsed {
                Ok(rec) if rec.state().session_id == id => {
                    last = Some(match rec {
                        LogRecord::Created { state } | LogRecord::Turn { state, .. } => state,
                    });
                    offset += nl + 1;
                    good_len = offset;
                }
                Ok(_) => {
                    problem = Some("record for a different session");
                    break;
                }
                Err(_) => {
                    problem = Some("unreadable record");
                    break;
                }
            }
        }
        if let Some(why) = problem {
            log::warn!(
                "session log {}: {why} at byte {good_len}; truncating {} trailing bytes",
                path.display(),
                bytes.len() - good_len
            );
            let f = OpenOptions::new()
                .write(true)
                .open(path)
                .map_err(io_err("opening", path))?;
            f.set_len(good_len as u64)
                .map_err(io_err("truncating", path))?;
        }
        Ok(last)
    }
}
