//! Run records and the append-only JSONL run store.
//!
//! One line per exchange. A key `(model, problem_id, order)` may appear more
//! than once when a transport error is retried on resumption; readers keep
//! the last record per key.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::judge::{AnswerStatus, ParsedAnswer, Verdict};
use crate::render::PromptStyle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Order {
    Original,
    Reversed,
}

impl Order {
    pub const BOTH: [Order; 2] = [Order::Original, Order::Reversed];
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Order::Original => "original",
            Order::Reversed => "reversed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Ok,
    TransportError,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    #[serde(default)]
    pub prompt_tokens: u64,
    #[serde(default)]
    pub completion_tokens: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reasoning_tokens: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub order: Order,
    pub model: String,
    pub theme: String,
    pub mapping_seed: u64,
    #[serde(default)]
    pub prompt_style: PromptStyle,
    pub prompt_sha256: String,
    pub raw_reply: String,
    pub parsed: Option<ParsedAnswer>,
    pub verdict: Option<Verdict>,
    pub timing_ms: u64,
    #[serde(default)]
    pub usage: Usage,
    pub attempts: u32,
    pub temperature: f64,
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translator_prompt_version: Option<String>,
}

pub type RecordKey = (String, String, Order);

impl RunRecord {
    pub fn key(&self) -> RecordKey {
        (self.model.clone(), self.problem_id.clone(), self.order)
    }

    pub fn is_parse_error(&self) -> bool {
        self.status == RecordStatus::Ok
            && self
                .parsed
                .as_ref()
                .is_none_or(|a| a.status == AnswerStatus::ParseError)
    }

    /// Record-level invariants: a verdict is present exactly when the reply
    /// was received and parsed, and its fallacy flag obeys the identity.
    pub fn check(&self) -> Result<(), String> {
        let parsed_ok = self.status == RecordStatus::Ok && !self.is_parse_error();
        if parsed_ok != self.verdict.is_some() {
            return Err(format!(
                "{}/{}/{}: verdict presence does not match parse status",
                self.model, self.problem_id, self.order
            ));
        }
        if let Some(v) = &self.verdict {
            if !v.is_consistent() {
                return Err(format!(
                    "{}/{}/{}: fallacy flag violates the identity",
                    self.model, self.problem_id, self.order
                ));
            }
        }
        if self.status == RecordStatus::TransportError && self.parsed.is_some() {
            return Err(format!(
                "{}/{}/{}: transport-error record carries a parse",
                self.model, self.problem_id, self.order
            ));
        }
        Ok(())
    }
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {msg}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

/// Reads every record in file order. A truncated final line (an interrupted
/// append) is ignored; malformed lines elsewhere are errors.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>, StoreError> {
    let io = |source| StoreError::Io {
        path: path.to_owned(),
        source,
    };
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io(e)),
    };
    let lines: Vec<String> = BufReader::new(file)
        .lines()
        .collect::<Result<_, _>>()
        .map_err(io)?;
    let mut out = Vec::with_capacity(lines.len());
    let last = lines.len();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(_) if i + 1 == last => break,
            Err(e) => {
                return Err(StoreError::Corrupt {
                    path: path.to_owned(),
                    line: i + 1,
                    msg: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Keeps the last record for each key, in key order.
pub fn latest(records: &[RunRecord]) -> Vec<RunRecord> {
    let mut map: BTreeMap<RecordKey, &RunRecord> = BTreeMap::new();
    for r in records {
        map.insert(r.key(), r);
    }
    map.into_values().cloned().collect()
}

/// Append-only store safe to share between worker threads.
pub struct RunStore {
    path: PathBuf,
    file: Mutex<File>,
}

impl RunStore {
    pub fn open(path: impl Into<PathBuf>) -> Result<RunStore, StoreError> {
        let path = path.into();
        let io = |source| StoreError::Io {
            path: path.clone(),
            source,
        };
        // Drop a partial line left by an interrupted append.
        if let Ok(bytes) = std::fs::read(&path) {
            if !bytes.is_empty() && bytes.last() != Some(&b'\n') {
                let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
                OpenOptions::new()
                    .write(true)
                    .open(&path)
                    .and_then(|f| f.set_len(keep as u64))
                    .map_err(io)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        Ok(RunStore {
            path,
            file: Mutex::new(file),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, r: &RunRecord) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(r).expect("records serialize");
        line.push('\n');
        let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
        f.write_all(line.as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| StoreError::Io {
                path: self.path.clone(),
                source,
            })
    }

    pub fn records(&self) -> Result<Vec<RunRecord>, StoreError> {
        read_records(&self.path)
    }

    /// Keys that need no further work: those with a received reply.
    pub fn completed_keys(&self) -> Result<BTreeSet<RecordKey>, StoreError> {
        Ok(self
            .records()?
            .into_iter()
            .filter(|r| r.status == RecordStatus::Ok)
            .map(|r| r.key())
            .collect())
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::judge::Mode;

    pub(crate) fn record(model: &str, id: &str, order: Order, status: RecordStatus) -> RunRecord {
        let ok = status == RecordStatus::Ok;
        RunRecord {
            problem_id: id.into(),
            order,
            model: model.into(),
            theme: "Cards".into(),
            mapping_seed: 1,
            prompt_style: PromptStyle::Standard,
            prompt_sha256: prompt_hash("p"),
            raw_reply: if ok { "Answer: Nothing follows.".into() } else { String::new() },
            parsed: ok.then(|| ParsedAnswer {
                status: AnswerStatus::NothingFollows,
                conclusion: None,
                raw: "Answer: Nothing follows.".into(),
                error: None,
            }),
            verdict: ok.then(|| Verdict::new(true, false, Mode::Endorsement)),
            timing_ms: 3,
            usage: Usage::default(),
            attempts: 1,
            temperature: 0.0,
            status,
            error: (!ok).then(|| "timeout".into()),
            translator_prompt_version: None,
        }
    }

    #[test]
    fn store_round_trip_and_resumption_keys() {
        let dir = std::env::temp_dir().join(format!("etrbench-store-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.jsonl");
        let _ = std::fs::remove_file(&path);
        let store = RunStore::open(&path).unwrap();
        let a = record("m", "p1", Order::Original, RecordStatus::Ok);
        let b = record("m", "p1", Order::Reversed, RecordStatus::TransportError);
        store.append(&a).unwrap();
        store.append(&b).unwrap();
        assert!(a.check().is_ok() && b.check().is_ok());
        assert_eq!(store.records().unwrap(), vec![a.clone(), b.clone()]);
        let keys = store.completed_keys().unwrap();
        assert!(keys.contains(&a.key()) && !keys.contains(&b.key()));

        // An interrupted write leaves a partial line; reopening recovers.
        drop(store);
        std::fs::OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(b"{\"problem_id\":")
            .unwrap();
        assert_eq!(read_records(&path).unwrap().len(), 2);
        let store = RunStore::open(&path).unwrap();
        let b2 = record("m", "p1", Order::Reversed, RecordStatus::Ok);
        store.append(&b2).unwrap();
        assert_eq!(read_records(&path).unwrap(), vec![a, b, b2]);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn latest_keeps_last_record_per_key() {
        let a = record("m", "p1", Order::Reversed, RecordStatus::TransportError);
        let b = record("m", "p1", Order::Reversed, RecordStatus::Ok);
        let c = record("m", "p1", Order::Original, RecordStatus::Ok);
        let l = latest(&[a, b.clone(), c.clone()]);
        assert_eq!(l, vec![c, b]);
    }

    #[test]
    fn check_catches_inconsistent_records() {
        let mut r = record("m", "p", Order::Original, RecordStatus::Ok);
        r.verdict = None;
        assert!(r.check().is_err());
        let mut r = record("m", "p", Order::Original, RecordStatus::Ok);
        r.verdict.as_mut().unwrap().human_like_fallacy = true;
        assert!(r.check().is_err());
        let mut r = record("m", "p", Order::Original, RecordStatus::Ok);
        r.parsed.as_mut().unwrap().status = AnswerStatus::ParseError;
        assert!(r.is_parse_error() && r.check().is_err());
    }
}
