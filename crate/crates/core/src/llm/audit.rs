use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use super::{ChatMessage, GenerationParams};

/// One LLM call, successful or not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LLMExchange {
    pub id: Uuid,
    pub template_id: String,
    pub prompt: String,
    pub prompt_hash: String,
    pub context: Vec<ChatMessage>,
    pub params: GenerationParams,
    pub provider: String,
    pub response: Option<String>,
    pub error: Option<String>,
    pub latency_ms: u64,
    pub timestamp: DateTime<Utc>,
}

enum Sink {
    Memory(Vec<LLMExchange>),
    File {
        path: PathBuf,
        file: File,
        count: usize,
    },
}

/// Append-only exchange log. Appends are serialized behind a mutex; the
/// file variant writes one JSON object per line.
pub struct AuditLog {
    sink: Mutex<Sink>,
}

impl AuditLog {
    pub fn in_memory() -> Self {
        Self {
            sink: Mutex::new(Sink::Memory(Vec::new())),
        }
    }

    pub fn to_file(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Self {
            sink: Mutex::new(Sink::File {
                path,
                file,
                count: 0,
            }),
        })
    }

    pub fn append(&self, exchange: LLMExchange) -> io::Result<()> {
        let mut sink = self.sink.lock().unwrap_or_else(|p| p.into_inner());
        match &mut *sink {
            Sink::Memory(v) => v.push(exchange),
            Sink::File { file, count, .. } => {
                let mut line = serde_json::to_string(&exchange)?;
                line.push('\n');
                file.write_all(line.as_bytes())?;
                file.flush()?;
                *count += 1;
            }
        }
        Ok(())
    }

    /// Number of exchanges appended through this handle.
    pub fn len(&self) -> usize {
        match &*self.sink.lock().unwrap_or_else(|p| p.into_inner()) {
            Sink::Memory(v) => v.len(),
            Sink::File { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All exchanges; for the file variant this re-reads the file.
    pub fn entries(&self) -> Vec<LLMExchange> {
        match &*self.sink.lock().unwrap_or_else(|p| p.into_inner()) {
            Sink::Memory(v) => v.clone(),
            Sink::File { path, .. } => read_log(path).unwrap_or_default(),
        }
    }
}

/// Reads a JSON Lines exchange log, skipping lines that do not parse
/// (a torn final write).
pub fn read_log(path: &Path) -> io::Result<Vec<LLMExchange>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if let Ok(x) = serde_json::from_str(&line) {
            out.push(x);
        }
    }
    Ok(out)
}

/// Parses one audit line.
pub fn parse_line(line: &str) -> Result<LLMExchange, serde_json::Error> {
    serde_json::from_str(line)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize) -> LLMExchange {
        LLMExchange {
            id: Uuid::new_v4(),
            template_id: format!("t{n}"),
            prompt: "p".into(),
            prompt_hash: "h".into(),
            context: vec![],
            params: GenerationParams::default(),
            provider: "mock".into(),
            response: Some("r".into()),
            error: None,
            latency_ms: 1,
            timestamp: Utc::now(),
        }
    }

    #[test]
    fn file_log_is_jsonl_and_append_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("audit/llm.jsonl");
        {
            let log = AuditLog::to_file(&path).unwrap();
            log.append(sample(0)).unwrap();
            log.append(sample(1)).unwrap();
            assert_eq!(log.len(), 2);
        }
        let log = AuditLog::to_file(&path).unwrap();
        log.append(sample(2)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 3);
        let ids: Vec<_> = log.entries().into_iter().map(|e| e.template_id).collect();
        assert_eq!(ids, ["t0", "t1", "t2"]);
        assert!(parse_line(text.lines().next().unwrap()).is_ok());
    }
}
