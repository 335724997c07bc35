use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use abcd::session::{Session, SessionEvent};
use serde::{Deserialize, Serialize};

const IDEMPOTENCY_FILE: &str = "idempotency.jsonl";
const LOG_EXT: &str = "jsonl";

/// Append-only event logs, one file per session.
#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

#[derive(Serialize, Deserialize)]
struct KeyEntry {
    key: String,
    id: String,
}

fn append_line(path: &Path, value: &impl Serialize) -> io::Result<()> {
    let mut line = serde_json::to_vec(value)?;
    line.push(b'\n');
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(&line)?;
    f.sync_data()
}

impl Store {
    /// Opens `dir`, creating it if needed, and checks it is writable.
    pub fn open(dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let probe = dir.join(".write-probe");
        File::create(&probe)?.write_all(b"ok")?;
        fs::remove_file(&probe)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{LOG_EXT}"))
    }

    pub fn append(&self, id: &str, event: &SessionEvent) -> io::Result<()> {
        append_line(&self.log_path(id), event)
    }

    pub fn remember_key(&self, key: &str, id: &str) -> io::Result<()> {
        append_line(&self.dir.join(IDEMPOTENCY_FILE), &KeyEntry { key: key.into(), id: id.into() })
    }

    pub fn load_keys(&self) -> io::Result<HashMap<String, String>> {
        let path = self.dir.join(IDEMPOTENCY_FILE);
        if !path.exists() {
            return Ok(HashMap::new());
        }
        let mut out = HashMap::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            match serde_json::from_str::<KeyEntry>(&line) {
                Ok(k) => {
                    out.insert(k.key, k.id);
                }
                Err(e) => log::warn!("skipping idempotency entry: {e}"),
            }
        }
        Ok(out)
    }

    pub fn read_events(&self, id: &str) -> io::Result<Vec<SessionEvent>> {
        let mut out = Vec::new();
        for (i, line) in BufReader::new(File::open(self.log_path(id))?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{id} line {}: {e}", i + 1)))?;
            out.push(e);
        }
        Ok(out)
    }

    /// Replays every session log. Logs that fail to replay are skipped with
    /// a warning.
    pub fn load_all(&self) -> io::Result<Vec<Session>> {
        let mut ids: Vec<String> = fs::read_dir(&self.dir)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == LOG_EXT) && p.file_name().is_some_and(|n| n != IDEMPOTENCY_FILE))
            .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
            .collect();
        ids.sort();
        let mut out = Vec::new();
        for id in ids {
            match self.read_events(&id).map_err(|e| e.to_string()).and_then(|ev| Session::replay(&ev).map_err(|e| e.to_string())) {
                Ok(s) => out.push(s),
                Err(e) => log::warn!("could not restore session {id}: {e}"),
            }
        }
        Ok(out)
    }
}
