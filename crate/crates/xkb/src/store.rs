//! File persistence: one JSON snapshot per session under `sessions/` and an
//! append-only `history.jsonl` with every commit.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use xkb_core::kb::{load_table, ExplanationKB};
use xkb_core::language::{Rule, Schema};
use xkb_core::revision::Scenario;
use xkb_core::semantics::ScopeKind;

use crate::session::{HistoryEntry, SessionState};

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupted session file {}: {message}", path.display())]
    Corrupt { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

#[derive(Serialize, Deserialize)]
struct KbSnapshot {
    kd: Vec<Rule>,
    ke: Vec<Rule>,
}

impl KbSnapshot {
    fn of(kb: &ExplanationKB) -> Self {
        KbSnapshot { kd: kb.kd().to_vec(), ke: kb.ke().to_vec() }
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    id: String,
    created_at: u64,
    scope: ScopeKind,
    default_scenario: Scenario,
    schema: Schema,
    table_csv: String,
    original: KbSnapshot,
    current: KbSnapshot,
    /// Canonical render of `current`, checked on load.
    kb_text: String,
    history: Vec<HistoryEntry>,
}

#[derive(Serialize, Deserialize)]
struct LogLine {
    session_id: String,
    entry: HistoryEntry,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Store, StoreError> {
        let root = root.into();
        let sessions = root.join("sessions");
        fs::create_dir_all(&sessions).map_err(io_err(&sessions))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn snapshot_path(&self, id: &str) -> PathBuf {
        self.root.join("sessions").join(format!("{id}.json"))
    }

    fn log_path(&self) -> PathBuf {
        self.root.join("history.jsonl")
    }

    /// Writes the snapshot through a temporary file and a rename.
    pub fn save(&self, s: &SessionState) -> Result<(), StoreError> {
        let snap = Snapshot {
            version: FORMAT_VERSION,
            id: s.id.clone(),
            created_at: s.created_at,
            scope: s.scope,
            default_scenario: s.default_scenario,
            schema: s.schema().clone(),
            table_csv: s.table.to_csv(),
            original: KbSnapshot::of(&s.original),
            current: KbSnapshot::of(&s.kb),
            kb_text: s.kb.render(),
            history: s.history.clone(),
        };
        let path = self.snapshot_path(&s.id);
        let tmp = path.with_extension("json.tmp");
        let bytes = serde_json::to_vec_pretty(&snap).expect("snapshot serializes");
        fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_err(&path))
    }

    pub fn append_history(&self, session_id: &str, entry: &HistoryEntry) -> Result<(), StoreError> {
        let path = self.log_path();
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let line = LogLine { session_id: session_id.to_string(), entry: entry.clone() };
        let mut text = serde_json::to_string(&line).expect("history entry serializes");
        text.push('\n');
        f.write_all(text.as_bytes()).map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))
    }

    /// Loads every snapshot, sorted by creation time then id. Any unreadable or
    /// inconsistent file is an error naming it.
    pub fn load_all(&self) -> Result<Vec<SessionState>, StoreError> {
        let dir = self.root.join("sessions");
        let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .map(|e| e.map(|e| e.path()).map_err(io_err(&dir)))
            .collect::<Result<_, _>>()?;
        paths.retain(|p| p.extension().is_some_and(|e| e == "json"));
        paths.sort();
        let mut out = Vec::with_capacity(paths.len());
        for p in paths {
            out.push(load_snapshot(&p)?);
        }
        self.check_log()?;
        out.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
        Ok(out)
    }

    /// Every line of the history log must parse.
    fn check_log(&self) -> Result<(), StoreError> {
        let path = self.log_path();
        let f = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(()),
            Err(e) => return Err(StoreError::Io { path, source: e }),
        };
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            serde_json::from_str::<LogLine>(&line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                message: format!("line {}: {e}", i + 1),
            })?;
        }
        Ok(())
    }
}

fn load_snapshot(path: &Path) -> Result<SessionState, StoreError> {
    let corrupt = |message: String| StoreError::Corrupt { path: path.to_path_buf(), message };
    let bytes = fs::read(path).map_err(io_err(path))?;
    let snap: Snapshot = serde_json::from_slice(&bytes).map_err(|e| corrupt(e.to_string()))?;
    if snap.version != FORMAT_VERSION {
        return Err(corrupt(format!("unsupported format version {}", snap.version)));
    }
    let table = load_table(snap.table_csv.as_bytes(), &snap.schema).map_err(|e| corrupt(e.to_string()))?;
    let kb = |k: KbSnapshot| ExplanationKB::new(snap.schema.clone(), k.kd, k.ke).map_err(|e| corrupt(e.to_string()));
    let original = kb(snap.original)?;
    let current = kb(snap.current)?;
    if current.render() != snap.kb_text {
        return Err(corrupt("stored KB text does not match the stored rules".into()));
    }
    Ok(SessionState {
        id: snap.id,
        created_at: snap.created_at,
        scope: snap.scope,
        default_scenario: snap.default_scenario,
        table,
        original,
        kb: current,
        history: snap.history,
    })
}
