use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::review::{
    check_verdict, create_review_session, effective_verdicts, session_accuracy, AccuracyTable, ReviewItem,
    ReviewSession, Verdict, VerdictEntry,
};
use crate::error::{parse_json_file, Error, Result};

struct SessionState {
    session: ReviewSession,
    log: Vec<VerdictEntry>,
    effective: BTreeMap<String, Verdict>,
}

type Clock = Box<dyn Fn() -> u64 + Send + Sync>;

/// Review sessions persisted under one directory, one subdirectory per
/// session: `session.json`, the append-only `verdicts.jsonl`, and
/// `snapshot.json` with the effective verdicts.
pub struct ReviewStore {
    dir: PathBuf,
    items: BTreeMap<String, ReviewItem>,
    sessions: RwLock<BTreeMap<String, SessionState>>,
    clock: Clock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub session_id: String,
    pub seed: u64,
    pub annotators: Vec<String>,
    pub items: usize,
    pub verdicts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemView {
    #[serde(flatten)]
    pub item: ReviewItem,
    pub annotator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemsPage {
    pub session_id: String,
    pub items: Vec<ItemView>,
    /// Earliest item without a verdict.
    pub next: Option<String>,
    pub done: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictAck {
    pub session_id: String,
    pub item_id: String,
    pub verdict: Verdict,
    pub log_length: usize,
    pub annotator_done: usize,
    pub annotator_assigned: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatorProgress {
    pub annotator: String,
    pub assigned: usize,
    pub done: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub session_id: String,
    pub accuracy: AccuracyTable,
    pub annotators: Vec<AnnotatorProgress>,
    pub log_length: usize,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

fn read_log(path: &Path) -> Result<Vec<VerdictEntry>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(format!("reading {}", path.display()), e)),
    };
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    let mut out = Vec::with_capacity(lines.len());
    for (i, l) in lines.iter().enumerate() {
        match serde_json::from_str(l) {
            Ok(e) => out.push(e),
            // A torn final line from a crash is dropped.
            Err(_) if i + 1 == lines.len() && !text.ends_with('\n') => {
                log::warn!("dropping incomplete last line of {}", path.display());
            }
            Err(e) => {
                return Err(Error::Record {
                    path: path.to_path_buf(),
                    index: i,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(out)
}

impl ReviewStore {
    pub fn open(dir: impl Into<PathBuf>, pool: Vec<ReviewItem>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
        let items: BTreeMap<String, ReviewItem> = pool.into_iter().map(|i| (i.item_id.clone(), i)).collect();
        let mut sessions = BTreeMap::new();
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(format!("listing {}", dir.display()), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.join("session.json").is_file())
            .collect();
        entries.sort();
        for p in entries {
            let session: ReviewSession = parse_json_file(&p.join("session.json"))?;
            let log = read_log(&p.join("verdicts.jsonl"))?;
            let effective = effective_verdicts(&log);
            sessions.insert(session.session_id.clone(), SessionState { session, log, effective });
        }
        Ok(Self {
            dir,
            items,
            sessions: RwLock::new(sessions),
            clock: Box::new(|| {
                SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_millis() as u64)
                    .unwrap_or(0)
            }),
        })
    }

    pub fn with_clock(mut self, clock: impl Fn() -> u64 + Send + Sync + 'static) -> Self {
        self.clock = Box::new(clock);
        self
    }

    pub fn pool_size(&self) -> usize {
        self.items.len()
    }

    pub fn list(&self) -> Vec<SessionSummary> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .values()
            .map(|s| SessionSummary {
                session_id: s.session.session_id.clone(),
                seed: s.session.seed,
                annotators: s.session.annotators.clone(),
                items: s.session.items.len(),
                verdicts: s.effective.len(),
            })
            .collect()
    }

    pub fn create(&self, session_id: &str, sample_size: usize, annotators: &[String], seed: u64) -> Result<ReviewSession> {
        let pool: Vec<String> = self.items.keys().cloned().collect();
        let session = create_review_session(session_id, &pool, sample_size, annotators, seed)?;
        let mut guard = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        if guard.contains_key(session_id) {
            return Err(Error::Validation(format!("session {session_id} already exists")));
        }
        let sdir = self.dir.join(session_id);
        fs::create_dir_all(&sdir).map_err(|e| Error::io(format!("creating {}", sdir.display()), e))?;
        write_atomic(&sdir.join("snapshot.json"), b"{}\n")?;
        fs::write(sdir.join("verdicts.jsonl"), b"").map_err(|e| Error::io("creating verdict log", e))?;
        // session.json last: its presence marks the session as complete.
        write_atomic(&sdir.join("session.json"), &serde_json::to_vec_pretty(&session)?)?;
        guard.insert(
            session_id.to_string(),
            SessionState {
                session: session.clone(),
                log: Vec::new(),
                effective: BTreeMap::new(),
            },
        );
        Ok(session)
    }

    pub fn session(&self, id: &str) -> Result<ReviewSession> {
        self.sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .map(|s| s.session.clone())
            .ok_or_else(|| Error::NotFound(format!("session {id}")))
    }

    pub fn item(&self, id: &str) -> Result<ReviewItem> {
        self.items.get(id).cloned().ok_or_else(|| Error::NotFound(format!("item {id}")))
    }

    pub fn items_for(&self, session_id: &str, annotator: Option<&str>) -> Result<ItemsPage> {
        let guard = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        let st = guard.get(session_id).ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
        if let Some(a) = annotator {
            if !st.session.annotators.iter().any(|x| x == a) {
                return Err(Error::Authorization(format!("{a} is not an annotator of {session_id}")));
            }
        }
        let mut items = Vec::new();
        for id in &st.session.items {
            let who = st.session.assignee(id).unwrap_or_default();
            if annotator.is_some_and(|a| a != who) {
                continue;
            }
            items.push(ItemView {
                item: self.item(id)?,
                annotator: who.to_string(),
                verdict: st.effective.get(id).copied(),
            });
        }
        let next = items.iter().find(|v| v.verdict.is_none()).map(|v| v.item.item_id.clone());
        Ok(ItemsPage {
            session_id: session_id.to_string(),
            done: next.is_none(),
            next,
            items,
        })
    }

    /// Appends to the log before updating the in-memory view, all under
    /// the write lock so writes to a session are serialized.
    pub fn record(&self, session_id: &str, item_id: &str, annotator: &str, verdict: Verdict) -> Result<VerdictAck> {
        let mut guard = self.sessions.write().unwrap_or_else(|e| e.into_inner());
        let st = guard
            .get_mut(session_id)
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
        check_verdict(&st.session, item_id, annotator)?;
        let entry = VerdictEntry {
            item_id: item_id.to_string(),
            annotator: annotator.to_string(),
            verdict,
            at_ms: (self.clock)(),
        };
        let sdir = self.dir.join(session_id);
        let mut line = serde_json::to_string(&entry)?;
        line.push('\n');
        let log_path = sdir.join("verdicts.jsonl");
        let mut f = OpenOptions::new()
            .append(true)
            .create(true)
            .open(&log_path)
            .map_err(|e| Error::io(format!("opening {}", log_path.display()), e))?;
        f.write_all(line.as_bytes())
            .and_then(|_| f.sync_data())
            .map_err(|e| Error::io(format!("appending to {}", log_path.display()), e))?;
        st.log.push(entry);
        st.effective.insert(item_id.to_string(), verdict);
        write_atomic(&sdir.join("snapshot.json"), &serde_json::to_vec_pretty(&st.effective)?)?;
        let assigned: Vec<&String> = st.session.items_of(annotator).collect();
        Ok(VerdictAck {
            session_id: session_id.to_string(),
            item_id: item_id.to_string(),
            verdict,
            log_length: st.log.len(),
            annotator_done: assigned.iter().filter(|i| st.effective.contains_key(i.as_str())).count(),
            annotator_assigned: assigned.len(),
        })
    }

    pub fn log(&self, session_id: &str) -> Result<Vec<VerdictEntry>> {
        let guard = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        guard
            .get(session_id)
            .map(|s| s.log.clone())
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))
    }

    pub fn stats(&self, session_id: &str) -> Result<SessionStats> {
        let guard = self.sessions.read().unwrap_or_else(|e| e.into_inner());
        let st = guard
            .get(session_id)
            .ok_or_else(|| Error::NotFound(format!("session {session_id}")))?;
        let accuracy = session_accuracy(&st.effective, |id| self.items.get(id).is_some_and(|i| i.model_detected));
        let annotators = st
            .session
            .annotators
            .iter()
            .map(|a| {
                let mine: Vec<&String> = st.session.items_of(a).collect();
                AnnotatorProgress {
                    annotator: a.clone(),
                    assigned: mine.len(),
                    done: mine.iter().filter(|i| st.effective.contains_key(i.as_str())).count(),
                }
            })
            .collect();
        Ok(SessionStats {
            session_id: session_id.to_string(),
            accuracy,
            annotators,
            log_length: st.log.len(),
        })
    }
}
