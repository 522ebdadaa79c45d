//! Raw session logs and their reduction to observation sequences.
//!
//! A session log is a timestamp-ordered list of page visits. Preprocessing
//! is two steps: map page labels to terminals through the landmark mapping
//! (entries without a mapping are dropped) and collapse consecutive repeats
//! of the same terminal. Observations keep the index of the raw entry they
//! survived from.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brute::brute_force_recognize;
use crate::explanation::{ObservationItem, ObservationSequence};
use crate::library::PlanLibrary;
use crate::recognizer::{RecognizeError, RecognizerParams};

pub const SESSION_CSV_HEADER: &str = "timestamp,user,page_label";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEntry {
    /// Milliseconds since the epoch.
    pub timestamp: u64,
    pub user: String,
    pub page_label: String,
}

/// Entries ordered by timestamp; ties keep their original file order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SessionLog {
    entries: Vec<SessionEntry>,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum PreprocessError {
    #[error("line {line}: {message}")]
    MalformedSession { line: usize, message: String },
    #[error("malformed session document: {0}")]
    MalformedJson(String),
    #[error("mapping sends `{label}` to `{terminal}`, which is not a terminal of the library")]
    UnknownTerminal { label: String, terminal: String },
    #[error("entry index {0} out of range")]
    EntryOutOfRange(usize),
    #[error(transparent)]
    Recognize(#[from] RecognizeError),
}

impl SessionLog {
    pub fn new(mut entries: Vec<SessionEntry>) -> Self {
        entries.sort_by_key(|e| e.timestamp);
        SessionLog { entries }
    }

    pub fn entries(&self) -> &[SessionEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// One-line header, then `timestamp,user,page_label` per entry. Labels
    /// and users must not contain commas or newlines.
    pub fn parse_csv(text: &str) -> Result<Self, PreprocessError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == SESSION_CSV_HEADER => {}
            got => {
                return Err(PreprocessError::MalformedSession {
                    line: 1,
                    message: format!(
                        "expected header `{SESSION_CSV_HEADER}`, got `{}`",
                        got.map(|(_, h)| h).unwrap_or("")
                    ),
                })
            }
        }
        let mut entries = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.splitn(3, ',');
            let (ts, user, label) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => {
                    return Err(PreprocessError::MalformedSession {
                        line: i + 1,
                        message: "expected three comma-separated fields".into(),
                    })
                }
            };
            let timestamp: u64 =
                ts.trim().parse().map_err(|_| PreprocessError::MalformedSession {
                    line: i + 1,
                    message: format!("bad timestamp `{ts}`"),
                })?;
            entries.push(SessionEntry {
                timestamp,
                user: user.trim().to_string(),
                page_label: label.trim().to_string(),
            });
        }
        Ok(SessionLog::new(entries))
    }

    /// JSON array of entry objects, same fields as the CSV columns.
    pub fn parse_json(text: &str) -> Result<Self, PreprocessError> {
        let entries: Vec<SessionEntry> = serde_json::from_str(text)
            .map_err(|e| PreprocessError::MalformedJson(e.to_string()))?;
        Ok(SessionLog::new(entries))
    }

    /// Pick the parser from the first non-space character.
    pub fn parse(text: &str) -> Result<Self, PreprocessError> {
        if text.trim_start().starts_with('[') {
            Self::parse_json(text)
        } else {
            Self::parse_csv(text)
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(SESSION_CSV_HEADER);
        s.push('\n');
        for e in &self.entries {
            s.push_str(&format!("{},{},{}\n", e.timestamp, e.user, e.page_label));
        }
        s
    }
}

/// page_label -> terminal name. Only mapped labels are landmarks worth
/// keeping; everything else in a session is noise to the recognizer.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LandmarkMapping {
    pairs: BTreeMap<String, String>,
}

impl LandmarkMapping {
    pub fn new(pairs: BTreeMap<String, String>) -> Self {
        LandmarkMapping { pairs }
    }

    pub fn parse_json(text: &str) -> Result<Self, PreprocessError> {
        serde_json::from_str(text).map_err(|e| PreprocessError::MalformedJson(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self).expect("mapping serializes")
    }

    pub fn terminal_for(&self, label: &str) -> Option<&str> {
        self.pairs.get(label).map(String::as_str)
    }

    pub fn pairs(&self) -> &BTreeMap<String, String> {
        &self.pairs
    }

    /// Every mapped name must be a terminal of the library.
    pub fn validate(&self, lib: &PlanLibrary) -> Result<(), PreprocessError> {
        for (label, terminal) in &self.pairs {
            match lib.lookup(terminal) {
                Some(id) if lib.is_terminal(id) => {}
                _ => {
                    return Err(PreprocessError::UnknownTerminal {
                        label: label.clone(),
                        terminal: terminal.clone(),
                    })
                }
            }
        }
        Ok(())
    }

    /// terminal name -> lexicographically smallest mapped label. Used by the
    /// simulator to turn sampled terminals back into page labels.
    pub fn invert(&self) -> BTreeMap<String, String> {
        let mut inv: BTreeMap<String, String> = BTreeMap::new();
        for (label, terminal) in &self.pairs {
            inv.entry(terminal.clone()).or_insert_with(|| label.clone());
        }
        inv
    }
}

/// Landmark mapping step: keep mapped entries in order, replacing labels by
/// terminals. Sources point back into the raw log.
pub fn map_entries(
    log: &SessionLog,
    mapping: &LandmarkMapping,
    lib: &PlanLibrary,
) -> Result<ObservationSequence, PreprocessError> {
    mapping.validate(lib)?;
    let mut items = Vec::new();
    for (i, e) in log.entries().iter().enumerate() {
        if let Some(name) = mapping.terminal_for(&e.page_label) {
            let id = lib.lookup(name).expect("validated above");
            items.push(ObservationItem { terminal: id, source: Some(i) });
        }
    }
    Ok(ObservationSequence::new(items))
}

/// Collapse runs of the same terminal, keeping the first of each run.
pub fn dedup_consecutive(obs: &ObservationSequence) -> ObservationSequence {
    let mut items: Vec<ObservationItem> = Vec::with_capacity(obs.len());
    for item in obs.items() {
        if items.last().map(|p| p.terminal) != Some(item.terminal) {
            items.push(*item);
        }
    }
    ObservationSequence::new(items)
}

/// Full preprocessing pipeline: map, then collapse repeats.
pub fn preprocess(
    log: &SessionLog,
    mapping: &LandmarkMapping,
    lib: &PlanLibrary,
) -> Result<ObservationSequence, PreprocessError> {
    Ok(dedup_consecutive(&map_entries(log, mapping, lib)?))
}

/// A raw entry is a landmark when the preprocessed session can describe a
/// complete plan but the session without this entry cannot. Checked with the
/// exhaustive recognizer; any observation may be marked exogenous, so junk
/// around a complete plan does not hide it.
pub fn is_landmark(
    entry_index: usize,
    log: &SessionLog,
    mapping: &LandmarkMapping,
    lib: &PlanLibrary,
) -> Result<bool, PreprocessError> {
    if entry_index >= log.len() {
        return Err(PreprocessError::EntryOutOfRange(entry_index));
    }
    let full = preprocess(log, mapping, lib)?;
    if !admits_complete_plan(&full, lib)? {
        return Ok(false);
    }
    let mut rest: Vec<SessionEntry> = log.entries().to_vec();
    rest.remove(entry_index);
    let without = preprocess(&SessionLog::new(rest), mapping, lib)?;
    Ok(!admits_complete_plan(&without, lib)?)
}

fn admits_complete_plan(
    obs: &ObservationSequence,
    lib: &PlanLibrary,
) -> Result<bool, PreprocessError> {
    let params = RecognizerParams { max_exogenous: obs.len(), ..RecognizerParams::phatt() };
    let explanations = brute_force_recognize(lib, obs, &params)?;
    Ok(explanations.iter().any(|e| e.stats().has_full_plan))
}
