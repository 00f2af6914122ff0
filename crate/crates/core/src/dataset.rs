//! JSONL persistence for [`ConversationRecord`]s and the topic/edit-type vocabulary.
//!
//! One record per line, `\n` terminated, keys in the order documented in
//! `docs/dataset-format.md`. Blank lines are ignored on load.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::model::{ConversationRecord, FieldViolation};

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line_no}: malformed record: {cause}")]
    MalformedLine { line_no: usize, cause: String },
    #[error("duplicate record id {0:?}")]
    DuplicateId(String),
    #[error("record {id:?}: invariant violated at {field}")]
    InvariantViolation { id: String, field: String, reason: String },
}

impl DatasetError {
    fn violation(id: &str, v: FieldViolation) -> Self {
        DatasetError::InvariantViolation { id: id.to_owned(), field: v.field, reason: v.reason }
    }
}

/// Parse a single JSONL line into a validated record. `line_no` is 1-based.
pub fn parse_record_line(line: &str, line_no: usize) -> Result<ConversationRecord, DatasetError> {
    let record: ConversationRecord = serde_json::from_str(line)
        .map_err(|e| DatasetError::MalformedLine { line_no, cause: e.to_string() })?;
    record.validate().map_err(|v| DatasetError::violation(&record.id, v))?;
    Ok(record)
}

/// Parse a whole JSONL document.
pub fn parse_dataset(text: &str) -> Result<Vec<ConversationRecord>, DatasetError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = parse_record_line(line, i + 1)?;
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId(record.id));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ConversationRecord>, DatasetError> {
    let bytes = fs::read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| DatasetError::MalformedLine {
        line_no: 0,
        cause: format!("file is not valid UTF-8: {e}"),
    })?;
    parse_dataset(&text)
}

/// Render records as JSONL. An empty slice renders as the empty string.
pub fn render_dataset(records: &[ConversationRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn save_dataset(records: &[ConversationRecord], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut f = fs::File::create(path)?;
    f.write_all(render_dataset(records).as_bytes())?;
    f.flush()?;
    Ok(())
}

/// A set of allowed labels, loaded from a JSON array of strings.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Vocabulary(BTreeSet<String>);

impl Vocabulary {
    pub fn new<I, S>(items: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Vocabulary(items.into_iter().map(Into::into).collect())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.0.contains(label)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Topic and edit-type vocabularies, stored together as
/// `{"topics": [...], "edit_types": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VocabularySet {
    pub topics: Vocabulary,
    pub edit_types: Vocabulary,
}

#[derive(Debug, thiserror::Error)]
pub enum VocabularyError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed vocabulary file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("{kind} {label:?} is not in the vocabulary")]
    Miss { kind: &'static str, label: String },
}

impl VocabularySet {
    pub fn parse(text: &str) -> Result<Self, VocabularyError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, VocabularyError> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn check_topic(&self, topic: &str) -> Result<(), VocabularyError> {
        if self.topics.contains(topic) {
            Ok(())
        } else {
            Err(VocabularyError::Miss { kind: "topic", label: topic.to_owned() })
        }
    }

    pub fn check_edit_type(&self, edit_type: &str) -> Result<(), VocabularyError> {
        if self.edit_types.contains(edit_type) {
            Ok(())
        } else {
            Err(VocabularyError::Miss { kind: "edit type", label: edit_type.to_owned() })
        }
    }

    pub fn check_record(&self, record: &ConversationRecord) -> Result<(), VocabularyError> {
        self.check_topic(&record.topic)?;
        if let Some(e) = &record.edit_type {
            self.check_edit_type(e)?;
        }
        Ok(())
    }
}
