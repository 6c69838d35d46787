//! JSON-lines store of trial records.
//!
//! The first line is a header `{"schema_version": N}`; every further line is
//! one [`DbRecord`]. Records are appended and never rewritten. A final line
//! cut short by a crash is skipped with a warning and trimmed before the next
//! append.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{Metrics, TrialRecord};
use crate::schedule::ScheduleSeries;
use crate::tuner::{rank_aggregated, PolicyScore, RankMetric};

pub const SCHEMA_VERSION: u32 = 1;
/// Stored series are thinned to at most this many points.
pub const MAX_SERIES_POINTS: usize = 512;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: store has schema version {found}, this build reads version {expected}")]
    SchemaMismatch { path: String, found: u32, expected: u32 },
    #[error("{path}: line {line}: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("{0} is locked by another writer")]
    Locked(String),
}

/// Identifies which records are comparable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DbKey {
    pub dataset_id: String,
    pub model_id: String,
    pub optimizer_id: String,
}

impl DbKey {
    pub fn new(dataset_id: impl Into<String>, model_id: impl Into<String>, optimizer_id: impl Into<String>) -> Self {
        DbKey {
            dataset_id: dataset_id.into(),
            model_id: model_id.into(),
            optimizer_id: optimizer_id.into(),
        }
    }

    /// The key a trial record belongs under.
    pub fn of(record: &TrialRecord) -> Self {
        DbKey::new(&record.task_id, &record.model_id, record.optimizer.id())
    }

    fn check(&self) -> Result<(), DbError> {
        for (name, v) in [
            ("dataset_id", &self.dataset_id),
            ("model_id", &self.model_id),
            ("optimizer_id", &self.optimizer_id),
        ] {
            if v.is_empty() {
                return Err(DbError::InvalidRecord(format!("{name} is empty")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbRecord {
    pub id: u64,
    pub key: DbKey,
    pub record: TrialRecord,
    /// Milliseconds since the Unix epoch.
    pub inserted_at: u64,
    pub schema_version: u32,
}

impl DbRecord {
    fn check(&self) -> Result<(), DbError> {
        self.key.check()?;
        if self.schema_version != SCHEMA_VERSION {
            return Err(DbError::InvalidRecord(format!(
                "schema version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.record.check().map_err(DbError::InvalidRecord)
    }
}

/// Keeps records whose values pass every given bound.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricFilter {
    pub min_peak_top1: Option<f64>,
    pub max_final_loss: Option<f64>,
}

impl MetricFilter {
    fn accepts(&self, r: &TrialRecord) -> bool {
        self.min_peak_top1.is_none_or(|m| r.peak_top1.is_some_and(|p| p >= m))
            && self.max_final_loss.is_none_or(|m| r.final_loss <= m)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema_version: u32,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DbError + '_ {
    move |source| DbError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

/// Evenly thins `n` indices to at most `max`, always keeping the first, the
/// last and `must`.
fn thin_indices(n: usize, max: usize, must: Option<usize>) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let slots = max - 1 - usize::from(must.is_some());
    let mut idx: Vec<usize> = (0..slots).map(|j| j * (n - 1) / slots).collect();
    idx.push(n - 1);
    idx.extend(must);
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Shrinks a record for storage: series and learning-rate trace are thinned
/// to [`MAX_SERIES_POINTS`] (the peak entry is always kept) and parameter
/// snapshots are dropped.
pub fn compact_record(mut record: TrialRecord) -> TrialRecord {
    let peak = record
        .iter_at_peak
        .and_then(|at| record.series.iter().position(|m| m.iteration == at));
    let keep = thin_indices(record.series.len(), MAX_SERIES_POINTS, peak);
    let series: Vec<Metrics> = keep.iter().map(|&i| record.series[i].clone()).collect();
    record.series = series;
    let keep = thin_indices(record.lr_trace.points.len(), MAX_SERIES_POINTS, None);
    record.lr_trace = ScheduleSeries {
        policy: record.lr_trace.policy.clone(),
        points: keep.iter().map(|&i| record.lr_trace.points[i]).collect(),
    };
    record.param_snapshots = None;
    record
}

/// Parses store lines. `strict` turns a truncated final line into an error
/// instead of dropping it. Returns the records and the byte length of the
/// valid prefix.
/// Parses the text of an exported store. Every line must be complete and
/// valid.
pub fn parse_db_lines(text: &str) -> Result<Vec<DbRecord>, DbError> {
    parse_lines(Path::new("<input>"), text, true).map(|(records, _)| records)
}

fn parse_lines(path: &Path, text: &str, strict: bool) -> Result<(Vec<DbRecord>, usize), DbError> {
    let corrupt = |line: usize, reason: String| DbError::Corrupt {
        path: path.display().to_string(),
        line,
        reason,
    };
    let mut records = Vec::new();
    let mut offset = 0;
    let mut valid = 0;
    let mut lines = text.split_inclusive('\n').enumerate().peekable();
    while let Some((i, raw)) = lines.next() {
        let lineno = i + 1;
        let last = lines.peek().is_none();
        offset += raw.len();
        let line = raw.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            valid = offset;
            continue;
        }
        if i == 0 {
            let header: Header =
                serde_json::from_str(line).map_err(|e| corrupt(lineno, format!("bad header: {e}")))?;
            if header.schema_version != SCHEMA_VERSION {
                return Err(DbError::SchemaMismatch {
                    path: path.display().to_string(),
                    found: header.schema_version,
                    expected: SCHEMA_VERSION,
                });
            }
            valid = offset;
            continue;
        }
        match serde_json::from_str::<DbRecord>(line) {
            Ok(r) => {
                r.check().map_err(|e| corrupt(lineno, e.to_string()))?;
                records.push(r);
                valid = offset;
            }
            Err(e) if last && !raw.ends_with('\n') && !strict => {
                log::warn!("{}: skipping truncated final line {lineno}: {e}", path.display());
            }
            Err(e) => return Err(corrupt(lineno, e.to_string())),
        }
    }
    Ok((records, valid))
}

/// A store of [`DbRecord`]s, file-backed or in memory.
///
/// One `PolicyDb` is the single writer for its file; every append takes an
/// exclusive advisory lock for its duration.
#[derive(Debug)]
pub struct PolicyDb {
    path: Option<PathBuf>,
    records: Vec<DbRecord>,
    next_id: u64,
}

impl PolicyDb {
    pub fn in_memory() -> Self {
        PolicyDb {
            path: None,
            records: Vec::new(),
            next_id: 1,
        }
    }

    /// Opens or creates the store at `path` and loads a snapshot of it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, DbError> {
        let path = path.as_ref();
        let file = OpenOptions::new()
            .read(true)
            .write(true)
            .create(true)
            .truncate(false)
            .open(path)
            .map_err(io_err(path))?;
        file.lock().map_err(io_err(path))?;
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let (records, valid) = if text.is_empty() {
            let mut header = serde_json::to_string(&Header {
                schema_version: SCHEMA_VERSION,
            })
            .expect("header serializes");
            header.push('\n');
            (&file).write_all(header.as_bytes()).map_err(io_err(path))?;
            file.sync_data().map_err(io_err(path))?;
            (Vec::new(), header.len())
        } else {
            parse_lines(path, &text, false)?
        };
        if valid < text.len() {
            file.set_len(valid as u64).map_err(io_err(path))?;
        }
        file.unlock().map_err(io_err(path))?;
        let next_id = records.iter().map(|r| r.id).max().unwrap_or(0) + 1;
        Ok(PolicyDb {
            path: Some(path.to_path_buf()),
            records,
            next_id,
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[DbRecord] {
        &self.records
    }

    fn append(&self, lines: &[DbRecord]) -> Result<(), DbError> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        let file = OpenOptions::new().append(true).open(path).map_err(io_err(path))?;
        file.lock().map_err(io_err(path))?;
        let mut w = BufWriter::new(&file);
        for r in lines {
            serde_json::to_writer(&mut w, r).map_err(|e| DbError::InvalidRecord(e.to_string()))?;
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
        drop(w);
        file.sync_data().map_err(io_err(path))?;
        file.unlock().map_err(io_err(path))?;
        Ok(())
    }

    /// Stores `record` under `key` and returns its id. Ids increase strictly.
    pub fn put(&mut self, key: DbKey, record: TrialRecord) -> Result<u64, DbError> {
        let entry = DbRecord {
            id: self.next_id,
            key,
            record: compact_record(record),
            inserted_at: now_ms(),
            schema_version: SCHEMA_VERSION,
        };
        entry.check()?;
        self.append(std::slice::from_ref(&entry))?;
        self.next_id += 1;
        self.records.push(entry);
        Ok(self.next_id - 1)
    }

    /// Stores `record` under its own key.
    pub fn put_record(&mut self, record: TrialRecord) -> Result<u64, DbError> {
        self.put(DbKey::of(&record), record)
    }

    pub fn get(&self, id: u64) -> Option<&DbRecord> {
        self.records
            .binary_search_by_key(&id, |r| r.id)
            .ok()
            .map(|i| &self.records[i])
    }

    /// Records under `key` in insertion order.
    pub fn query(&self, key: &DbKey, filter: Option<&MetricFilter>) -> Vec<&DbRecord> {
        self.records
            .iter()
            .filter(|r| &r.key == key && filter.is_none_or(|f| f.accepts(&r.record)))
            .collect()
    }

    /// Distinct keys, sorted.
    pub fn keys(&self) -> Vec<DbKey> {
        let mut keys: Vec<DbKey> = self.records.iter().map(|r| r.key.clone()).collect();
        keys.sort();
        keys.dedup();
        keys
    }

    /// The `n` best policies under `key`, each scored by its mean over the
    /// stored trials.
    pub fn top_n(&self, key: &DbKey, metric: RankMetric, n: usize) -> Vec<PolicyScore> {
        let records: Vec<TrialRecord> = self.query(key, None).into_iter().map(|r| r.record.clone()).collect();
        let mut ranked = rank_aggregated(&records, metric);
        ranked.truncate(n);
        ranked
    }

    /// Writes every record to `path` in store format; returns the count.
    pub fn export(&self, path: impl AsRef<Path>) -> Result<usize, DbError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(io_err(path))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer(
            &mut w,
            &Header {
                schema_version: SCHEMA_VERSION,
            },
        )
        .map_err(|e| DbError::InvalidRecord(e.to_string()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r).map_err(|e| DbError::InvalidRecord(e.to_string()))?;
            w.write_all(b"\n").map_err(io_err(path))?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(self.records.len())
    }

    /// Appends every record of an exported file. All lines are validated
    /// first; on any error nothing is added. Imported records get fresh ids
    /// and keep their timestamps.
    pub fn import(&mut self, path: impl AsRef<Path>) -> Result<usize, DbError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let (incoming, _) = parse_lines(path, &text, true)?;
        let entries: Vec<DbRecord> = incoming
            .into_iter()
            .enumerate()
            .map(|(i, r)| DbRecord {
                id: self.next_id + i as u64,
                ..r
            })
            .collect();
        self.append(&entries)?;
        self.next_id += entries.len() as u64;
        let n = entries.len();
        self.records.extend(entries);
        Ok(n)
    }
}
