use std::fmt;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::{MAX_PASSAGE_ROWS, QUERY_ROWS};

use super::format::first_non_finite;
use super::reader::RawIndex;
use super::shard::{EmbeddingShard, ShardKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationKind {
    BadMagic,
    UnsupportedVersion,
    BadHeader,
    Truncated,
    TrailingBytes,
    UnsortedIds,
    DuplicateId,
    NonMonotonicOffset,
    OverlappingRecord,
    RecordOutOfBounds,
    BadRowCount,
    NonFiniteValue,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    /// The offending record, when the finding is about one.
    pub record: Option<String>,
    pub message: String,
}

impl Violation {
    fn new(kind: ViolationKind, record: Option<&str>, message: String) -> Self {
        Self {
            kind,
            record: record.map(str::to_string),
            message,
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub record_count: u64,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

/// Header, id-table and offset checks shared by loading and validation.
pub(crate) fn structural_violations(raw: &RawIndex, payload_len: u64) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    let mut prev_end = 0u64;
    for (i, e) in raw.entries.iter().enumerate() {
        let id = Some(e.id.as_str());
        if e.rows == 0 {
            out.push(Violation::new(
                BadRowCount,
                id,
                format!("record {:?} has zero rows", e.id),
            ));
        }
        if i > 0 {
            let prev = &raw.entries[i - 1];
            match prev.id.as_bytes().cmp(e.id.as_bytes()) {
                std::cmp::Ordering::Equal => {
                    out.push(Violation::new(DuplicateId, id, format!("duplicate id {:?}", e.id)))
                }
                std::cmp::Ordering::Greater => out.push(Violation::new(
                    UnsortedIds,
                    id,
                    format!("id {:?} sorts before its predecessor {:?}", e.id, prev.id),
                )),
                std::cmp::Ordering::Less => {}
            }
            if e.offset <= prev.offset {
                out.push(Violation::new(
                    NonMonotonicOffset,
                    id,
                    format!(
                        "non-monotonic offset at record {:?}: {} after {}",
                        e.id, e.offset, prev.offset
                    ),
                ));
            } else if e.offset < prev_end {
                out.push(Violation::new(
                    OverlappingRecord,
                    id,
                    format!("record {:?} overlaps its predecessor", e.id),
                ));
            }
        }
        let end = e.offset.saturating_add(raw.record_len(e));
        if end > payload_len {
            out.push(Violation::new(
                RecordOutOfBounds,
                id,
                format!("record {:?} ends at {end}, payload holds {payload_len}", e.id),
            ));
        }
        prev_end = prev_end.max(end);
    }
    out
}

pub fn validate_index(path: &Path) -> Result<ValidationReport> {
    Ok(validate_index_bytes(&fs::read(path)?))
}

/// Checks every header, id-table and offset invariant plus value finiteness.
/// Findings go into the report; nothing here fails.
pub fn validate_index_bytes(bytes: &[u8]) -> ValidationReport {
    use ViolationKind::*;
    let raw = match RawIndex::parse(bytes) {
        Ok(raw) => raw,
        Err(e) => {
            let kind = match e {
                Error::BadMagic => BadMagic,
                Error::UnsupportedVersion(_) => UnsupportedVersion,
                Error::Truncated(_) => Truncated,
                _ => BadHeader,
            };
            return ValidationReport {
                record_count: 0,
                violations: vec![Violation::new(kind, None, e.to_string())],
            };
        }
    };
    let mut report = ValidationReport {
        record_count: raw.header.record_count,
        violations: Vec::new(),
    };
    let payload = &bytes[raw.payload_start..];
    let declared = raw.declared_payload();
    let actual = payload.len() as u64;
    if actual < declared {
        report.violations.push(Violation::new(
            Truncated,
            None,
            format!("truncated payload: declared {declared} bytes, file holds {actual}"),
        ));
    } else if actual > declared {
        report.violations.push(Violation::new(
            TrailingBytes,
            None,
            format!("{} trailing bytes after the declared payload", actual - declared),
        ));
    }
    report.violations.extend(structural_violations(&raw, actual));

    if raw.dtype.is_dense() {
        for e in &raw.entries {
            let start = e.offset as usize;
            let Some(rec) = start
                .checked_add(raw.record_len(e) as usize)
                .and_then(|end| payload.get(start..end))
            else {
                continue;
            };
            if let Some(pos) = first_non_finite(rec, raw.dtype) {
                report.violations.push(Violation::new(
                    NonFiniteValue,
                    Some(&e.id),
                    format!(
                        "record {:?} holds a non-finite value at row {}, column {}",
                        e.id,
                        pos / raw.dim,
                        pos % raw.dim
                    ),
                ));
            }
        }
    }
    report
}

/// Checks a shard file: header, record framing, row counts for `kind`, and
/// finiteness.
pub fn validate_shard(path: &Path, kind: ShardKind) -> Result<ValidationReport> {
    use ViolationKind::*;
    let bytes = fs::read(path)?;
    let shard = match EmbeddingShard::decode(&bytes) {
        Ok(s) => s,
        Err(e) => {
            let vk = match e {
                Error::BadMagic => BadMagic,
                Error::UnsupportedVersion(_) => UnsupportedVersion,
                Error::Truncated(_) => Truncated,
                _ => BadHeader,
            };
            return Ok(ValidationReport {
                record_count: 0,
                violations: vec![Violation::new(vk, None, e.to_string())],
            });
        }
    };
    let mut report = ValidationReport {
        record_count: shard.records.len() as u64,
        violations: Vec::new(),
    };
    let mut seen = std::collections::HashSet::new();
    for r in &shard.records {
        let id = Some(r.id.as_str());
        if !seen.insert(r.id.as_str()) {
            report
                .violations
                .push(Violation::new(DuplicateId, id, format!("duplicate id {:?}", r.id)));
        }
        let rows = r.matrix.rows();
        let ok = match kind {
            ShardKind::Passage => (1..=MAX_PASSAGE_ROWS).contains(&rows),
            ShardKind::Query => rows == QUERY_ROWS,
            ShardKind::Any => rows >= 1,
        };
        if !ok {
            report.violations.push(Violation::new(
                BadRowCount,
                id,
                format!("record {:?} has {rows} rows, not allowed for a {kind:?} shard", r.id),
            ));
        }
        if let Some(pos) = r.matrix.as_slice().iter().position(|x| !x.is_finite()) {
            report.violations.push(Violation::new(
                NonFiniteValue,
                id,
                format!(
                    "record {:?} holds a non-finite value at row {}, column {}",
                    r.id,
                    pos / shard.dim,
                    pos % shard.dim
                ),
            ));
        }
    }
    Ok(report)
}
