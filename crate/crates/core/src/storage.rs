//! On-disk dataset format: pipe-separated records plus a JSON manifest.
//!
//! A records file is one header line followed by one line per record:
//!
//! ```text
//! # advpath records v1 <width>x<height>
//! <no>|<map_o>|<map_a>|<path_o>|<path_a>|<label>|<attack>
//! ```
//!
//! * `no` — record number, strictly increasing within a file.
//! * `map_o` / `map_a` — row-major `0`/`1` occupancy strings of length
//!   `width * height` (`1` = obstacle). Jointly optional: both present or
//!   both empty. When present the adversarial map must add exactly one
//!   obstacle to the original.
//! * `path_o` / `path_a` — required; `x:y` cells joined by commas.
//! * `label` / `attack` — jointly optional; label is one of `UrP`, `FP`,
//!   `DP`, `UcP` and attack is `1`/`0`, which must agree with the label.
//!
//! Validation is structural (bounds, step adjacency, shared start, map
//! dimensions, single-obstacle difference) so externally produced path
//! pairs — including ones that revisit cells or cross obstacles — can be
//! imported and re-judged.
//!
//! The manifest sidecar (`<file>.manifest.json`) records the grid size,
//! record count, a SHA-256 over every byte after the header line, the
//! creation timestamp, and the configs that produced the data. Reads verify
//! the hash before parsing a single record. Writes go through a temp file
//! and rename, and are byte-deterministic for a given input.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gridworld::{
    validate_path_adjacency, validate_path_pair, Cell, GridMap, Path, PathPair, ValidationError,
};
use crate::perturb::GenConfig;
use crate::planner::PlannerConfig;
use crate::taxonomy::{attack_verdict, Label};

/// First token of a records-file header.
pub const RECORDS_MAGIC: &str = "# advpath records v1";
/// Manifest `format` field value.
pub const MANIFEST_FORMAT: &str = "advpath records v1";

/// One dataset row: a path pair with optional maps and an optional label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub no: u64,
    /// `(original, adversarial)` occupancy grids, if stored.
    pub maps: Option<(GridMap, GridMap)>,
    pub paths: PathPair,
    pub label: Option<Label>,
    pub attack: Option<bool>,
}

impl Record {
    /// An unlabeled record.
    pub fn new(no: u64, maps: Option<(GridMap, GridMap)>, paths: PathPair) -> Self {
        Record { no, maps, paths, label: None, attack: None }
    }

    /// Sets the label and the attack flag it implies.
    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self.attack = Some(attack_verdict(label));
        self
    }

    /// The goal a record was planned against: the original path's endpoint.
    pub fn goal(&self) -> Option<Cell> {
        self.paths.original.last()
    }
}

/// Dataset metadata stored beside the records file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    /// Free-form name for the dataset; writers usually use the file stem.
    #[serde(default)]
    pub dataset_id: String,
    pub width: usize,
    pub height: usize,
    pub record_count: usize,
    pub sha256_hex: String,
    /// Creation time in seconds since the Unix epoch. Passed in by the
    /// caller so identical inputs produce identical bytes.
    pub created_unix: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<u32>,
}

impl Manifest {
    /// A manifest template; `write_records` fills `record_count` and
    /// `sha256_hex`.
    pub fn template(width: usize, height: usize, created_unix: u64) -> Self {
        Manifest {
            format: MANIFEST_FORMAT.to_string(),
            dataset_id: String::new(),
            width,
            height,
            record_count: 0,
            sha256_hex: String::new(),
            created_unix,
            generator: None,
            planner: None,
            threshold: None,
        }
    }
}

/// Storage failures.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum StorageError {
    #[error("io failed on {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("missing or unrecognized header, found {found:?}")]
    MalformedHeader { found: String },
    #[error("header declares {header_width}x{header_height} but the manifest says {manifest_width}x{manifest_height}")]
    DimensionsDisagree {
        header_width: usize,
        header_height: usize,
        manifest_width: usize,
        manifest_height: usize,
    },
    #[error("records hash {found} does not match the manifest hash {expected}")]
    HashMismatch { expected: String, found: String },
    #[error("manifest promises {expected} records, file holds {found}")]
    CountMismatch { expected: usize, found: usize },
    #[error("no manifest sidecar at {path}")]
    ManifestMissing { path: String },
    #[error("manifest is not valid json: {0}")]
    ManifestParse(String),
    #[error("line {line}: {reason}")]
    ParseError { line: usize, reason: String },
    #[error("line {line}: record {no} repeats an earlier record number")]
    DuplicateRecordNo { line: usize, no: u64 },
    #[error("line {line}: record {no} is out of order (previous {previous})")]
    OutOfOrderRecordNo { line: usize, no: u64, previous: u64 },
    #[error("line {line}: record {no} is invalid: {source}")]
    RecordValidation {
        line: usize,
        no: u64,
        #[source]
        source: ValidationError,
    },
    #[error("line {line}: record {no} marks attack={attack} but label {label} implies {implied}")]
    InconsistentAttackFlag { line: usize, no: u64, label: Label, attack: bool, implied: bool },
}

fn io_error(path: &FsPath, e: std::io::Error) -> StorageError {
    StorageError::Io { path: path.display().to_string(), reason: e.to_string() }
}

/// Manifest sidecar path: the records path with `.manifest.json` appended.
pub fn manifest_path(records: &FsPath) -> PathBuf {
    let mut name = records
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".manifest.json");
    records.with_file_name(name)
}

/// Renders a map as a row-major `0`/`1` string.
pub fn encode_map(map: &GridMap) -> String {
    map.cells()
        .map(|c| if map.is_obstacle(c) { '1' } else { '0' })
        .collect()
}

fn parse_map(s: &str, width: usize, height: usize, line: usize) -> Result<GridMap, StorageError> {
    if s.len() != width * height {
        return Err(StorageError::ParseError {
            line,
            reason: format!("map string has {} cells, expected {}", s.len(), width * height),
        });
    }
    let mut obstacles = BTreeSet::new();
    for (i, ch) in s.chars().enumerate() {
        match ch {
            '0' => {}
            '1' => {
                obstacles.insert(Cell::new((i % width) as i32, (i / width) as i32));
            }
            other => {
                return Err(StorageError::ParseError {
                    line,
                    reason: format!("map cell {i} is {other:?}, expected 0 or 1"),
                });
            }
        }
    }
    Ok(GridMap { width, height, obstacles })
}

/// Renders a path as comma-joined `x:y` cells.
pub fn encode_path(path: &Path) -> String {
    path.steps
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_cell(token: &str) -> Option<Cell> {
    let (x, y) = token.split_once(':')?;
    Some(Cell::new(x.parse().ok()?, y.parse().ok()?))
}

fn parse_path(s: &str, field: &str, line: usize) -> Result<Path, StorageError> {
    if s.is_empty() {
        return Err(StorageError::ParseError {
            line,
            reason: format!("{field} is empty; paths are required"),
        });
    }
    let mut steps = Vec::new();
    for token in s.split(',') {
        let cell = parse_cell(token).ok_or_else(|| StorageError::ParseError {
            line,
            reason: format!("{field} holds {token:?}, expected x:y"),
        })?;
        steps.push(cell);
    }
    Ok(Path::new(steps))
}

/// Renders one record as its line (no trailing newline).
pub fn record_to_line(record: &Record) -> String {
    let (map_o, map_a) = match &record.maps {
        Some((original, adversarial)) => (encode_map(original), encode_map(adversarial)),
        None => (String::new(), String::new()),
    };
    let label = record.label.map(|l| l.as_str().to_string()).unwrap_or_default();
    let attack = record
        .attack
        .map(|a| if a { "1" } else { "0" }.to_string())
        .unwrap_or_default();
    format!(
        "{}|{}|{}|{}|{}|{}|{}",
        record.no,
        map_o,
        map_a,
        encode_path(&record.paths.original),
        encode_path(&record.paths.adversarial),
        label,
        attack
    )
}

fn parse_record_line(
    raw: &str,
    width: usize,
    height: usize,
    line: usize,
) -> Result<Record, StorageError> {
    let fields: Vec<&str> = raw.split('|').collect();
    if fields.len() != 7 {
        return Err(StorageError::ParseError {
            line,
            reason: format!("expected 7 |-separated fields, found {}", fields.len()),
        });
    }
    let no: u64 = fields[0].parse().map_err(|_| StorageError::ParseError {
        line,
        reason: format!("record number {:?} is not an integer", fields[0]),
    })?;
    let maps = match (fields[1].is_empty(), fields[2].is_empty()) {
        (true, true) => None,
        (false, false) => Some((
            parse_map(fields[1], width, height, line)?,
            parse_map(fields[2], width, height, line)?,
        )),
        _ => {
            return Err(StorageError::ParseError {
                line,
                reason: "maps must be both present or both empty".to_string(),
            });
        }
    };
    let paths = PathPair {
        original: parse_path(fields[3], "original path", line)?,
        adversarial: parse_path(fields[4], "adversarial path", line)?,
    };
    let (label, attack) = match (fields[5].is_empty(), fields[6].is_empty()) {
        (true, true) => (None, None),
        (false, false) => {
            let label = Label::parse(fields[5]).ok_or_else(|| StorageError::ParseError {
                line,
                reason: format!("unknown label {:?}", fields[5]),
            })?;
            let attack = match fields[6] {
                "1" => true,
                "0" => false,
                other => {
                    return Err(StorageError::ParseError {
                        line,
                        reason: format!("attack flag {other:?}, expected 0 or 1"),
                    });
                }
            };
            (Some(label), Some(attack))
        }
        _ => {
            return Err(StorageError::ParseError {
                line,
                reason: "label and attack must be both present or both empty".to_string(),
            });
        }
    };
    Ok(Record { no, maps, paths, label, attack })
}

/// Structural checks shared by writes and reads; see the module docs for
/// what is deliberately not checked.
pub fn validate_record(
    record: &Record,
    width: usize,
    height: usize,
    line: usize,
) -> Result<(), StorageError> {
    let invalid = |source: ValidationError| StorageError::RecordValidation {
        line,
        no: record.no,
        source,
    };
    validate_path_pair(&record.paths).map_err(invalid)?;
    let frame = GridMap::new(width, height);
    for path in [&record.paths.original, &record.paths.adversarial] {
        validate_path_adjacency(path).map_err(invalid)?;
        for &step in &path.steps {
            if !frame.in_bounds(step) {
                return Err(invalid(ValidationError::OutOfBounds { cell: step }));
            }
        }
    }
    if let Some((original, adversarial)) = &record.maps {
        if original.width != width
            || original.height != height
            || adversarial.width != width
            || adversarial.height != height
        {
            return Err(StorageError::ParseError {
                line,
                reason: "map dimensions disagree with the dataset".to_string(),
            });
        }
        let added = adversarial.obstacles.difference(&original.obstacles).count();
        let removed = original.obstacles.difference(&adversarial.obstacles).count();
        if added != 1 || removed != 0 {
            return Err(invalid(ValidationError::NotSingleObstacleDiff));
        }
    }
    if let (Some(label), Some(attack)) = (record.label, record.attack) {
        let implied = attack_verdict(label);
        if attack != implied {
            return Err(StorageError::InconsistentAttackFlag {
                line,
                no: record.no,
                label,
                attack,
                implied,
            });
        }
    }
    Ok(())
}

fn write_atomically(path: &FsPath, bytes: &[u8]) -> Result<(), StorageError> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp).map_err(|e| io_error(&tmp, e))?;
        f.write_all(bytes).map_err(|e| io_error(&tmp, e))?;
        f.sync_all().map_err(|e| io_error(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| io_error(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Validates and writes records plus their manifest sidecar, atomically for
/// each file. `template` supplies dimensions, timestamp, and provenance
/// configs; the returned manifest has `record_count` and `sha256_hex`
/// filled in.
pub fn write_records(
    path: &FsPath,
    records: &[Record],
    template: &Manifest,
) -> Result<Manifest, StorageError> {
    let mut previous: Option<u64> = None;
    let mut body = String::new();
    for (i, record) in records.iter().enumerate() {
        let line = i + 2; // header occupies line 1
        match previous {
            Some(p) if record.no == p => {
                return Err(StorageError::DuplicateRecordNo { line, no: record.no });
            }
            Some(p) if record.no < p => {
                return Err(StorageError::OutOfOrderRecordNo {
                    line,
                    no: record.no,
                    previous: p,
                });
            }
            _ => {}
        }
        previous = Some(record.no);
        validate_record(record, template.width, template.height, line)?;
        body.push_str(&record_to_line(record));
        body.push('\n');
    }

    let manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        record_count: records.len(),
        sha256_hex: sha256_hex(body.as_bytes()),
        ..template.clone()
    };

    let header = format!("{} {}x{}\n", RECORDS_MAGIC, manifest.width, manifest.height);
    let mut file_bytes = header.into_bytes();
    file_bytes.extend_from_slice(body.as_bytes());
    write_atomically(path, &file_bytes)?;

    let mut manifest_json = serde_json::to_string_pretty(&manifest)
        .expect("manifest serialization cannot fail");
    manifest_json.push('\n');
    write_atomically(&manifest_path(path), manifest_json.as_bytes())?;
    Ok(manifest)
}

fn parse_header(header: &str) -> Result<(usize, usize), StorageError> {
    let malformed = || StorageError::MalformedHeader { found: header.to_string() };
    let dims = header.strip_prefix(RECORDS_MAGIC).ok_or_else(malformed)?;
    let dims = dims.strip_prefix(' ').ok_or_else(malformed)?;
    let (w, h) = dims.split_once('x').ok_or_else(malformed)?;
    let width: usize = w.parse().map_err(|_| malformed())?;
    let height: usize = h.parse().map_err(|_| malformed())?;
    Ok((width, height))
}

/// Reads a dataset written by [`write_records`]. The manifest sidecar is
/// required; the record bytes are hashed and checked against it before any
/// line is parsed.
pub fn read_records(path: &FsPath) -> Result<(Vec<Record>, Manifest), StorageError> {
    let sidecar = manifest_path(path);
    if !sidecar.exists() {
        return Err(StorageError::ManifestMissing { path: sidecar.display().to_string() });
    }
    let manifest_text =
        fs::read_to_string(&sidecar).map_err(|e| io_error(&sidecar, e))?;
    let manifest: Manifest = serde_json::from_str(&manifest_text)
        .map_err(|e| StorageError::ManifestParse(e.to_string()))?;

    let contents = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let (header, body) = contents
        .split_once('\n')
        .ok_or_else(|| StorageError::MalformedHeader { found: contents.clone() })?;
    let (width, height) = parse_header(header)?;
    if width != manifest.width || height != manifest.height {
        return Err(StorageError::DimensionsDisagree {
            header_width: width,
            header_height: height,
            manifest_width: manifest.width,
            manifest_height: manifest.height,
        });
    }

    let found_hash = sha256_hex(body.as_bytes());
    if found_hash != manifest.sha256_hex {
        return Err(StorageError::HashMismatch {
            expected: manifest.sha256_hex.clone(),
            found: found_hash,
        });
    }

    let lines: Vec<&str> = body.lines().collect();
    if lines.len() != manifest.record_count {
        return Err(StorageError::CountMismatch {
            expected: manifest.record_count,
            found: lines.len(),
        });
    }

    let mut records = Vec::with_capacity(lines.len());
    let mut previous: Option<u64> = None;
    for (i, raw) in lines.iter().enumerate() {
        let line = i + 2;
        let record = parse_record_line(raw, width, height, line)?;
        match previous {
            Some(p) if record.no == p => {
                return Err(StorageError::DuplicateRecordNo { line, no: record.no });
            }
            Some(p) if record.no < p => {
                return Err(StorageError::OutOfOrderRecordNo {
                    line,
                    no: record.no,
                    previous: p,
                });
            }
            _ => {}
        }
        previous = Some(record.no);
        validate_record(&record, width, height, line)?;
        records.push(record);
    }
    Ok((records, manifest))
}

/// Reads records produced outside this workspace: same line grammar, but no
/// manifest, no hash, no ordering requirement. Lines that are blank or
/// start with `#` are skipped. Grid dimensions must be supplied because
/// there may be no header to carry them.
pub fn import_external_pathpairs(
    path: &FsPath,
    width: usize,
    height: usize,
) -> Result<Vec<Record>, StorageError> {
    let contents = fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut records = Vec::new();
    for (i, raw) in contents.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let record = parse_record_line(raw, width, height, line)?;
        validate_record(&record, width, height, line)?;
        records.push(record);
    }
    Ok(records)
}
