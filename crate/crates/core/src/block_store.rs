//! On-disk datasets: a directory holding one binary file per block plus a
//! human-readable `manifest.txt`.
//!
//! Block files are record-major. Each record is `feature_count` little-endian
//! `f64` values followed by a little-endian `u32` label code, which is
//! `0xFFFF_FFFF` when the record has no label.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
const MANIFEST_MAGIC: &str = "rsp-manifest v1";
const NO_LABEL: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    feature_names: Vec<String>,
    label_categories: Option<Vec<u32>>,
}

impl Schema {
    /// Feature names must be non-empty, distinct, and free of whitespace and
    /// commas. Label categories, when present, must be distinct codes below
    /// `u32::MAX`; they are kept in ascending order.
    pub fn new(feature_names: Vec<String>, label_categories: Option<Vec<u32>>) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::InvalidSchema("feature_count must be at least 1".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if name.is_empty() || name.contains(|c: char| c.is_whitespace() || c == ',') {
                return Err(Error::InvalidSchema(format!("bad feature name {name:?}")));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidSchema(format!("duplicate feature name {name:?}")));
            }
        }
        let label_categories = match label_categories {
            None => None,
            Some(mut cats) => {
                cats.sort_unstable();
                let before = cats.len();
                cats.dedup();
                if cats.len() != before {
                    return Err(Error::InvalidSchema("duplicate label category".into()));
                }
                if cats.is_empty() {
                    return Err(Error::InvalidSchema("label declared without categories".into()));
                }
                if cats.contains(&NO_LABEL) {
                    return Err(Error::InvalidSchema("label code 0xFFFFFFFF is reserved".into()));
                }
                Some(cats)
            }
        };
        Ok(Self {
            feature_names,
            label_categories,
        })
    }

    /// Features named `x1..xM`, with an optional label over codes `0..classes`.
    pub fn numbered(feature_count: usize, classes: Option<u32>) -> Result<Self> {
        let names = (1..=feature_count).map(|j| format!("x{j}")).collect();
        Self::new(names, classes.map(|c| (0..c).collect()))
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn feature_index(&self, name: &str) -> Result<usize> {
        self.feature_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn label_categories(&self) -> Option<&[u32]> {
        self.label_categories.as_deref()
    }

    pub fn has_label(&self) -> bool {
        self.label_categories.is_some()
    }

    /// Bytes per stored record.
    pub fn record_width(&self) -> usize {
        self.feature_count() * 8 + 4
    }

    pub fn check(&self, record: &Record) -> std::result::Result<(), String> {
        if record.features.len() != self.feature_count() {
            return Err(format!(
                "expected {} features, found {}",
                self.feature_count(),
                record.features.len()
            ));
        }
        if let Some(j) = record.features.iter().position(|v| !v.is_finite()) {
            return Err(format!("feature {} is not finite", self.feature_names[j]));
        }
        match (&self.label_categories, record.label) {
            (None, None) => Ok(()),
            (None, Some(_)) => Err("record has a label but the schema declares none".into()),
            (Some(_), None) => Err("record is missing its label".into()),
            (Some(cats), Some(code)) if cats.binary_search(&code).is_ok() => Ok(()),
            (Some(_), Some(code)) => Err(format!("label code {code} is not a declared category")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub features: Vec<f64>,
    pub label: Option<u32>,
}

impl Record {
    pub fn new(features: Vec<f64>, label: Option<u32>) -> Self {
        Self { features, label }
    }

    pub fn encode_into(&self, buf: &mut Vec<u8>) {
        for v in &self.features {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        buf.extend_from_slice(&self.label.unwrap_or(NO_LABEL).to_le_bytes());
    }

    /// Decodes one record of `feature_count` features; `bytes` must be exactly
    /// one record wide.
    pub fn decode(bytes: &[u8], feature_count: usize) -> Self {
        debug_assert_eq!(bytes.len(), feature_count * 8 + 4);
        let features = bytes[..feature_count * 8]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let code = u32::from_le_bytes(bytes[feature_count * 8..].try_into().expect("4 bytes"));
        Self {
            features,
            label: (code != NO_LABEL).then_some(code),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Original,
    Rsp,
}

impl DatasetKind {
    fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Original => "original",
            DatasetKind::Rsp => "rsp",
        }
    }
}

/// Partitioning parameters recorded in a manifest. For an original dataset
/// only `orig_blocks` is set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestParams {
    /// P
    pub orig_blocks: Option<usize>,
    /// K
    pub rsp_blocks: Option<usize>,
    /// n, the nominal records per RSP block
    pub block_records: Option<usize>,
    /// δ, the nominal records per slice
    pub slice: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockMeta {
    pub block_id: u32,
    pub record_count: u64,
    /// Relative to the manifest directory.
    pub path: String,
    /// Hex SHA-256 of the block file.
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub kind: DatasetKind,
    pub schema: Schema,
    pub total_records: u64,
    pub params: ManifestParams,
    /// Manifest file of the dataset this one was derived from.
    pub source: Option<PathBuf>,
    pub blocks: Vec<BlockMeta>,
}

fn opt_to_string<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let p = &self.params;
        let cats = match self.schema.label_categories() {
            None => "-".to_string(),
            Some(c) => c.iter().map(u32::to_string).collect::<Vec<_>>().join(","),
        };
        let source = self
            .source
            .as_ref()
            .map_or_else(|| "-".to_string(), |s| s.display().to_string());
        // Writing to a String cannot fail.
        let _ = writeln!(out, "{MANIFEST_MAGIC}");
        let _ = writeln!(out, "kind {}", self.kind.as_str());
        let _ = writeln!(out, "total_records {}", self.total_records);
        let _ = writeln!(out, "feature_count {}", self.schema.feature_count());
        let _ = writeln!(out, "feature_names {}", self.schema.feature_names().join(","));
        let _ = writeln!(out, "label_categories {cats}");
        let _ = writeln!(out, "params.P {}", opt_to_string(&p.orig_blocks));
        let _ = writeln!(out, "params.K {}", opt_to_string(&p.rsp_blocks));
        let _ = writeln!(out, "params.n {}", opt_to_string(&p.block_records));
        let _ = writeln!(out, "params.delta {}", opt_to_string(&p.slice));
        let _ = writeln!(out, "params.seed {}", opt_to_string(&p.seed));
        let _ = writeln!(out, "source {source}");
        let _ = writeln!(out, "blocks {}", self.blocks.len());
        for b in &self.blocks {
            let _ = writeln!(out, "{} {} {} {}", b.block_id, b.record_count, b.path, b.checksum);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let err = |line: usize, message: String| Error::ManifestParse { line, message };

        match lines.next() {
            Some((_, l)) if l.trim() == MANIFEST_MAGIC => {}
            _ => return Err(err(1, format!("expected header {MANIFEST_MAGIC:?}"))),
        }

        let mut field = |key: &str| -> Result<(usize, String)> {
            let (no, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("missing {key} line")))?;
            let (k, v) = line
                .split_once(' ')
                .ok_or_else(|| err(no, format!("expected `{key} <value>`")))?;
            if k != key {
                return Err(err(no, format!("expected key {key}, found {k}")));
            }
            Ok((no, v.trim().to_string()))
        };
        fn num<T: std::str::FromStr>(no: usize, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::ManifestParse {
                line: no,
                message: format!("bad number {v:?}"),
            })
        }
        fn opt_num<T: std::str::FromStr>(no: usize, v: &str) -> Result<Option<T>> {
            if v == "-" {
                Ok(None)
            } else {
                num(no, v).map(Some)
            }
        }

        let (no, kind) = field("kind")?;
        let kind = match kind.as_str() {
            "original" => DatasetKind::Original,
            "rsp" => DatasetKind::Rsp,
            other => return Err(err(no, format!("unknown kind {other:?}"))),
        };
        let (no, v) = field("total_records")?;
        let total_records: u64 = num(no, &v)?;
        let (no, v) = field("feature_count")?;
        let feature_count: usize = num(no, &v)?;
        let (no, v) = field("feature_names")?;
        let names: Vec<String> = v.split(',').map(str::to_string).collect();
        if names.len() != feature_count {
            return Err(err(no, format!("{} names for {feature_count} features", names.len())));
        }
        let (no, v) = field("label_categories")?;
        let cats = if v == "-" {
            None
        } else {
            Some(v.split(',').map(|c| num(no, c)).collect::<Result<Vec<u32>>>()?)
        };
        let schema = Schema::new(names, cats).map_err(|e| err(no, e.to_string()))?;

        let (no, v) = field("params.P")?;
        let orig_blocks = opt_num(no, &v)?;
        let (no, v) = field("params.K")?;
        let rsp_blocks = opt_num(no, &v)?;
        let (no, v) = field("params.n")?;
        let block_records = opt_num(no, &v)?;
        let (no, v) = field("params.delta")?;
        let slice = opt_num(no, &v)?;
        let (no, v) = field("params.seed")?;
        let seed = opt_num(no, &v)?;
        let (_, v) = field("source")?;
        let source = (v != "-").then(|| PathBuf::from(v));
        let (no, v) = field("blocks")?;
        let count: usize = num(no, &v)?;

        let mut blocks = Vec::with_capacity(count);
        for (no, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 {
                return Err(err(no, "expected `block_id record_count path checksum`".into()));
            }
            blocks.push(BlockMeta {
                block_id: num(no, parts[0])?,
                record_count: num(no, parts[1])?,
                path: parts[2].to_string(),
                checksum: parts[3].to_string(),
            });
        }
        if blocks.len() != count {
            return Err(err(0, format!("declared {count} blocks, found {}", blocks.len())));
        }
        Ok(Self {
            kind,
            schema,
            total_records,
            params: ManifestParams {
                orig_blocks,
                rsp_blocks,
                block_records,
                slice,
                seed,
            },
            source,
            blocks,
        })
    }

    /// Hex SHA-256 of the manifest text; identifies the dataset.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))
    }
}

pub(crate) fn block_file_name(block_id: u32) -> String {
    format!("block_{block_id:05}.bin")
}

/// Encodes `records` to a block file, checking each against `schema`.
/// `first_index` is the stream index of the first record, for error reports.
pub(crate) fn encode_records(schema: &Schema, records: &[Record], first_index: u64) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(records.len() * schema.record_width());
    for (i, r) in records.iter().enumerate() {
        schema.check(r).map_err(|reason| Error::SchemaViolation {
            index: first_index + i as u64,
            reason,
        })?;
        r.encode_into(&mut buf);
    }
    Ok(buf)
}

/// Writes raw block bytes and returns the block's metadata.
pub(crate) fn write_block_bytes(
    dir: &Path,
    block_id: u32,
    schema: &Schema,
    bytes: &[u8],
) -> Result<BlockMeta> {
    let name = block_file_name(block_id);
    let path = dir.join(&name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    Ok(BlockMeta {
        block_id,
        record_count: (bytes.len() / schema.record_width()) as u64,
        path: name,
        checksum: hex::encode(Sha256::digest(bytes)),
    })
}

pub(crate) fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let path = dir.join(MANIFEST_FILE);
    let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(manifest.to_text().as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
}

/// A manifest together with the directory its block paths are relative to.
#[derive(Debug, Clone)]
pub struct Dataset {
    dir: PathBuf,
    manifest: Manifest,
}

impl Dataset {
    /// Opens a dataset from its directory or from its manifest file.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let manifest_path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
        let manifest = Manifest::parse(&text)?;
        let dir = manifest_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        Ok(Self { dir, manifest })
    }

    pub(crate) fn from_parts(dir: PathBuf, manifest: Manifest) -> Self {
        Self { dir, manifest }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn schema(&self) -> &Schema {
        &self.manifest.schema
    }

    pub fn kind(&self) -> DatasetKind {
        self.manifest.kind
    }

    pub fn total_records(&self) -> u64 {
        self.manifest.total_records
    }

    pub fn block_count(&self) -> usize {
        self.manifest.blocks.len()
    }

    pub fn block_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.manifest.blocks.iter().map(|b| b.block_id)
    }

    pub fn block_meta(&self, block_id: u32) -> Result<&BlockMeta> {
        self.manifest
            .blocks
            .iter()
            .find(|b| b.block_id == block_id)
            .ok_or(Error::UnknownBlock(block_id))
    }

    /// Raw bytes of a block after size and checksum verification.
    pub fn read_block_bytes(&self, block_id: u32) -> Result<Vec<u8>> {
        let meta = self.block_meta(block_id)?;
        let path = self.dir.join(&meta.path);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let expected = meta.record_count as usize * self.schema().record_width();
        if bytes.len() != expected {
            return Err(Error::CorruptBlock {
                block_id,
                reason: format!("file holds {} bytes, expected {expected}", bytes.len()),
            });
        }
        let checksum = hex::encode(Sha256::digest(&bytes));
        if checksum != meta.checksum {
            return Err(Error::CorruptBlock {
                block_id,
                reason: "checksum mismatch".into(),
            });
        }
        Ok(bytes)
    }

    pub fn read_block(&self, block_id: u32) -> Result<Vec<Record>> {
        let bytes = self.read_block_bytes(block_id)?;
        let m = self.schema().feature_count();
        Ok(bytes
            .chunks_exact(self.schema().record_width())
            .map(|c| Record::decode(c, m))
            .collect())
    }

    /// Every record, blocks concatenated in manifest order.
    pub fn read_all(&self) -> Result<Vec<Record>> {
        let mut out = Vec::with_capacity(self.total_records() as usize);
        for id in self.block_ids() {
            out.extend(self.read_block(id)?);
        }
        Ok(out)
    }

    /// Records `[start, end)` of the concatenated block sequence.
    pub fn read_range(&self, start: u64, end: u64) -> Result<Vec<Record>> {
        let mut out = Vec::with_capacity(end.saturating_sub(start) as usize);
        let mut offset = 0u64;
        for meta in &self.manifest.blocks {
            let (lo, hi) = (offset, offset + meta.record_count);
            offset = hi;
            if hi <= start || lo >= end {
                continue;
            }
            let records = self.read_block(meta.block_id)?;
            let from = start.saturating_sub(lo) as usize;
            let to = (end.min(hi) - lo) as usize;
            out.extend(records.into_iter().take(to).skip(from));
        }
        Ok(out)
    }

    /// Values of one feature across all blocks.
    pub fn feature_column(&self, feature: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(self.total_records() as usize);
        for id in self.block_ids() {
            out.extend(self.read_block(id)?.into_iter().map(|r| r.features[feature]));
        }
        Ok(out)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_manifest(self)
    }
}

/// Writes `records` as a new original dataset in `dir`, cutting the stream
/// sequentially into blocks of `block_size` records; the last block holds the
/// remainder.
pub fn create_dataset(
    dir: impl AsRef<Path>,
    schema: Schema,
    records: impl IntoIterator<Item = Record>,
    block_size: usize,
) -> Result<Dataset> {
    let dir = dir.as_ref();
    if block_size == 0 {
        return Err(Error::InvalidParams("block_size must be positive".into()));
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut blocks = Vec::new();
    let mut pending = Vec::with_capacity(block_size);
    let mut total = 0u64;
    let flush = |pending: &mut Vec<Record>, total: u64, blocks: &mut Vec<BlockMeta>| -> Result<()> {
        let first = total - pending.len() as u64;
        let bytes = encode_records(&schema, pending, first)?;
        blocks.push(write_block_bytes(dir, blocks.len() as u32 + 1, &schema, &bytes)?);
        pending.clear();
        Ok(())
    };
    for record in records {
        pending.push(record);
        total += 1;
        if pending.len() == block_size {
            flush(&mut pending, total, &mut blocks)?;
        }
    }
    if !pending.is_empty() {
        flush(&mut pending, total, &mut blocks)?;
    }
    if total == 0 {
        return Err(Error::Empty("record stream"));
    }

    let manifest = Manifest {
        kind: DatasetKind::Original,
        params: ManifestParams {
            orig_blocks: Some(blocks.len()),
            ..Default::default()
        },
        schema,
        total_records: total,
        source: None,
        blocks,
    };
    write_manifest(dir, &manifest)?;
    Ok(Dataset::from_parts(dir.to_path_buf(), manifest))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    pub fn is_ok(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Structural and content checks on a dataset. Problems are reported as
/// failed checks, never as errors.
pub fn validate_manifest(ds: &Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = ds.manifest();

    let ids: Vec<u32> = ds.block_ids().collect();
    let contiguous = ids.iter().enumerate().all(|(i, &id)| id as usize == i + 1);
    report.push(
        "block_ids",
        contiguous && !ids.is_empty(),
        if contiguous {
            format!("{} blocks numbered 1..{}", ids.len(), ids.len())
        } else {
            format!("block ids are not 1..K in order: {ids:?}")
        },
    );

    let sum: u64 = m.blocks.iter().map(|b| b.record_count).sum();
    report.push(
        "total_records",
        sum == m.total_records,
        format!("blocks hold {sum} records, manifest declares {}", m.total_records),
    );

    let mut all_bytes = Vec::new();
    let mut readable = true;
    for meta in &m.blocks {
        match ds.read_block_bytes(meta.block_id) {
            Ok(bytes) => {
                let records: Vec<Record> = bytes
                    .chunks_exact(m.schema.record_width())
                    .map(|c| Record::decode(c, m.schema.feature_count()))
                    .collect();
                if let Some((i, reason)) = records
                    .iter()
                    .enumerate()
                    .find_map(|(i, r)| m.schema.check(r).err().map(|e| (i, e)))
                {
                    report.push(
                        format!("block {}", meta.block_id),
                        false,
                        format!("record {i} violates schema: {reason}"),
                    );
                    readable = false;
                } else {
                    report.push(
                        format!("block {}", meta.block_id),
                        true,
                        format!("{} records, checksum ok", meta.record_count),
                    );
                }
                all_bytes.extend_from_slice(&bytes);
            }
            Err(e) => {
                readable = false;
                report.push(format!("block {}", meta.block_id), false, e.to_string());
            }
        }
    }

    if m.kind == DatasetKind::Rsp {
        check_rsp_params(m, &mut report);
        if let Some(src) = &m.source {
            if !readable {
                report.push("multiset", false, "skipped: unreadable blocks");
            } else {
                match Dataset::open(ds.dir.join(src)).and_then(|s| read_all_bytes(&s).map(|b| (s, b))) {
                    Err(e) => report.push("multiset", false, format!("cannot read source: {e}")),
                    Ok((source, source_bytes)) => {
                        let same_schema = source.schema() == ds.schema();
                        let equal = same_schema
                            && same_record_multiset(&all_bytes, &source_bytes, m.schema.record_width());
                        report.push(
                            "multiset",
                            equal,
                            if equal {
                                "records are a disjoint cover of the source".to_string()
                            } else if !same_schema {
                                "schema differs from source".to_string()
                            } else {
                                "record multiset differs from source".to_string()
                            },
                        );
                    }
                }
            }
        }
    }
    report
}

fn check_rsp_params(m: &Manifest, report: &mut ValidationReport) {
    let p = &m.params;
    let (Some(orig), Some(k), Some(n), Some(delta), Some(_)) =
        (p.orig_blocks, p.rsp_blocks, p.block_records, p.slice, p.seed)
    else {
        report.push("params", false, "rsp manifest is missing P, K, n, delta or seed");
        return;
    };
    let mut problems = Vec::new();
    if k != m.blocks.len() {
        problems.push(format!("K={k} but {} blocks are listed", m.blocks.len()));
    }
    let counts = m.blocks.iter().map(|b| b.record_count);
    let (lo, hi) = (counts.clone().min().unwrap_or(0), counts.max().unwrap_or(0));
    if m.total_records == (orig * k * delta) as u64 {
        if n != orig * delta {
            problems.push(format!("n={n} but P*delta={}", orig * delta));
        }
        if lo != hi || hi != n as u64 {
            problems.push(format!("even slicing requires every block to hold {n} records"));
        }
    } else if hi - lo > orig as u64 {
        problems.push(format!("block sizes range {lo}..{hi}, more than P={orig} apart"));
    }
    report.push(
        "params",
        problems.is_empty(),
        if problems.is_empty() {
            format!("P={orig} K={k} n={n} delta={delta}")
        } else {
            problems.join("; ")
        },
    );
}

fn read_all_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    for id in ds.block_ids() {
        out.extend(ds.read_block_bytes(id)?);
    }
    Ok(out)
}

/// Exact multiset comparison of fixed-width records.
fn same_record_multiset(a: &[u8], b: &[u8], width: usize) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut ra: Vec<&[u8]> = a.chunks_exact(width).collect();
    let mut rb: Vec<&[u8]> = b.chunks_exact(width).collect();
    ra.sort_unstable();
    rb.sort_unstable();
    ra == rb
}
