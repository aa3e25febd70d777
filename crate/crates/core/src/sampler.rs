//! Block-level sampling without replacement.
//!
//! A [`SamplingLedger`] scopes one analysis process: every block it hands out
//! is consumed and never handed out again until the ledger is reset. Draw `d`
//! uses a random stream keyed by `(seed, d)`, so a ledger saved to disk and
//! reloaded continues with exactly the draws it would have made in memory.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::block_store::Dataset;
use crate::error::{Error, Result};
use crate::seed::stream_rng;

const DRAW_DOMAIN: &str = "rsp/draw";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplingLedger {
    manifest_ref: String,
    block_count: u32,
    process_id: String,
    seed: u64,
    draw_count: u64,
    /// In draw order.
    consumed: Vec<u32>,
}

impl SamplingLedger {
    /// Fresh ledger over blocks `1..=block_count`.
    pub fn new(manifest_ref: impl Into<String>, block_count: u32, seed: u64, process_id: impl Into<String>) -> Self {
        Self {
            manifest_ref: manifest_ref.into(),
            block_count,
            process_id: process_id.into(),
            seed,
            draw_count: 0,
            consumed: Vec::new(),
        }
    }

    pub fn for_dataset(ds: &Dataset, seed: u64, process_id: impl Into<String>) -> Self {
        Self::new(ds.manifest().digest(), ds.block_count() as u32, seed, process_id)
    }

    pub fn manifest_ref(&self) -> &str {
        &self.manifest_ref
    }

    pub fn process_id(&self) -> &str {
        &self.process_id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn draw_count(&self) -> u64 {
        self.draw_count
    }

    pub fn block_count(&self) -> u32 {
        self.block_count
    }

    pub fn consumed(&self) -> &[u32] {
        &self.consumed
    }

    pub fn remaining(&self) -> usize {
        self.block_count as usize - self.consumed.len()
    }

    /// Draws `g` distinct unconsumed blocks, each equally likely, and marks
    /// them consumed. The ledger is untouched on error.
    pub fn sample_blocks(&mut self, g: usize) -> Result<Vec<u32>> {
        if g == 0 {
            return Err(Error::InvalidParams("batch size g must be at least 1".into()));
        }
        let remaining = self.remaining();
        if g > remaining {
            return Err(Error::InsufficientBlocks { requested: g, remaining });
        }
        let mut pool: Vec<u32> = (1..=self.block_count).filter(|id| !self.consumed.contains(id)).collect();
        let mut rng = stream_rng(self.seed, DRAW_DOMAIN, self.draw_count);
        let (chosen, _) = pool.partial_shuffle(&mut rng, g);
        let chosen = chosen.to_vec();
        self.consumed.extend_from_slice(&chosen);
        self.draw_count += 1;
        Ok(chosen)
    }

    /// Starts a new analysis process over the same manifest.
    pub fn reset(&self, seed: u64) -> Self {
        Self {
            manifest_ref: self.manifest_ref.clone(),
            block_count: self.block_count,
            process_id: self.process_id.clone(),
            seed,
            draw_count: 0,
            consumed: Vec::new(),
        }
    }

    pub fn check_dataset(&self, ds: &Dataset) -> Result<()> {
        let found = ds.manifest().digest();
        if found != self.manifest_ref {
            return Err(Error::LedgerMismatch {
                expected: self.manifest_ref.clone(),
                found,
            });
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let consumed: Vec<String> = self.consumed.iter().map(u32::to_string).collect();
        format!(
            "manifest: {}\nblocks: {}\nprocess_id: {}\nseed: {}\ndraw_count: {}\nconsumed: {}\n",
            self.manifest_ref,
            self.block_count,
            self.process_id,
            self.seed,
            self.draw_count,
            consumed.join(",")
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut field = |key: &str| -> Result<(usize, String)> {
            let (i, line) = lines.next().ok_or(Error::LedgerParse {
                line: 0,
                message: format!("missing {key}"),
            })?;
            let value = line
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(':'))
                .ok_or_else(|| Error::LedgerParse {
                    line: i + 1,
                    message: format!("expected `{key}: ...`"),
                })?;
            Ok((i + 1, value.trim().to_string()))
        };
        fn num<T: std::str::FromStr>(line: usize, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::LedgerParse {
                line,
                message: format!("bad number {v:?}"),
            })
        }
        let (_, manifest_ref) = field("manifest")?;
        let (l, v) = field("blocks")?;
        let block_count: u32 = num(l, &v)?;
        let (_, process_id) = field("process_id")?;
        let (l, v) = field("seed")?;
        let seed = num(l, &v)?;
        let (l, v) = field("draw_count")?;
        let draw_count = num(l, &v)?;
        let (l, v) = field("consumed")?;
        let consumed: Vec<u32> = if v.is_empty() {
            Vec::new()
        } else {
            v.split(',').map(|s| num(l, s.trim())).collect::<Result<_>>()?
        };
        let mut sorted = consumed.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != consumed.len() || sorted.iter().any(|&id| id == 0 || id > block_count) {
            return Err(Error::LedgerParse {
                line: l,
                message: "consumed ids must be distinct block ids".into(),
            });
        }
        Ok(Self {
            manifest_ref,
            block_count,
            process_id,
            seed,
            draw_count,
            consumed,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Atomically replaces the ledger file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let tmp = path.with_extension("tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(self.to_text().as_bytes())
            .and_then(|_| f.sync_all())
            .map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }
}

/// Loads the ledger at `path` (or creates one with `init` when absent),
/// applies `f`, and saves the result, holding an exclusive lock on a sibling
/// `.lock` file throughout.
pub fn update_ledger_file<T>(
    path: impl AsRef<Path>,
    init: impl FnOnce() -> SamplingLedger,
    f: impl FnOnce(&mut SamplingLedger) -> Result<T>,
) -> Result<T> {
    let path = path.as_ref();
    let lock_path = path.with_extension("lock");
    let lock = fs::OpenOptions::new()
        .create(true)
        .truncate(false)
        .write(true)
        .open(&lock_path)
        .map_err(|e| Error::io(&lock_path, e))?;
    lock.lock().map_err(|e| Error::io(&lock_path, e))?;
    let mut ledger = if path.exists() { SamplingLedger::load(path)? } else { init() };
    let out = f(&mut ledger)?;
    ledger.save(path)?;
    Ok(out)
}
