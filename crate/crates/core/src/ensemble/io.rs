//! Versioned little-endian binary format for ensembles.
//!
//! ```text
//! magic "RSPENSBL" | version u32 | class_count u32 | class codes u32...
//! member_count u32 | members... | batches_completed u32
//! trajectory_len u32 | (batch u32, blocks_used u32, records_used u64,
//!                       percent_data f64, accuracy f64, seconds f64)...
//! member: source_block_id u32 | train_accuracy f64 | node_count u32 | nodes...
//! node:   0u8 counts[u64; class_count]
//!       | 1u8 feature u32 threshold f64 left u32 right u32
//! ```

use std::fs;
use std::path::Path;

use super::tree::{DecisionTree, Node};
use super::{BaseModel, BatchResult, Ensemble};
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"RSPENSBL";
pub const FORMAT_VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let out = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        self.pos = end;
        Ok(out.try_into().expect("slice of length N"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    /// Guards allocation sizes taken from the file.
    fn count(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.u32()?;
        if n.saturating_mul(min_item_bytes) > self.bytes.len() - self.pos {
            return Err(Error::ModelFormat(format!("count {n} exceeds remaining bytes")));
        }
        Ok(n)
    }
}

pub fn encode(ensemble: &Ensemble) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.u32(FORMAT_VERSION as usize);
    w.u32(ensemble.classes.len());
    for &c in &ensemble.classes {
        w.u32(c as usize);
    }
    w.u32(ensemble.members.len());
    for m in &ensemble.members {
        w.u32(m.source_block_id as usize);
        w.f64(m.train_accuracy);
        w.u32(m.tree.nodes.len());
        for node in &m.tree.nodes {
            match node {
                Node::Leaf { counts } => {
                    w.u8(0);
                    counts.iter().for_each(|&c| w.u64(c));
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    w.u8(1);
                    w.u32(*feature);
                    w.f64(*threshold);
                    w.u32(*left);
                    w.u32(*right);
                }
            }
        }
    }
    w.u32(ensemble.batches_completed);
    w.u32(ensemble.trajectory.len());
    for b in &ensemble.trajectory {
        w.u32(b.batch);
        w.u32(b.blocks_used);
        w.u64(b.records_used);
        w.f64(b.percent_data);
        w.f64(b.accuracy);
        w.f64(b.seconds);
    }
    w.0
}

pub fn decode(bytes: &[u8], n_features: usize) -> Result<Ensemble> {
    if bytes.get(..8) != Some(MAGIC.as_slice()) {
        return Err(Error::ModelFormat("bad magic".into()));
    }
    let mut r = Reader { bytes, pos: 8 };
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported version {version}")));
    }
    let n_classes = r.count(4)?;
    let classes = (0..n_classes).map(|_| r.u32().map(|c| c as u32)).collect::<Result<Vec<_>>>()?;
    if n_classes == 0 || classes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::ModelFormat("class codes must be ascending and non-empty".into()));
    }
    let n_members = r.count(16)?;
    let mut members = Vec::with_capacity(n_members);
    for _ in 0..n_members {
        let source_block_id = r.u32()? as u32;
        let train_accuracy = r.f64()?;
        let n_nodes = r.count(1)?;
        let mut nodes = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            nodes.push(match r.u8()? {
                0 => Node::Leaf {
                    counts: (0..n_classes).map(|_| r.u64()).collect::<Result<_>>()?,
                },
                1 => Node::Split {
                    feature: r.u32()?,
                    threshold: r.f64()?,
                    left: r.u32()?,
                    right: r.u32()?,
                },
                tag => return Err(Error::ModelFormat(format!("unknown node tag {tag}"))),
            });
        }
        let tree = DecisionTree {
            classes: classes.clone(),
            nodes,
        };
        if !tree.is_well_formed(n_features) {
            return Err(Error::ModelFormat(format!("malformed tree for block {source_block_id}")));
        }
        members.push(BaseModel {
            tree,
            source_block_id,
            train_accuracy,
        });
    }
    let batches_completed = r.u32()?;
    let n_batches = r.count(40)?;
    let trajectory = (0..n_batches)
        .map(|_| {
            Ok(BatchResult {
                batch: r.u32()?,
                blocks_used: r.u32()?,
                records_used: r.u64()?,
                percent_data: r.f64()?,
                accuracy: r.f64()?,
                seconds: r.f64()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat("trailing bytes".into()));
    }
    Ok(Ensemble {
        classes,
        members,
        trajectory,
        batches_completed,
    })
}

pub fn save(ensemble: &Ensemble, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(ensemble)).map_err(|e| Error::io(path, e))
}

pub fn load(path: impl AsRef<Path>, n_features: usize) -> Result<Ensemble> {
    let path = path.as_ref();
    decode(&fs::read(path).map_err(|e| Error::io(path, e))?, n_features)
}
