//! Asymptotic ensemble learning over RSP blocks.
//!
//! Blocks are drawn `g` at a time from a [`SamplingLedger`]; one base model is
//! trained per block, the models are appended to the ensemble, and the
//! majority-vote ensemble is scored on a fixed test set. The loop stops when a
//! batch improves accuracy by less than the threshold or the blocks run out.

pub mod io;
mod tree;

use std::time::Instant;

use rayon::prelude::*;

pub use tree::{DecisionTree, Node, TreeParams};

use crate::block_store::{Dataset, DatasetKind, Record, Schema};
use crate::error::{Error, Result};
use crate::sampler::SamplingLedger;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    DecisionTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LearnerConfig {
    pub algorithm: Algorithm,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Unused by the deterministic tree learner; kept for learners that
    /// randomize.
    pub seed: u64,
}

impl LearnerConfig {
    pub fn tree(max_depth: usize, min_leaf: usize) -> Self {
        Self {
            algorithm: Algorithm::DecisionTree,
            max_depth,
            min_leaf,
            seed: 0,
        }
    }

    fn check(&self) -> Result<()> {
        if self.max_depth == 0 || self.min_leaf == 0 {
            return Err(Error::InvalidParams("max_depth and min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaseModel {
    pub tree: DecisionTree,
    pub source_block_id: u32,
    pub train_accuracy: f64,
}

impl BaseModel {
    pub fn predict(&self, record: &Record) -> u32 {
        self.tree.predict(&record.features)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatchResult {
    /// 1-based.
    pub batch: usize,
    pub blocks_used: usize,
    pub records_used: u64,
    pub percent_data: f64,
    pub accuracy: f64,
    /// Wall time to train and evaluate this batch.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub(crate) classes: Vec<u32>,
    pub members: Vec<BaseModel>,
    pub trajectory: Vec<BatchResult>,
    pub batches_completed: usize,
}

fn classes_of(schema: &Schema) -> Result<Vec<u32>> {
    schema.label_categories().map(<[u32]>::to_vec).ok_or(Error::Unlabeled)
}

/// Trains one base model on a block. Blocks that are too small to split or
/// hold a single class yield a root-only model.
pub fn train_base(records: &[Record], schema: &Schema, config: &LearnerConfig, source_block_id: u32) -> Result<BaseModel> {
    config.check()?;
    let classes = classes_of(schema)?;
    if records.is_empty() {
        return Err(Error::Empty("training block"));
    }
    for (i, r) in records.iter().enumerate() {
        schema.check(r).map_err(|reason| Error::SchemaViolation {
            index: i as u64,
            reason,
        })?;
    }
    let tree = match config.algorithm {
        Algorithm::DecisionTree => DecisionTree::fit(
            records,
            &classes,
            TreeParams {
                max_depth: config.max_depth,
                min_leaf: config.min_leaf,
            },
        ),
    };
    let correct = records
        .iter()
        .filter(|r| Some(tree.predict(&r.features)) == r.label)
        .count();
    Ok(BaseModel {
        tree,
        source_block_id,
        train_accuracy: correct as f64 / records.len() as f64,
    })
}

impl Ensemble {
    pub fn new(schema: &Schema) -> Result<Self> {
        Ok(Self {
            classes: classes_of(schema)?,
            members: Vec::new(),
            trajectory: Vec::new(),
            batches_completed: 0,
        })
    }

    pub fn from_members(schema: &Schema, members: Vec<BaseModel>) -> Result<Self> {
        let mut e = Self::new(schema)?;
        e.members = members;
        Ok(e)
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Unweighted majority vote; ties go to the smallest class code.
    pub fn predict(&self, record: &Record) -> Result<u32> {
        if self.members.is_empty() {
            return Err(Error::Empty("ensemble"));
        }
        let mut votes = vec![0u64; self.classes.len()];
        for m in &self.members {
            votes[m.tree.predict_index(&record.features)] += 1;
        }
        Ok(self.classes[tree::argmax_first(&votes)])
    }

    /// Fraction of test records whose label the majority vote predicts.
    pub fn evaluate(&self, test: &[Record]) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::Empty("test set"));
        }
        let mut correct = 0usize;
        for r in test {
            let label = r.label.ok_or(Error::Unlabeled)?;
            correct += usize::from(self.predict(r)? == label);
        }
        Ok(correct as f64 / test.len() as f64)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        io::save(self, path)
    }

    pub fn load(path: impl AsRef<std::path::Path>, schema: &Schema) -> Result<Self> {
        let e = io::load(path, schema.feature_count())?;
        if schema.label_categories() != Some(e.classes.as_slice()) {
            return Err(Error::ModelFormat("model classes do not match the schema".into()));
        }
        Ok(e)
    }
}

/// Running per-record vote counts, so each batch only scores its new members.
struct VoteTally {
    votes: Vec<Vec<u32>>,
}

impl VoteTally {
    fn new(test: &[Record], n_classes: usize) -> Self {
        Self {
            votes: vec![vec![0; n_classes]; test.len()],
        }
    }

    fn add(&mut self, test: &[Record], models: &[BaseModel]) {
        self.votes.par_iter_mut().zip(test).for_each(|(v, r)| {
            for m in models {
                v[m.tree.predict_index(&r.features)] += 1;
            }
        });
    }

    fn accuracy(&self, test: &[Record], classes: &[u32]) -> f64 {
        let correct = self
            .votes
            .iter()
            .zip(test)
            .filter(|(v, r)| r.label == Some(classes[tree::argmax_first(v)]))
            .count();
        correct as f64 / test.len() as f64
    }
}

/// Runs batches of `g` blocks until accuracy improves by less than
/// `threshold` over the previous batch (the empty ensemble counts as 0), or
/// the ledger has no blocks left. The final batch may be short.
pub fn run_asymptotic(
    ds: &Dataset,
    ledger: &mut SamplingLedger,
    config: &LearnerConfig,
    g: usize,
    threshold: f64,
    test: &[Record],
) -> Result<Ensemble> {
    config.check()?;
    if ds.kind() != DatasetKind::Rsp {
        return Err(Error::InvalidParams("asymptotic ensembles need an RSP dataset".into()));
    }
    if g == 0 {
        return Err(Error::InvalidParams("batch size g must be at least 1".into()));
    }
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if test.iter().any(|r| r.label.is_none()) {
        return Err(Error::Unlabeled);
    }
    ledger.check_dataset(ds)?;

    let mut ensemble = Ensemble::new(ds.schema())?;
    let mut tally = VoteTally::new(test, ensemble.classes.len());
    let total = ds.total_records();
    let mut records_used = 0u64;
    let mut previous = 0.0;
    while ledger.remaining() > 0 {
        let started = Instant::now();
        let ids = ledger.sample_blocks(g.min(ledger.remaining()))?;
        let models: Vec<BaseModel> = ids
            .par_iter()
            .map(|&id| train_base(&ds.read_block(id)?, ds.schema(), config, id))
            .collect::<Result<_>>()?;
        records_used += ids
            .iter()
            .map(|&id| ds.block_meta(id).map(|b| b.record_count))
            .sum::<Result<u64>>()?;
        tally.add(test, &models);
        ensemble.members.extend(models);
        ensemble.batches_completed += 1;
        let accuracy = tally.accuracy(test, &ensemble.classes);
        ensemble.trajectory.push(BatchResult {
            batch: ensemble.batches_completed,
            blocks_used: ensemble.members.len(),
            records_used,
            percent_data: 100.0 * records_used as f64 / total as f64,
            accuracy,
            seconds: started.elapsed().as_secs_f64(),
        });
        if accuracy - previous < threshold {
            break;
        }
        previous = accuracy;
    }
    Ok(ensemble)
}
