//! Two-stage random sample partitioning.
//!
//! Stage 1 shuffles each original block and cuts it into `K` slices. Stage 2
//! builds RSP block `k` by concatenating, for every original block `i`, the
//! slice `σᵢ(k)` where `σᵢ` is a uniform permutation of `1..=K`. Every RSP
//! block therefore takes exactly one slice from every original block, drawn
//! without replacement.
//!
//! When `N = P·K·δ` every slice holds `δ` records and every RSP block `P·δ`.
//! Otherwise sizes are balanced: slices of one original block differ by at
//! most one record and RSP blocks by at most `P`.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::block_store::{
    encode_records, write_block_bytes, write_manifest, Dataset, DatasetKind, Manifest, ManifestParams, Record,
};
use crate::error::{Error, Result};
use crate::seed::{derive_seed, stream_rng};

const SHUFFLE_DOMAIN: &str = "rsp/shuffle";
const ASSIGN_DOMAIN: &str = "rsp/assign";
const SCRATCH_DIR: &str = "scratch";

/// A uniformly random bijection on `0..len`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
    seed: u64,
}

impl Permutation {
    pub fn random(len: usize, seed: u64) -> Self {
        let mut mapping: Vec<usize> = (0..len).collect();
        mapping.shuffle(&mut stream_rng(seed, "permutation", len as u64));
        Self { mapping, seed }
    }

    /// Position `j` of the output takes element `mapping()[j]` of the input.
    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    pub fn apply<T>(&self, items: Vec<T>) -> Vec<T> {
        assert_eq!(items.len(), self.mapping.len(), "permutation length mismatch");
        let mut slots: Vec<Option<T>> = items.into_iter().map(Some).collect();
        self.mapping
            .iter()
            .map(|&i| slots[i].take().expect("mapping is a bijection"))
            .collect()
    }
}

/// Uniformly shuffles a block; deterministic in `seed`.
pub fn randomize_block<T>(block: Vec<T>, seed: u64) -> Result<Vec<T>> {
    if block.is_empty() {
        return Err(Error::Empty("block"));
    }
    Ok(Permutation::random(block.len(), seed).apply(block))
}

/// Sizes of `parts` consecutive pieces of `len` items that differ by at most
/// one, larger pieces first.
pub fn balanced_sizes(len: usize, parts: usize) -> Vec<usize> {
    let (base, extra) = (len / parts, len % parts);
    (0..parts).map(|j| base + usize::from(j < extra)).collect()
}

/// Cuts a block sequentially into `k` sub-blocks.
///
/// With `slice = Some(δ)` the block must hold exactly `k·δ` records and every
/// sub-block gets `δ`. With `None` the sizes follow [`balanced_sizes`] and the
/// block must hold at least `k` records.
pub fn slice_block<T>(block: Vec<T>, k: usize, slice: Option<usize>) -> Result<Vec<Vec<T>>> {
    if k == 0 {
        return Err(Error::InvalidParams("K must be at least 1".into()));
    }
    let sizes = match slice {
        Some(0) => return Err(Error::InvalidParams("delta must be at least 1".into())),
        Some(delta) => {
            if k * delta != block.len() {
                return Err(Error::InvalidParams(format!(
                    "K*delta = {} does not match block length {}",
                    k * delta,
                    block.len()
                )));
            }
            vec![delta; k]
        }
        None => {
            if block.len() < k {
                return Err(Error::InvalidParams(format!(
                    "block of {} records cannot be cut into {k} non-empty slices",
                    block.len()
                )));
            }
            balanced_sizes(block.len(), k)
        }
    };
    let mut rest = block.into_iter();
    Ok(sizes.into_iter().map(|s| rest.by_ref().take(s).collect()).collect())
}

/// Applies one uniform permutation to the whole dataset and cuts it into `k`
/// consecutive blocks of `delta` records.
pub fn lemma1_partition<T>(dataset: Vec<T>, k: usize, delta: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if k == 0 || delta == 0 {
        return Err(Error::InvalidParams("K and delta must be at least 1".into()));
    }
    if dataset.len() != k * delta {
        return Err(Error::InvalidParams(format!(
            "dataset has {} records, expected K*delta = {}",
            dataset.len(),
            k * delta
        )));
    }
    let shuffled = Permutation::random(dataset.len(), seed).apply(dataset);
    slice_block(shuffled, k, Some(delta))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionParams {
    /// P, the number of original blocks. The source is re-chunked when its
    /// block count differs.
    pub orig_blocks: usize,
    /// K, the number of RSP blocks.
    pub rsp_blocks: usize,
    /// δ under the even-slice policy; `None` selects balanced slicing.
    pub slice: Option<usize>,
    pub seed: u64,
}

impl PartitionParams {
    pub fn even(orig_blocks: usize, rsp_blocks: usize, slice: usize, seed: u64) -> Self {
        Self {
            orig_blocks,
            rsp_blocks,
            slice: Some(slice),
            seed,
        }
    }

    pub fn balanced(orig_blocks: usize, rsp_blocks: usize, seed: u64) -> Self {
        Self {
            orig_blocks,
            rsp_blocks,
            slice: None,
            seed,
        }
    }

    /// Records per RSP block under even slicing (`P·δ`).
    pub fn block_records(&self) -> Option<usize> {
        self.slice.map(|d| d * self.orig_blocks)
    }

    pub fn shuffle_seed(&self, orig_block: usize) -> u64 {
        derive_seed(self.seed, SHUFFLE_DOMAIN, orig_block as u64)
    }

    pub fn assignment(&self, orig_block: usize) -> Permutation {
        Permutation::random(self.rsp_blocks, derive_seed(self.seed, ASSIGN_DOMAIN, orig_block as u64))
    }
}

#[derive(Debug, Clone, Default)]
pub struct PartitionOptions {
    /// Keep the `orig<i>_slice<j>.bin` files after assembly.
    pub keep_intermediate: bool,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

fn slice_file(scratch: &Path, orig: usize, slice: usize) -> PathBuf {
    scratch.join(format!("orig{orig}_slice{slice}.bin"))
}

/// Converts an original dataset into an RSP dataset written to `out_dir`.
pub fn two_stage_partition(
    source: &Dataset,
    params: &PartitionParams,
    out_dir: impl AsRef<Path>,
    options: &PartitionOptions,
) -> Result<Dataset> {
    let out_dir = out_dir.as_ref();
    if source.kind() != DatasetKind::Original {
        return Err(Error::InvalidParams("source must be an original dataset".into()));
    }
    let (p, k) = (params.orig_blocks, params.rsp_blocks);
    if p == 0 || k == 0 {
        return Err(Error::InvalidParams("P and K must be at least 1".into()));
    }
    let total = source.total_records() as usize;

    // Original block boundaries, re-chunking the source when its block count
    // is not P.
    let lengths: Vec<usize> = if source.block_count() == p {
        source.manifest().blocks.iter().map(|b| b.record_count as usize).collect()
    } else {
        if total < p {
            return Err(Error::InvalidParams(format!("cannot cut {total} records into P={p} blocks")));
        }
        balanced_sizes(total, p)
    };
    match params.slice {
        Some(0) => return Err(Error::InvalidParams("delta must be at least 1".into())),
        Some(delta) => {
            if total != p * k * delta {
                return Err(Error::InvalidParams(format!(
                    "N = {total} is not P*K*delta = {}",
                    p * k * delta
                )));
            }
            if let Some(len) = lengths.iter().find(|&&l| l != k * delta) {
                return Err(Error::InvalidParams(format!(
                    "original block of {len} records, even slicing needs K*delta = {}",
                    k * delta
                )));
            }
        }
        None => {
            if let Some(len) = lengths.iter().find(|&&l| l < k) {
                return Err(Error::InvalidParams(format!(
                    "original block of {len} records is smaller than K={k}"
                )));
            }
        }
    }

    let scratch = out_dir.join(SCRATCH_DIR);
    fs::create_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
    let rechunked = source.block_count() != p;
    let starts: Vec<usize> = lengths
        .iter()
        .scan(0, |acc, &l| {
            let s = *acc;
            *acc += l;
            Some(s)
        })
        .collect();
    let schema = source.schema().clone();

    let manifest = crate::with_workers(options.workers, || -> Result<Manifest> {
        // Stage 1: randomize and slice every original block.
        let assignments: Vec<Permutation> = (1..=p)
            .into_par_iter()
            .map(|i| -> Result<Permutation> {
                let records = if rechunked {
                    let s = starts[i - 1] as u64;
                    source.read_range(s, s + lengths[i - 1] as u64)?
                } else {
                    source.read_block(i as u32)?
                };
                let shuffled = randomize_block(records, params.shuffle_seed(i))?;
                for (j, sub) in slice_block(shuffled, k, params.slice)?.into_iter().enumerate() {
                    let bytes = encode_records(&schema, &sub, 0)?;
                    let path = slice_file(&scratch, i, j + 1);
                    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
                }
                Ok(params.assignment(i))
            })
            .collect::<Result<_>>()?;

        // Stage 2: RSP block k takes slice σᵢ(k) of every original block i.
        let blocks = (1..=k)
            .into_par_iter()
            .map(|kk| {
                let mut bytes = Vec::new();
                for (i, sigma) in assignments.iter().enumerate() {
                    let path = slice_file(&scratch, i + 1, sigma.mapping()[kk - 1] + 1);
                    bytes.extend(fs::read(&path).map_err(|e| Error::io(&path, e))?);
                }
                write_block_bytes(out_dir, kk as u32, &schema, &bytes)
            })
            .collect::<Result<Vec<_>>>()?;

        let source_path = source.manifest_path();
        let source_path = fs::canonicalize(&source_path).unwrap_or(source_path);
        Ok(Manifest {
            kind: DatasetKind::Rsp,
            schema: schema.clone(),
            total_records: total as u64,
            params: ManifestParams {
                orig_blocks: Some(p),
                rsp_blocks: Some(k),
                block_records: Some(params.block_records().unwrap_or(total / k)),
                slice: Some(params.slice.unwrap_or(total / (p * k))),
                seed: Some(params.seed),
            },
            source: Some(source_path),
            blocks,
        })
    })??;

    if !options.keep_intermediate {
        fs::remove_dir_all(&scratch).map_err(|e| Error::io(&scratch, e))?;
    }
    write_manifest(out_dir, &manifest)?;
    Ok(Dataset::from_parts(out_dir.to_path_buf(), manifest))
}

/// Sequential chunking without randomization: the baseline an RSP is compared
/// against. Returns the records of each of `p` consecutive blocks.
pub fn sequential_chunks(records: Vec<Record>, p: usize) -> Result<Vec<Vec<Record>>> {
    slice_block(records, p, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    #[test]
    fn permutation_is_bijection() {
        for len in [0, 1, 2, 17, 100] {
            let p = Permutation::random(len, 3);
            let mut seen = p.mapping().to_vec();
            seen.sort_unstable();
            assert_eq!(seen, (0..len).collect::<Vec<_>>());
        }
    }

    #[test]
    fn single_record_block_is_unchanged() {
        assert_eq!(randomize_block(vec!["r"], 5).unwrap(), vec!["r"]);
    }

    #[test]
    fn randomize_is_deterministic() {
        let block: Vec<u32> = (0..50).collect();
        assert_eq!(
            randomize_block(block.clone(), 11).unwrap(),
            randomize_block(block.clone(), 11).unwrap()
        );
        assert_ne!(randomize_block(block.clone(), 11).unwrap(), randomize_block(block, 12).unwrap());
    }

    #[test]
    fn empty_block_is_an_error() {
        assert!(matches!(randomize_block(Vec::<u8>::new(), 1), Err(Error::Empty(_))));
    }

    /// Chi-square over all 24 orderings of four items, 100,000 seeds.
    #[test]
    fn four_item_shuffle_is_uniform() {
        let runs = 100_000u64;
        let mut counts: HashMap<Vec<u8>, u64> = HashMap::new();
        for seed in 0..runs {
            *counts.entry(randomize_block(vec![1u8, 2, 3, 4], seed).unwrap()).or_default() += 1;
        }
        assert_eq!(counts.len(), 24);
        let expected = runs as f64 / 24.0;
        let chi2: f64 = counts
            .values()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 99th percentile of chi-square with 23 degrees of freedom.
        assert!(chi2 < 41.638, "chi2 = {chi2}");
    }

    #[test]
    fn even_slices_are_definitional() {
        let subs = slice_block(vec![1, 2, 3, 4, 5, 6], 3, Some(2)).unwrap();
        assert_eq!(subs, vec![vec![1, 2], vec![3, 4], vec![5, 6]]);
        assert_eq!(slice_block(vec![1, 2, 3], 1, Some(3)).unwrap(), vec![vec![1, 2, 3]]);
        assert_eq!(slice_block(vec![1, 2, 3], 1, None).unwrap(), vec![vec![1, 2, 3]]);
    }

    #[test]
    fn even_slice_length_mismatch() {
        assert!(slice_block(vec![1, 2, 3, 4, 5], 3, Some(2)).is_err());
        assert!(slice_block(vec![1, 2, 3, 4, 5, 6, 7], 3, Some(2)).is_err());
        assert!(slice_block(vec![1, 2], 3, None).is_err());
    }

    #[test]
    fn balanced_remainder_sizes() {
        let subs = slice_block((1..=7).collect::<Vec<_>>(), 3, None).unwrap();
        assert_eq!(subs, vec![vec![1, 2, 3], vec![4, 5], vec![6, 7]]);
        // Exhaustive: sizes differ by at most one and sum to the length.
        for len in 1..60 {
            for k in 1..=len {
                let sizes = balanced_sizes(len, k);
                assert_eq!(sizes.iter().sum::<usize>(), len);
                let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
                assert!(hi - lo <= 1);
                assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
            }
        }
    }

    #[test]
    fn lemma1_single_block_is_a_shuffle() {
        let blocks = lemma1_partition((0..10).collect::<Vec<u32>>(), 1, 10, 4).unwrap();
        assert_eq!(blocks.len(), 1);
        let mut b = blocks[0].clone();
        b.sort_unstable();
        assert_eq!(b, (0..10).collect::<Vec<_>>());
        assert!(lemma1_partition(vec![1, 2, 3], 2, 2, 0).is_err());
    }

    #[test]
    fn assignments_are_per_block_permutations() {
        let params = PartitionParams::even(5, 7, 1, 42);
        for i in 1..=5 {
            let a = params.assignment(i);
            assert_eq!(a.len(), 7);
            assert_eq!(a, params.assignment(i));
        }
        assert_ne!(params.assignment(1), params.assignment(2));
    }
}
