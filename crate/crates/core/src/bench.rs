//! Partition-time scaling benchmark.

use std::fs;
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::partitioner::{two_stage_partition, PartitionOptions, PartitionParams};
use crate::synth::{Generator, SynthSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Dataset sizes, strictly ascending.
    pub sizes: Vec<u64>,
    pub features: usize,
    pub classes: u32,
    /// Records per original block; the number of RSP blocks equals the
    /// number of original blocks.
    pub block_records: usize,
    /// Timed partitions per size; the median is reported.
    pub repeats: usize,
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![100_000, 200_000, 400_000, 800_000],
            features: 10,
            classes: 2,
            block_records: 100_000,
            repeats: 3,
            seed: 1,
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub records: u64,
    pub orig_blocks: usize,
    pub rsp_blocks: usize,
    pub seconds: f64,
    /// Digest of the RSP manifest; identical across repeats.
    pub manifest_digest: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// Least-squares fit of seconds against records; `None` for fewer than
    /// two sizes.
    pub fit: Option<LinearFit>,
}

/// Ordinary least squares of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
    })
}

/// Generates a dataset per size under `work_dir`, times its two-stage
/// partition, and fits a line through the timings. Work directories are
/// removed afterwards.
pub fn run_bench(work_dir: impl AsRef<Path>, config: &BenchConfig) -> Result<BenchReport> {
    let work_dir = work_dir.as_ref();
    if config.sizes.is_empty() || config.sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidParams("sizes must be non-empty and strictly ascending".into()));
    }
    if config.block_records == 0 || config.repeats == 0 {
        return Err(Error::InvalidParams("block_records and repeats must be at least 1".into()));
    }
    let mut rows = Vec::with_capacity(config.sizes.len());
    for &n in &config.sizes {
        let dir = work_dir.join(format!("n{n}"));
        let spec = SynthSpec::new(n, config.features, config.classes, Generator::GaussianMixture, config.seed);
        let source = spec.write(dir.join("original"), config.block_records)?;
        let p = source.block_count();
        let params = if (n as usize).is_multiple_of(p * p) {
            PartitionParams::even(p, p, n as usize / (p * p), config.seed)
        } else {
            PartitionParams::balanced(p, p, config.seed)
        };
        let options = PartitionOptions {
            keep_intermediate: false,
            workers: config.workers,
        };
        let mut times = Vec::with_capacity(config.repeats);
        let mut digest: Option<String> = None;
        for rep in 0..config.repeats {
            let out = dir.join(format!("rsp{rep}"));
            let started = Instant::now();
            let rsp = two_stage_partition(&source, &params, &out, &options)?;
            times.push(started.elapsed().as_secs_f64());
            let d = rsp.manifest().digest();
            if digest.as_ref().is_some_and(|prev| *prev != d) {
                return Err(Error::InvalidParams(format!("partition of {n} records is not reproducible")));
            }
            digest = Some(d);
            fs::remove_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        }
        fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        times.sort_by(f64::total_cmp);
        rows.push(BenchRow {
            records: n,
            orig_blocks: p,
            rsp_blocks: p,
            seconds: times[times.len() / 2],
            manifest_digest: digest.unwrap_or_default(),
        });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.records as f64).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.seconds).collect();
    Ok(BenchReport {
        fit: linear_fit(&x, &y),
        rows,
    })
}
