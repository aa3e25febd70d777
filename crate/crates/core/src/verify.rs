//! Statistical verification of a partitioned dataset.
//!
//! Every block is compared with the full data (or a reference dataset):
//! per-feature KS distance against the 95% band, label proportions against a
//! binomial band, and optionally MMD² and Hotelling's T² between one sampled
//! block and a uniform random sample of the same size.

use rand::seq::index;

use crate::block_store::{validate_manifest, Dataset, Record, ValidationReport};
use crate::error::{Error, Result};
use crate::sampler::SamplingLedger;
use crate::seed::stream_rng;
use crate::stats::{self, Ecdf};

/// Rows used by the two-sample tests; larger blocks contribute their first rows.
pub const TWO_SAMPLE_MAX_ROWS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VerifyConfig {
    /// Fixed KS threshold; `None` uses `1.36·√(2/n)` for an `n`-record block.
    pub ks_threshold: Option<f64>,
    /// Fixed proportion threshold; `None` uses `5·√(p(1−p)/n)` per category.
    pub proportion_threshold: Option<f64>,
    pub two_sample: Option<TwoSampleConfig>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleConfig {
    /// T² fails when its p-value falls below this.
    pub alpha: f64,
    /// MMD² fails above this, when set.
    pub mmd_threshold: Option<f64>,
}

impl Default for TwoSampleConfig {
    fn default() -> Self {
        Self {
            alpha: 0.001,
            mmd_threshold: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsRow {
    /// `None` for the whole-dataset comparison against the reference.
    pub block_id: Option<u32>,
    pub feature: String,
    pub ks: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProportionRow {
    pub block_id: u32,
    pub category: u32,
    pub proportion: f64,
    pub global: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSampleRow {
    pub block_id: u32,
    pub rows: usize,
    pub mmd2: f64,
    pub bandwidth: f64,
    /// `None` when the pooled covariance was singular.
    pub t2: Option<stats::HotellingT2>,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub validation: ValidationReport,
    pub ks: Vec<KsRow>,
    pub proportions: Vec<ProportionRow>,
    pub two_sample: Option<TwoSampleRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.validation.is_ok()
            && self.ks.iter().all(|r| r.passed)
            && self.proportions.iter().all(|r| r.passed)
            && self.two_sample.as_ref().is_none_or(|t| t.passed)
    }

    pub fn max_ks(&self) -> f64 {
        self.ks.iter().filter(|r| r.block_id.is_some()).map(|r| r.ks).fold(0.0, f64::max)
    }

    pub fn max_proportion_deviation(&self) -> f64 {
        self.proportions
            .iter()
            .map(|r| (r.proportion - r.global).abs())
            .fold(0.0, f64::max)
    }
}

/// Compares every block of `ds` with the full data of `reference`, or of
/// `ds` itself when no reference is given.
pub fn verify(ds: &Dataset, reference: Option<&Dataset>, config: &VerifyConfig) -> Result<VerifyReport> {
    let validation = validate_manifest(ds);
    let mut report = VerifyReport {
        validation,
        ks: Vec::new(),
        proportions: Vec::new(),
        two_sample: None,
    };
    if report.validation.failures().any(|c| c.name.starts_with("block ")) {
        return Ok(report);
    }
    let full = reference.unwrap_or(ds);
    if full.schema() != ds.schema() {
        return Err(Error::InvalidParams("reference schema differs".into()));
    }
    let schema = ds.schema();
    let names = schema.feature_names();
    let m = schema.feature_count();

    let mut columns: Vec<Vec<f64>> = vec![Vec::with_capacity(full.total_records() as usize); m];
    let mut label_counts = schema.label_categories().map(|c| vec![0u64; c.len()]);
    for id in full.block_ids() {
        for r in full.read_block(id)? {
            for (col, v) in columns.iter_mut().zip(&r.features) {
                col.push(*v);
            }
            if let (Some(counts), Some(cats), Some(label)) = (&mut label_counts, schema.label_categories(), r.label) {
                if let Ok(i) = cats.binary_search(&label) {
                    counts[i] += 1;
                }
            }
        }
    }
    let full_ecdfs = columns.iter().map(|c| Ecdf::new(c)).collect::<Result<Vec<_>>>()?;
    let n_full = full.total_records() as f64;

    if let Some(reference) = reference {
        let own: Vec<Ecdf> = (0..m)
            .map(|f| ds.feature_column(f).and_then(|c| Ecdf::new(&c)))
            .collect::<Result<_>>()?;
        let n = ds.total_records().min(reference.total_records()) as usize;
        for f in 0..m {
            let ks = stats::ks_statistic(&own[f], &full_ecdfs[f]);
            let threshold = config.ks_threshold.unwrap_or_else(|| stats::ks_band(n));
            report.ks.push(KsRow {
                block_id: None,
                feature: names[f].clone(),
                ks,
                threshold,
                passed: ks <= threshold,
            });
        }
    }

    for id in ds.block_ids() {
        let records = ds.read_block(id)?;
        let n = records.len();
        for f in 0..m {
            let col: Vec<f64> = records.iter().map(|r| r.features[f]).collect();
            let ks = stats::ks_statistic(&Ecdf::new(&col)?, &full_ecdfs[f]);
            let threshold = config.ks_threshold.unwrap_or_else(|| stats::ks_band(n));
            report.ks.push(KsRow {
                block_id: Some(id),
                feature: names[f].clone(),
                ks,
                threshold,
                passed: ks <= threshold,
            });
        }
        if let (Some(cats), Some(counts)) = (schema.label_categories(), &label_counts) {
            let props = stats::category_proportions(&records, cats)?;
            for (i, &c) in cats.iter().enumerate() {
                let global = counts[i] as f64 / n_full;
                let threshold = config
                    .proportion_threshold
                    .unwrap_or_else(|| 5.0 * (global * (1.0 - global) / n as f64).sqrt());
                let proportion = props[&c];
                report.proportions.push(ProportionRow {
                    block_id: id,
                    category: c,
                    proportion,
                    global,
                    threshold,
                    passed: (proportion - global).abs() <= threshold,
                });
            }
        }
    }

    if let Some(ts) = &config.two_sample {
        report.two_sample = Some(two_sample(ds, full, ts, config.seed)?);
    }
    Ok(report)
}

fn two_sample(ds: &Dataset, full: &Dataset, config: &TwoSampleConfig, seed: u64) -> Result<TwoSampleRow> {
    let mut ledger = SamplingLedger::for_dataset(ds, seed, "verify");
    let block_id = ledger.sample_blocks(1)?[0];
    let mut block = ds.read_block(block_id)?;
    block.truncate(TWO_SAMPLE_MAX_ROWS);
    let rows = block.len();

    // Uniform sample of `rows` record positions, gathered block by block.
    let total = full.total_records() as usize;
    let mut rng = stream_rng(seed, "rsp/verify-sample", 0);
    let mut picks = index::sample(&mut rng, total, rows.min(total)).into_vec();
    picks.sort_unstable();
    let mut sample: Vec<Record> = Vec::with_capacity(picks.len());
    let mut offset = 0usize;
    let mut next = picks.iter().peekable();
    for meta in &full.manifest().blocks {
        let end = offset + meta.record_count as usize;
        if next.peek().is_some_and(|&&p| p < end) {
            let records = full.read_block(meta.block_id)?;
            while let Some(&&p) = next.peek().filter(|&&&p| p < end) {
                sample.push(records[p - offset].clone());
                next.next();
            }
        }
        offset = end;
    }

    let a: Vec<Vec<f64>> = block.into_iter().map(|r| r.features).collect();
    let b: Vec<Vec<f64>> = sample.into_iter().map(|r| r.features).collect();
    let bandwidth = stats::median_heuristic(&a, &b)?;
    let mmd2 = stats::mmd2_unbiased(&a, &b, bandwidth)?;
    let t2 = match stats::hotelling_t2(&a, &b) {
        Ok(t) => Some(t),
        Err(Error::SingularCovariance) | Err(Error::InvalidParams(_)) => None,
        Err(e) => return Err(e),
    };
    let passed = t2.is_some_and(|t| t.p_value >= config.alpha) && config.mmd_threshold.is_none_or(|th| mmd2 <= th);
    Ok(TwoSampleRow {
        block_id,
        rows,
        mmd2,
        bandwidth,
        t2,
        passed,
    })
}
