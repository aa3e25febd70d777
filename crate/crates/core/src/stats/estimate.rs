use rayon::prelude::*;

use super::{compensated_sum, mean, sample_stddev};
use crate::block_store::{Dataset, Record};
use crate::error::{Error, Result};
use crate::sampler::SamplingLedger;
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatKind {
    Mean,
    StdDev,
    CategoryProportion,
}

impl StatKind {
    pub fn name(self) -> &'static str {
        match self {
            StatKind::Mean => "mean",
            StatKind::StdDev => "stddev",
            StatKind::CategoryProportion => "category_proportion",
        }
    }
}

/// A quantity estimated block by block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Estimand {
    Mean(usize),
    StdDev(usize),
    /// Share of records carrying this label code.
    Proportion(u32),
}

impl Estimand {
    pub fn kind(self) -> StatKind {
        match self {
            Estimand::Mean(_) => StatKind::Mean,
            Estimand::StdDev(_) => StatKind::StdDev,
            Estimand::Proportion(_) => StatKind::CategoryProportion,
        }
    }

    fn target_name(self, ds: &Dataset) -> String {
        match self {
            Estimand::Mean(f) | Estimand::StdDev(f) => ds.schema().feature_names()[f].clone(),
            Estimand::Proportion(c) => format!("label={c}"),
        }
    }

    fn check(self, ds: &Dataset) -> Result<()> {
        match self {
            Estimand::Mean(f) | Estimand::StdDev(f) if f >= ds.schema().feature_count() => {
                Err(Error::UnknownFeature(f.to_string()))
            }
            Estimand::Proportion(c) => match ds.schema().label_categories() {
                None => Err(Error::Unlabeled),
                Some(cats) if !cats.contains(&c) => Err(Error::UndeclaredCategory(c)),
                Some(_) => Ok(()),
            },
            _ => Ok(()),
        }
    }
}

/// Count, mean and sample standard deviation of one block's values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSummary {
    pub count: u64,
    pub mean: f64,
    pub stddev: f64,
}

impl BlockSummary {
    pub fn of(values: &[f64]) -> Result<Self> {
        Ok(Self {
            count: values.len() as u64,
            mean: mean(values)?,
            stddev: if values.len() > 1 { sample_stddev(values)? } else { 0.0 },
        })
    }

    /// Mean and sample standard deviation of the union of the summarized
    /// blocks, recovered exactly from the per-block moments.
    pub fn pooled(blocks: &[BlockSummary]) -> Result<(f64, f64)> {
        let n: u64 = blocks.iter().map(|b| b.count).sum();
        if n < 2 {
            return Err(Error::InvalidParams("pooling needs at least 2 records".into()));
        }
        let m = compensated_sum(blocks.iter().map(|b| b.count as f64 * b.mean)) / n as f64;
        let ss = compensated_sum(blocks.iter().map(|b| {
            let c = b.count as f64;
            (c - 1.0) * b.stddev * b.stddev + c * (b.mean - m) * (b.mean - m)
        }));
        Ok((m, (ss / (n - 1) as f64).sqrt()))
    }
}

fn check_batch(len: usize, g: usize) -> Result<()> {
    if len == 0 {
        return Err(Error::Empty("per-block values"));
    }
    if g == 0 {
        return Err(Error::InvalidParams("batch size g must be at least 1".into()));
    }
    Ok(())
}

/// Cumulative unweighted average after each batch of `g` blocks; the last
/// batch may be short.
pub fn combine_estimates(per_block: &[f64], g: usize) -> Result<Vec<f64>> {
    combine_estimates_weighted(per_block, &vec![1.0; per_block.len()], g)
}

/// Like [`combine_estimates`] but weighting each block, typically by its
/// record count.
pub fn combine_estimates_weighted(per_block: &[f64], weights: &[f64], g: usize) -> Result<Vec<f64>> {
    check_batch(per_block.len(), g)?;
    if weights.len() != per_block.len() {
        return Err(Error::DimensionMismatch("one weight per block".into()));
    }
    let mut out = Vec::with_capacity(per_block.len().div_ceil(g));
    let mut end = 0;
    while end < per_block.len() {
        end = (end + g).min(per_block.len());
        let num = compensated_sum(per_block[..end].iter().zip(&weights[..end]).map(|(v, w)| v * w));
        let den = compensated_sum(weights[..end].iter().copied());
        out.push(num / den);
    }
    Ok(out)
}

/// Combined estimate after each batch, averaged over independent runs.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateCurve {
    pub statistic: StatKind,
    pub feature: String,
    pub blocks_used: Vec<usize>,
    pub batch_values: Vec<f64>,
    /// Mean over runs of `|batch value − reference|`.
    pub mean_abs_error: Vec<f64>,
    pub reference: f64,
    pub runs: usize,
}

impl EstimateCurve {
    /// Single-run curve from per-block values in sampling order.
    pub fn from_block_values(
        statistic: StatKind,
        feature: impl Into<String>,
        per_block: &[f64],
        g: usize,
        reference: f64,
    ) -> Result<Self> {
        let batch_values = combine_estimates(per_block, g)?;
        let n = per_block.len();
        Ok(Self {
            statistic,
            feature: feature.into(),
            blocks_used: (1..=batch_values.len()).map(|t| (t * g).min(n)).collect(),
            mean_abs_error: batch_values.iter().map(|v| (v - reference).abs()).collect(),
            batch_values,
            reference,
            runs: 1,
        })
    }
}

fn estimand_on_block(e: Estimand, records: &[Record], summaries: &[Option<BlockSummary>]) -> Result<f64> {
    match e {
        Estimand::Mean(f) => summaries[f].map(|s| s.mean).ok_or(Error::Empty("block")),
        Estimand::StdDev(f) => {
            if records.len() < 2 {
                return Err(Error::InvalidParams("standard deviation needs at least 2 records".into()));
            }
            summaries[f].map(|s| s.stddev).ok_or(Error::Empty("block"))
        }
        Estimand::Proportion(c) => {
            let hits = records.iter().filter(|r| r.label == Some(c)).count();
            Ok(hits as f64 / records.len() as f64)
        }
    }
}

/// Estimates each quantity from blocks drawn `g` at a time until the dataset
/// is exhausted, for `runs` independent sampling ledgers, and averages the
/// resulting curves. The reference is the full-data value.
pub fn estimate_curves(
    ds: &Dataset,
    estimands: &[Estimand],
    g: usize,
    runs: usize,
    seed: u64,
) -> Result<Vec<EstimateCurve>> {
    check_batch(ds.block_count(), g)?;
    if runs == 0 {
        return Err(Error::InvalidParams("runs must be at least 1".into()));
    }
    for &e in estimands {
        e.check(ds)?;
    }
    let m = ds.schema().feature_count();
    let ids: Vec<u32> = ds.block_ids().collect();

    // Per block: per-feature summaries, record count, and every estimand.
    let per_block: Vec<(Vec<Option<BlockSummary>>, Vec<f64>)> = ids
        .par_iter()
        .map(|&id| -> Result<_> {
            let records = ds.read_block(id)?;
            let summaries = (0..m)
                .map(|f| {
                    let v: Vec<f64> = records.iter().map(|r| r.features[f]).collect();
                    BlockSummary::of(&v).ok()
                })
                .collect::<Vec<_>>();
            let values = estimands
                .iter()
                .map(|&e| estimand_on_block(e, &records, &summaries))
                .collect::<Result<Vec<_>>>()?;
            Ok((summaries, values))
        })
        .collect::<Result<_>>()?;

    let counts: Vec<f64> = ds.manifest().blocks.iter().map(|b| b.record_count as f64).collect();
    let references = estimands
        .iter()
        .enumerate()
        .map(|(ei, &e)| -> Result<f64> {
            match e {
                Estimand::Mean(f) | Estimand::StdDev(f) => {
                    let s: Vec<BlockSummary> = per_block.iter().filter_map(|(s, _)| s[f]).collect();
                    let (mean, sd) = BlockSummary::pooled(&s)?;
                    Ok(if matches!(e, Estimand::Mean(_)) { mean } else { sd })
                }
                Estimand::Proportion(_) => {
                    let hits = compensated_sum(per_block.iter().zip(&counts).map(|((_, v), c)| v[ei] * c));
                    Ok(hits / compensated_sum(counts.iter().copied()))
                }
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let batches = ids.len().div_ceil(g);
    let mut value_sums = vec![vec![0.0; batches]; estimands.len()];
    let mut error_sums = vec![vec![0.0; batches]; estimands.len()];
    let digest = ds.manifest().digest();
    for run in 0..runs {
        let mut ledger = SamplingLedger::new(
            digest.clone(),
            ids.len() as u32,
            derive_seed(seed, "rsp/estimate", run as u64),
            format!("estimate-{run}"),
        );
        let mut order = Vec::with_capacity(ids.len());
        while ledger.remaining() > 0 {
            order.extend(ledger.sample_blocks(g.min(ledger.remaining()))?);
        }
        for (ei, reference) in references.iter().enumerate() {
            let values: Vec<f64> = order.iter().map(|&id| per_block[id as usize - 1].1[ei]).collect();
            for (t, v) in combine_estimates(&values, g)?.into_iter().enumerate() {
                value_sums[ei][t] += v;
                error_sums[ei][t] += (v - reference).abs();
            }
        }
    }

    Ok(estimands
        .iter()
        .enumerate()
        .map(|(ei, &e)| EstimateCurve {
            statistic: e.kind(),
            feature: e.target_name(ds),
            blocks_used: (1..=batches).map(|t| (t * g).min(ids.len())).collect(),
            batch_values: value_sums[ei].iter().map(|s| s / runs as f64).collect(),
            mean_abs_error: error_sums[ei].iter().map(|s| s / runs as f64).collect(),
            reference: references[ei],
            runs,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn running_average() {
        assert_eq!(combine_estimates(&[1.0, 2.0, 3.0], 1).unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(combine_estimates(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1.5, 2.0]);
        assert_eq!(combine_estimates(&[4.5; 7], 3).unwrap(), vec![4.5; 3]);
        assert!(combine_estimates(&[], 1).is_err());
        assert!(combine_estimates(&[1.0], 0).is_err());
    }

    #[test]
    fn weighted_average() {
        let got = combine_estimates_weighted(&[1.0, 4.0], &[3.0, 1.0], 1).unwrap();
        assert_eq!(got, vec![1.0, 7.0 / 4.0]);
    }

    #[test]
    fn curve_bookkeeping() {
        let c = EstimateCurve::from_block_values(StatKind::Mean, "x1", &[1.0, 2.0, 3.0, 4.0, 5.0], 2, 3.0).unwrap();
        assert_eq!(c.blocks_used, vec![2, 4, 5]);
        assert_eq!(c.batch_values, vec![1.5, 2.5, 3.0]);
        assert_eq!(c.mean_abs_error, vec![1.5, 0.5, 0.0]);
    }

    proptest! {
        #[test]
        fn pooled_matches_direct(blocks in prop::collection::vec(prop::collection::vec(-1e3f64..1e3, 2..30), 1..8)) {
            let summaries: Vec<BlockSummary> = blocks.iter().map(|b| BlockSummary::of(b).unwrap()).collect();
            let all: Vec<f64> = blocks.concat();
            let (m, sd) = BlockSummary::pooled(&summaries).unwrap();
            prop_assert!((m - mean(&all).unwrap()).abs() <= 1e-9 * (1.0 + m.abs()));
            let direct = sample_stddev(&all).unwrap();
            prop_assert!((sd - direct).abs() <= 1e-9 * (1.0 + direct));
        }

        /// With equal-sized blocks the average of block means over all blocks
        /// is the full-data mean.
        #[test]
        fn equal_blocks_average_to_full_mean(
            k in 1usize..12,
            n in 1usize..20,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let blocks: Vec<Vec<f64>> = (0..k).map(|_| (0..n).map(|_| rng.random_range(-1e6..1e6)).collect()).collect();
            let means: Vec<f64> = blocks.iter().map(|b| mean(b).unwrap()).collect();
            let last = *combine_estimates(&means, 3).unwrap().last().unwrap();
            let full = mean(&blocks.concat()).unwrap();
            prop_assert!((last - full).abs() <= 1e-10 * (1.0 + full.abs()));
        }
    }
}
