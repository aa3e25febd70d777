//! Distribution comparison between blocks and block-level estimation.

mod ecdf;
mod estimate;
mod hotelling;
mod mmd;

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::block_store::Record;
use crate::error::{Error, Result};

pub use ecdf::{ks_band, ks_statistic, Ecdf};
pub use estimate::{
    combine_estimates, combine_estimates_weighted, estimate_curves, BlockSummary, Estimand, EstimateCurve,
    StatKind,
};
pub use hotelling::{hotelling_t2, HotellingT2};
pub use mmd::{median_heuristic, mmd2_unbiased, MEDIAN_HEURISTIC_POINTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    /// Sample standard deviation, `n − 1` denominator.
    StdDev,
}

/// Neumaier-compensated sum.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

pub fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("mean of no values"));
    }
    Ok(compensated_sum(values.iter().copied()) / values.len() as f64)
}

pub fn sample_stddev(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InvalidParams("standard deviation needs at least 2 values".into()));
    }
    let m = mean(values)?;
    let ss = compensated_sum(values.iter().map(|v| (v - m) * (v - m)));
    Ok((ss / (values.len() - 1) as f64).sqrt())
}

pub fn block_statistic(records: &[Record], feature: usize, statistic: Statistic) -> Result<f64> {
    let values: Vec<f64> = records
        .iter()
        .map(|r| {
            r.features
                .get(feature)
                .copied()
                .ok_or_else(|| Error::UnknownFeature(feature.to_string()))
        })
        .collect::<Result<_>>()?;
    match statistic {
        Statistic::Mean => mean(&values),
        Statistic::StdDev => sample_stddev(&values),
    }
}

/// Share of each declared category among the records' labels. Every declared
/// category appears in the result, possibly with proportion 0.
pub fn category_proportions(records: &[Record], categories: &[u32]) -> Result<BTreeMap<u32, f64>> {
    if records.is_empty() {
        return Err(Error::Empty("records"));
    }
    let mut counts: BTreeMap<u32, u64> = categories.iter().map(|&c| (c, 0)).collect();
    for r in records {
        let code = r.label.ok_or(Error::Unlabeled)?;
        *counts.get_mut(&code).ok_or(Error::UndeclaredCategory(code))? += 1;
    }
    let n = records.len() as f64;
    Ok(counts.into_iter().map(|(c, k)| (c, k as f64 / n)).collect())
}

/// Spearman rank correlation with a two-sided p-value from the t
/// approximation `t = ρ·√((n−2)/(1−ρ²))` on `n − 2` degrees of freedom.
/// Ties get average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch("spearman inputs differ in length".into()));
    }
    if x.len() < 3 {
        return Err(Error::InvalidParams("spearman needs at least 3 points".into()));
    }
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx)?, mean(&ry)?);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return Ok((0.0, 1.0));
    }
    let rho = cov / (vx * vy).sqrt();
    let df = (x.len() - 2) as f64;
    if rho.abs() >= 1.0 {
        return Ok((rho.signum(), 0.0));
    }
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidParams(e.to_string()))?;
    Ok((rho, 2.0 * dist.sf(t.abs())))
}
