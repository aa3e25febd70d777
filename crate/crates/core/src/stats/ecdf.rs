use crate::error::{Error, Result};

/// Empirical distribution function of one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty("ecdf sample"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("ecdf sample contains non-finite values".into()));
        }
        let mut sorted = values.to_vec();
        sorted.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted })
    }

    /// `#{v <= x} / count`
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn count(&self) -> usize {
        self.sorted.len()
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted
    }
}

/// Two-sample Kolmogorov–Smirnov distance: the largest gap between the two
/// ECDFs over the pooled sample points.
pub fn ks_statistic(a: &Ecdf, b: &Ecdf) -> f64 {
    let (xa, xb) = (a.sorted_values(), b.sorted_values());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let x = match (xa.get(i), xb.get(j)) {
            (Some(&u), Some(&v)) => u.min(v),
            (Some(&u), None) => u,
            (None, Some(&v)) => v,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Approximate 95% two-sample KS band `1.36·√(2/n)` for samples of size `n`.
pub fn ks_band(n: usize) -> f64 {
    1.36 * (2.0 / n as f64).sqrt()
}
