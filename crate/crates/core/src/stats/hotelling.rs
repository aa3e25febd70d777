use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HotellingT2 {
    pub statistic: f64,
    pub f_statistic: f64,
    pub df1: f64,
    pub df2: f64,
    pub p_value: f64,
}

fn to_matrix(rows: &[Vec<f64>], dim: usize) -> Result<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch("all rows must have the same length".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

fn mean_and_scatter(x: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mean = x.row_mean().transpose();
    let mut centered = x.clone();
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let scatter = centered.transpose() * &centered;
    (mean, scatter)
}

/// Two-sample Hotelling T² with pooled covariance; the p-value comes from
/// the exact F transform `F = (n−M−1)/(M(n−2))·T²` with `(M, n−M−1)` degrees
/// of freedom, where `n = n_a + n_b`.
pub fn hotelling_t2(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<HotellingT2> {
    let dim = a.first().or(b.first()).map_or(0, Vec::len);
    let (na, nb) = (a.len(), b.len());
    if dim == 0 {
        return Err(Error::InvalidParams("samples have no features".into()));
    }
    if na == 0 || nb == 0 || na + nb < dim + 3 {
        return Err(Error::InvalidParams(format!(
            "need n_a + n_b - 2 > M, got n_a={na}, n_b={nb}, M={dim}"
        )));
    }
    let (xa, xb) = (to_matrix(a, dim)?, to_matrix(b, dim)?);
    let (ma, sa) = mean_and_scatter(&xa);
    let (mb, sb) = mean_and_scatter(&xb);
    let n = (na + nb) as f64;
    let pooled = (sa + sb) / (n - 2.0);

    let chol = pooled.clone().cholesky().ok_or(Error::SingularCovariance)?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if lo.is_nan() || lo <= hi * 1e-8 {
        return Err(Error::SingularCovariance);
    }

    let diff = ma - mb;
    let solved = chol.solve(&diff);
    let statistic = (na * nb) as f64 / n * diff.dot(&solved);
    let m = dim as f64;
    let df1 = m;
    let df2 = n - m - 1.0;
    let f_statistic = (n - m - 1.0) / (m * (n - 2.0)) * statistic;
    let dist = FisherSnedecor::new(df1, df2).map_err(|e| Error::InvalidParams(e.to_string()))?;
    let p_value = if f_statistic <= 0.0 { 1.0 } else { dist.sf(f_statistic) };
    Ok(HotellingT2 {
        statistic,
        f_statistic,
        df1,
        df2,
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn col(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn identical_samples() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![3.0, 5.0], vec![0.5, 0.0]];
        let r = hotelling_t2(&a, &a).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert_eq!(r.p_value, 1.0);
    }

    /// With one feature T² is the square of the pooled two-sample t statistic.
    #[test]
    fn one_feature_matches_t_test() {
        let a = [2.1, 3.4, 1.9, 4.0, 2.8];
        let b = [3.9, 4.4, 5.1, 3.2, 4.8];
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let ss = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m).powi(2)).sum::<f64>()
        };
        let sp2 = (ss(&a) + ss(&b)) / 8.0;
        let t = (mean(&a) - mean(&b)) / (sp2 * (1.0 / 5.0 + 1.0 / 5.0)).sqrt();
        let r = hotelling_t2(&col(&a), &col(&b)).unwrap();
        assert!((r.statistic - t * t).abs() < 1e-10 * t * t);
        assert_eq!(r.df1, 1.0);
        assert_eq!(r.df2, 8.0);
        // F(1, n-2) equals t², so the F transform leaves it unchanged.
        assert!((r.f_statistic - t * t).abs() < 1e-10 * t * t);
    }

    #[test]
    fn shifted_gaussians_are_detected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let z = Normal::new(0.0, 1.0).unwrap();
        let a: Vec<Vec<f64>> = (0..100).map(|_| vec![z.sample(&mut rng), z.sample(&mut rng)]).collect();
        let b: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![3.0 + z.sample(&mut rng), z.sample(&mut rng)])
            .collect();
        assert!(hotelling_t2(&a, &b).unwrap().p_value < 1e-3);
    }

    #[test]
    fn degenerate_inputs() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0], vec![3.0, 3.0]];
        assert!(matches!(hotelling_t2(&a, &a), Err(Error::SingularCovariance)));
        assert!(hotelling_t2(&a[..1], &a[..1]).is_err());
        assert!(hotelling_t2(&a, &[vec![1.0]]).is_err());
    }
}
