use crate::error::{Error, Result};

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn check_dims(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<usize> {
    let dim = a.first().or(b.first()).map_or(0, Vec::len);
    if a.iter().chain(b).any(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch("all rows must have the same length".into()));
    }
    Ok(dim)
}

/// Unbiased estimate of the squared maximum mean discrepancy with the
/// Gaussian kernel `exp(-‖x−y‖² / (2·bandwidth²))`. Within-sample sums skip
/// the diagonal, so the estimate can be slightly negative.
pub fn mmd2_unbiased(a: &[Vec<f64>], b: &[Vec<f64>], bandwidth: f64) -> Result<f64> {
    check_dims(a, b)?;
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidParams("each sample needs at least 2 rows".into()));
    }
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::InvalidParams(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let k = |x: &[f64], y: &[f64]| (-gamma * sq_dist(x, y)).exp();

    let within = |s: &[Vec<f64>]| {
        let mut sum = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                sum += k(&s[i], &s[j]);
            }
        }
        2.0 * sum / (s.len() * (s.len() - 1)) as f64
    };
    let cross: f64 = a.iter().map(|x| b.iter().map(|y| k(x, y)).sum::<f64>()).sum();
    Ok(within(a) + within(b) - 2.0 * cross / (a.len() * b.len()) as f64)
}

/// Points used by [`median_heuristic`]; larger samples use their first rows.
pub const MEDIAN_HEURISTIC_POINTS: usize = 1000;

/// Median pairwise Euclidean distance over the pooled sample, a standard
/// default bandwidth. Falls back to 1.0 when all points coincide.
pub fn median_heuristic(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_dims(a, b)?;
    let half = MEDIAN_HEURISTIC_POINTS / 2;
    let pooled: Vec<&Vec<f64>> = a.iter().take(half).chain(b.iter().take(half)).collect();
    if pooled.len() < 2 {
        return Err(Error::InvalidParams("median heuristic needs at least 2 points".into()));
    }
    let mut d = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            d.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    let mid = d.len() / 2;
    let (_, median, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
    Ok(if *median > 0.0 { *median } else { 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_points_give_zero() {
        let a = vec![vec![0.0], vec![0.0]];
        for bw in [0.1, 1.0, 10.0] {
            assert_eq!(mmd2_unbiased(&a, &a, bw).unwrap(), 0.0);
        }
    }

    /// For a = b = {x, y}: within terms are k(x,y) each, the cross term is
    /// (2 + 2k(x,y))/4, so MMD² = k − 1 ≤ 0.
    #[test]
    fn same_matrix_two_rows_by_hand() {
        let a = vec![vec![0.0], vec![1.0]];
        let k = (-0.5f64).exp();
        let got = mmd2_unbiased(&a, &a, 1.0).unwrap();
        assert!((got - (k - 1.0)).abs() < 1e-15);
        assert!(got <= 0.0);
    }

    #[test]
    fn errors() {
        let one = vec![vec![1.0]];
        let two = vec![vec![1.0], vec![2.0]];
        assert!(mmd2_unbiased(&one, &two, 1.0).is_err());
        assert!(mmd2_unbiased(&two, &two, 0.0).is_err());
        assert!(matches!(
            mmd2_unbiased(&two, &[vec![1.0, 2.0], vec![3.0, 4.0]], 1.0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn median_heuristic_small() {
        // Pairwise distances 1, 2, 3, 1, 2, 1 → sorted 1,1,1,2,2,3 → upper median 2.
        let a = vec![vec![0.0], vec![1.0]];
        let b = vec![vec![2.0], vec![3.0]];
        assert_eq!(median_heuristic(&a, &b).unwrap(), 2.0);
        assert_eq!(median_heuristic(&[vec![5.0], vec![5.0]], &[]).unwrap(), 1.0);
    }
}
