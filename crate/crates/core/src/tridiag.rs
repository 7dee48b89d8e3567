use crate::error::{Error, Result};

/// Thomas algorithm for `lower[i]·x[i-1] + diag[i]·x[i] + upper[i]·x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored. The systems assembled by the
/// solver are M-matrices, so a non-positive pivot means breakdown.
pub(crate) fn solve(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot > 0.0) {
        return Err(Error::Breakdown(format!(
            "non-positive pivot {pivot} at row 0"
        )));
    }
    c[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if !(pivot > 0.0) {
            return Err(Error::Breakdown(format!(
                "non-positive pivot {pivot} at row {i}"
            )));
        }
        c[i] = upper[i] / pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_product() {
        let n = 7;
        let lower: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let upper: Vec<f64> = (0..n).map(|i| -0.5 + 0.02 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 1.0).collect();
        let mut b: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect();
        solve(&lower, &diag, &upper, &mut b).unwrap();
        for (a, e) in b.iter().zip(&x) {
            assert!((a - e).abs() < 1e-13);
        }
    }

    #[test]
    fn reports_non_positive_pivot() {
        let mut b = vec![1.0, 1.0];
        let err = solve(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &mut b);
        assert!(matches!(err, Err(Error::Breakdown(_))));
    }
}
