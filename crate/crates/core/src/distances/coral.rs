use ndarray::{Array2, ArrayView2, Axis};

use super::{check_batches, DistanceOutput};
use crate::error::{Error, Result};

fn centered(x: &ArrayView2<f64>) -> Array2<f64> {
    let mean = x.mean_axis(Axis(0)).expect("non-empty batch");
    x - &mean.insert_axis(Axis(0))
}

/// Unbiased sample covariance (`n − 1` denominator).
pub fn covariance(x: &ArrayView2<f64>) -> Array2<f64> {
    let c = centered(x);
    c.t().dot(&c) / (x.nrows() as f64 - 1.0)
}

/// CORAL loss `‖C_A − C_B‖²_F / (4 d²)` with unbiased covariances.
pub fn coral_loss(a: &ArrayView2<f64>, b: &ArrayView2<f64>) -> Result<DistanceOutput> {
    check_batches(a, b, "coral_loss")?;
    if a.nrows() < 2 || b.nrows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "covariance needs at least 2 samples per batch, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let d = a.ncols() as f64;
    let (ca, cb) = (centered(a), centered(b));
    let (na1, nb1) = (a.nrows() as f64 - 1.0, b.nrows() as f64 - 1.0);
    let diff = ca.t().dot(&ca) / na1 - cb.t().dot(&cb) / nb1;
    let scale = 1.0 / (4.0 * d * d);
    let value = scale * diff.iter().map(|v| v * v).sum::<f64>();
    // dL/dC_A = 2·scale·diff (symmetric); dL/dX = 2/(n−1) · X_c · dL/dC
    let g = diff * (2.0 * scale);
    let grad_a = ca.dot(&g) * (2.0 / na1);
    let grad_b = cb.dot(&g) * (-2.0 / nb1);
    Ok(DistanceOutput {
        value,
        grad_a,
        grad_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn variances_one_and_two() {
        // sample variances: {−1, 0, 1} → 1; {−√2, 0, √2} → 2
        let s = 2f64.sqrt();
        let a = array![[-1.0], [0.0], [1.0]];
        let b = array![[-s], [0.0], [s]];
        let out = coral_loss(&a.view(), &b.view()).unwrap();
        assert!((out.value - 0.25).abs() < 1e-10);
    }

    #[test]
    fn identical_and_shifted() {
        let a = array![[1.0, 2.0], [0.5, -1.0], [3.0, 0.0]];
        let out = coral_loss(&a.view(), &a.view()).unwrap();
        assert_eq!(out.value, 0.0);
        let b = array![[0.0, 1.0], [2.0, 2.0], [1.0, -3.0], [0.0, 0.0]];
        let base = coral_loss(&a.view(), &b.view()).unwrap().value;
        let shift = array![[10.0, -7.0]];
        let moved = coral_loss(&(&a + &shift).view(), &(&b + &shift).view()).unwrap().value;
        assert!((base - moved).abs() < 1e-10 * base.max(1.0));
    }

    #[test]
    fn needs_two_rows() {
        let a = array![[1.0, 2.0]];
        let b = array![[1.0, 2.0], [0.0, 0.0]];
        assert!(coral_loss(&a.view(), &b.view()).is_err());
    }

    #[test]
    fn covariance_matches_definition() {
        let x = array![[1.0, 2.0], [3.0, 1.0], [2.0, 6.0]];
        let c = covariance(&x.view());
        // means 2, 3
        let expected_xy = ((-1.0) * (-1.0) + 1.0 * (-2.0) + 0.0 * 3.0) / 2.0;
        assert!((c[[0, 1]] - expected_xy).abs() < 1e-15);
        assert!((c[[0, 0]] - 1.0).abs() < 1e-15);
    }
}
