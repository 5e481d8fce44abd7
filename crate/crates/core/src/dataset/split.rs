use super::Dataset;
use crate::error::{Error, Result};

/// Chronological holdout: the last `ceil(test_fraction * n)` rows form the
/// test set. No shuffling.
pub fn temporal_split(d: &Dataset, test_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(
            "test_fraction",
            format!("{test_fraction} is outside (0, 1)"),
        ));
    }
    let n = d.n_rows();
    if n < 2 {
        return Err(Error::TooFewRows { needed: 2, have: n });
    }
    // guard against products like 0.7 * 10 = 7.000000000000001
    let n_test = (test_fraction * n as f64 - 1e-9).ceil() as usize;
    if n_test == 0 || n_test >= n {
        return Err(Error::invalid(
            "test_fraction",
            format!("{test_fraction} leaves an empty side for {n} rows"),
        ));
    }
    let cut = n - n_test;
    Ok((d.slice_rows(0, cut), d.slice_rows(cut, n)))
}
