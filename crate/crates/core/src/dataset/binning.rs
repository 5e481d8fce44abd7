use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-feature quantile bin edges. A value `v` falls in bin `k` when
/// `edges[k-1] <= v < edges[k]` (right-open), with unbounded outer bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinMapper {
    max_bins: usize,
    edges: Vec<Vec<f64>>,
}

impl BinMapper {
    pub fn fit(x: &Matrix, max_bins: usize) -> Result<Self> {
        if max_bins < 2 {
            return Err(Error::invalid("max_bins", "must be >= 2"));
        }
        if max_bins > u16::MAX as usize {
            return Err(Error::invalid("max_bins", "must fit in 16 bits"));
        }
        let edges = (0..x.n_cols())
            .map(|j| column_edges(&x.column(j), max_bins))
            .collect();
        Ok(Self { max_bins, edges })
    }

    pub fn fit_column(values: &[f64], max_bins: usize) -> Vec<f64> {
        column_edges(values, max_bins)
    }

    pub fn max_bins(&self) -> usize {
        self.max_bins
    }

    pub fn edges(&self, feature: usize) -> &[f64] {
        &self.edges[feature]
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.edges[feature].len() + 1
    }

    pub fn n_features(&self) -> usize {
        self.edges.len()
    }

    #[inline]
    pub fn code(&self, feature: usize, value: f64) -> u16 {
        code_for(&self.edges[feature], value)
    }

    /// `[lower, upper)` covered by `code` of `feature`.
    pub fn decode(&self, feature: usize, code: u16) -> (f64, f64) {
        let e = &self.edges[feature];
        let k = code as usize;
        let lo = if k == 0 { f64::NEG_INFINITY } else { e[k - 1] };
        let hi = if k >= e.len() { f64::INFINITY } else { e[k] };
        (lo, hi)
    }

    /// Column-major bin codes for every row of `x`.
    pub fn transform(&self, x: &Matrix) -> Result<Vec<u16>> {
        x.check_cols(self.edges.len())?;
        let n = x.n_rows();
        let mut codes = vec![0u16; n * x.n_cols()];
        for j in 0..x.n_cols() {
            let col = &mut codes[j * n..(j + 1) * n];
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.code(j, x.get(i, j));
            }
        }
        Ok(codes)
    }
}

#[inline]
pub(crate) fn code_for(edges: &[f64], value: f64) -> u16 {
    edges.partition_point(|&e| e <= value) as u16
}

fn column_edges(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= 1 {
        return Vec::new();
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| midpoint(w[0], w[1])).collect();
    }
    let n = sorted.len();
    let min = sorted[0];
    let mut edges: Vec<f64> = Vec::with_capacity(max_bins - 1);
    for k in 1..max_bins {
        let q = quantile(&sorted, k as f64 / max_bins as f64);
        // an edge at the minimum would leave bin 0 empty
        if q > min && edges.last().is_none_or(|&l| q > l) {
            edges.push(q);
        }
    }
    debug_assert!(edges.len() < max_bins && n > 0);
    edges
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    // adjacent floats: keep the edge strictly above `a`
    if m > a {
        m
    } else {
        b
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// A dataset together with its bin edges and column-major bin codes.
#[derive(Debug, Clone)]
pub struct BinnedDataset {
    source: Dataset,
    mapper: BinMapper,
    codes: Vec<u16>,
}

impl BinnedDataset {
    pub fn source(&self) -> &Dataset {
        &self.source
    }

    pub fn mapper(&self) -> &BinMapper {
        &self.mapper
    }

    pub fn max_bins(&self) -> usize {
        self.mapper.max_bins
    }

    pub fn bin_edges(&self, feature: usize) -> &[f64] {
        self.mapper.edges(feature)
    }

    /// Codes of one feature across all rows.
    pub fn feature_codes(&self, feature: usize) -> &[u16] {
        let n = self.source.n_rows();
        &self.codes[feature * n..(feature + 1) * n]
    }

    pub fn code(&self, row: usize, feature: usize) -> u16 {
        self.feature_codes(feature)[row]
    }

    pub(crate) fn codes(&self) -> &[u16] {
        &self.codes
    }
}

/// Quantile-bins every feature of `d` into at most `max_bins` bins.
pub fn bin_features(d: &Dataset, max_bins: usize) -> Result<BinnedDataset> {
    let mapper = BinMapper::fit(d.x(), max_bins)?;
    let codes = mapper.transform(d.x())?;
    Ok(BinnedDataset {
        source: d.clone(),
        mapper,
        codes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ColumnKind, ColumnSchema};
    use proptest::prelude::*;

    fn one_col(v: Vec<f64>) -> Dataset {
        let n = v.len();
        Dataset::new(
            vec![ColumnSchema::feature("x", ColumnKind::Numeric)],
            Matrix::new(n, 1, v).unwrap(),
            vec![0.0; n],
            None,
            "y",
        )
        .unwrap()
    }

    #[test]
    fn median_edge() {
        // sorted [1,2,3,4]: quantile 0.5 sits at position 1.5 -> 2.5
        let b = bin_features(&one_col(vec![1.0, 2.0, 3.0, 4.0]), 2).unwrap();
        assert_eq!(b.bin_edges(0), &[2.5]);
        assert_eq!(b.feature_codes(0), &[0, 0, 1, 1]);
    }

    #[test]
    fn constant_column_single_bin() {
        let b = bin_features(&one_col(vec![7.0; 5]), 16).unwrap();
        assert!(b.bin_edges(0).is_empty());
        assert!(b.feature_codes(0).iter().all(|&c| c == 0));
    }

    #[test]
    fn exact_binning_when_few_distinct() {
        let b = bin_features(&one_col(vec![3.0, 1.0, 2.0, 1.0, 3.0]), 8).unwrap();
        assert_eq!(b.bin_edges(0), &[1.5, 2.5]);
        assert_eq!(b.feature_codes(0), &[2, 0, 1, 0, 2]);
    }

    #[test]
    fn rejects_tiny_max_bins() {
        assert!(bin_features(&one_col(vec![1.0, 2.0]), 1).is_err());
    }

    proptest! {
        #[test]
        fn codes_decode_to_containing_interval(
            v in proptest::collection::vec(-1e3f64..1e3, 1..200),
            max_bins in 2usize..40,
        ) {
            let b = bin_features(&one_col(v.clone()), max_bins).unwrap();
            let e = b.bin_edges(0);
            prop_assert!(e.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(e.len() < max_bins);
            for (i, &x) in v.iter().enumerate() {
                let (lo, hi) = b.mapper().decode(0, b.code(i, 0));
                prop_assert!(lo <= x && x < hi);
            }
        }
    }
}
