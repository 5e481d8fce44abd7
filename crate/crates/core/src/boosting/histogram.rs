//! Per-node gradient histograms over binned features.

use crate::dataset::BinMapper;

/// Sums over the rows falling in one (feature, bin).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Cell {
    pub g: f64,
    pub h: f64,
    pub count: u32,
}

/// One [`Cell`] for every (feature, bin), laid out by [`HistLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSet {
    pub cells: Vec<Cell>,
}

/// Where each feature's bins start in a [`HistogramSet`].
#[derive(Debug, Clone)]
pub struct HistLayout {
    offsets: Vec<usize>,
    total: usize,
}

impl HistLayout {
    pub fn new(mapper: &BinMapper) -> Self {
        let mut offsets = Vec::with_capacity(mapper.n_features() + 1);
        let mut total = 0;
        for f in 0..mapper.n_features() {
            offsets.push(total);
            total += mapper.n_bins(f);
        }
        offsets.push(total);
        Self { offsets, total }
    }

    pub fn n_features(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn range(&self, f: usize) -> std::ops::Range<usize> {
        self.offsets[f]..self.offsets[f + 1]
    }
}

impl HistogramSet {
    /// Accumulates `rows` in the order given, so each cell's sum is
    /// reproducible regardless of how features are scheduled.
    pub fn build(layout: &HistLayout, codes: &[u16], n_rows: usize, rows: &[usize], g: &[f64], h: &[f64]) -> Self {
        let mut cells = vec![Cell::default(); layout.total];
        for f in 0..layout.n_features() {
            let col = &codes[f * n_rows..(f + 1) * n_rows];
            let hist = &mut cells[layout.offsets[f]..layout.offsets[f + 1]];
            for &r in rows {
                let c = &mut hist[col[r] as usize];
                c.g += g[r];
                c.h += h[r];
                c.count += 1;
            }
        }
        Self { cells }
    }

    /// Turns a parent histogram into the sibling of `child` in place.
    pub fn subtract_in_place(&mut self, child: &HistogramSet) {
        for (a, b) in self.cells.iter_mut().zip(&child.cells) {
            a.g -= b.g;
            a.h -= b.h;
            a.count -= b.count;
        }
    }

    /// Removes `rows` from the histogram one by one, leaving the histogram
    /// of the remaining rows without building theirs.
    pub fn remove_rows(&mut self, layout: &HistLayout, codes: &[u16], n_rows: usize, rows: &[usize], g: &[f64], h: &[f64]) {
        for f in 0..layout.n_features() {
            let col = &codes[f * n_rows..(f + 1) * n_rows];
            let hist = &mut self.cells[layout.offsets[f]..layout.offsets[f + 1]];
            for &r in rows {
                let c = &mut hist[col[r] as usize];
                c.g -= g[r];
                c.h -= h[r];
                c.count -= 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bins_sum_to_direct_row_sums(
            vals in proptest::collection::vec((-50.0f64..50.0, 0.0f64..3.0, -2.0f64..2.0), 2..120),
            max_bins in 2usize..32,
            cut in 0usize..120,
        ) {
            let n = vals.len();
            let x = Matrix::new(n, 2, vals.iter().flat_map(|v| [v.0, v.1]).collect()).unwrap();
            let g: Vec<f64> = vals.iter().map(|v| v.2).collect();
            let h: Vec<f64> = vals.iter().map(|v| 1.0 + v.1).collect();
            let mapper = BinMapper::fit(&x, max_bins).unwrap();
            let codes = mapper.transform(&x).unwrap();
            let layout = HistLayout::new(&mapper);
            let all: Vec<usize> = (0..n).collect();
            let left: Vec<usize> = (0..n).filter(|&i| i < cut % n).collect();
            let parent = HistogramSet::build(&layout, &codes, n, &all, &g, &h);
            let child = HistogramSet::build(&layout, &codes, n, &left, &g, &h);
            let right: Vec<usize> = (0..n).filter(|&i| i >= cut % n).collect();
            let mut sib = parent.clone();
            sib.subtract_in_place(&child);
            let mut removed = parent.clone();
            removed.remove_rows(&layout, &codes, n, &left, &g, &h);
            for (node, hist) in [(&all, &parent), (&right, &sib), (&right, &removed)] {
                for f in 0..2 {
                    for (k, b) in layout.range(f).enumerate() {
                        let members: Vec<usize> = node
                            .iter()
                            .copied()
                            .filter(|&r| codes[f * n + r] as usize == k)
                            .collect();
                        let sg: f64 = members.iter().map(|&r| g[r]).sum();
                        let sh: f64 = members.iter().map(|&r| h[r]).sum();
                        let c = hist.cells[b];
                        prop_assert!((c.g - sg).abs() <= 1e-9);
                        prop_assert!((c.h - sh).abs() <= 1e-9);
                        prop_assert_eq!(c.count as usize, members.len());
                    }
                }
            }
        }
    }
}
