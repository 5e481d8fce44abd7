//! CART regression trees and the random-forest / extra-trees ensembles.

mod cart;
mod forest;

pub use cart::{fit_cart, Cart, TreeParams};
pub use forest::{fit_forest, Forest, ForestMode, ForestParams};

use crate::tree::Tree;

/// Per-feature sum of split gains across `trees`, normalized to sum to 1.
/// All zeros when no tree has a split.
pub fn impurity_importance(trees: &[Tree], n_features: usize) -> Vec<f64> {
    let mut acc = vec![0.0; n_features];
    for t in trees {
        t.accumulate_gains(&mut acc);
    }
    normalize(acc)
}

pub(crate) fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        for x in &mut v {
            *x /= total;
        }
    } else {
        v.iter_mut().for_each(|x| *x = 0.0);
    }
    v
}
