//! Binary regression tree shared by CART, forests and boosting.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Loss reduction achieved by the split.
        gain: f64,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Nodes in a flat arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf {
                value,
                n_samples: 0,
            }],
        }
    }

    /// Validates child links (in range, acyclic, each node reached once) and
    /// finite leaf values.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Format("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            if id >= nodes.len() || seen[id] {
                return Err(Error::Format(format!("bad child link to node {id}")));
            }
            seen[id] = true;
            match &nodes[id] {
                Node::Split {
                    left,
                    right,
                    threshold,
                    ..
                } => {
                    if threshold.is_nan() {
                        return Err(Error::Format("NaN split threshold".into()));
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
                Node::Leaf { value, .. } => {
                    if !value.is_finite() {
                        return Err(Error::Format("non-finite leaf value".into()));
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("unreachable tree node".into()));
        }
        Ok(Self { nodes })
    }

    pub(crate) fn from_nodes_unchecked(nodes: Vec<Node>) -> Self {
        debug_assert!(Self::from_nodes(nodes.clone()).is_ok());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Id of the leaf reached by `row`.
    #[inline]
    pub fn leaf_id(&self, row: &[f64]) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    id = if row[*feature] < *threshold {
                        *left
                    } else {
                        *right
                    }
                }
                Node::Leaf { .. } => return id,
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match &self.nodes[self.leaf_id(row)] {
            Node::Leaf { value, .. } => *value,
            Node::Split { .. } => unreachable!("leaf_id returns a leaf"),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
                Node::Leaf { .. } => 0,
            }
        }
        go(&self.nodes, 0)
    }

    /// Largest feature index referenced by a split, if any.
    pub fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    /// Adds each split's gain to `acc[feature]`.
    pub fn accumulate_gains(&self, acc: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                acc[*feature] += gain;
            }
        }
    }

    pub(crate) fn set_leaf_value(&mut self, id: usize, v: f64) {
        if let Node::Leaf { value, .. } = &mut self.nodes[id] {
            *value = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stump() -> Tree {
        Tree::from_nodes(vec![
            Node::Split {
                feature: 0,
                threshold: 3.0,
                left: 1,
                right: 2,
                gain: 1.0,
            },
            Node::Leaf {
                value: -1.0,
                n_samples: 1,
            },
            Node::Leaf {
                value: 7.0,
                n_samples: 1,
            },
        ])
        .unwrap()
    }

    #[test]
    fn manual_descent() {
        let t = stump();
        assert_eq!(t.predict_row(&[5.0]), 7.0);
        assert_eq!(t.predict_row(&[2.9]), -1.0);
        // ties go right
        assert_eq!(t.predict_row(&[3.0]), 7.0);
        assert_eq!(t.n_leaves(), 2);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn rejects_cycles_and_dangling_links() {
        let cyc = vec![Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 0,
            right: 0,
            gain: 0.0,
        }];
        assert!(Tree::from_nodes(cyc).is_err());
        let dangling = vec![Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 1,
            right: 2,
            gain: 0.0,
        }];
        assert!(Tree::from_nodes(dangling).is_err());
    }
}
