use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;
use crate::tree::{Node, Tree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_split < 2 {
            return Err(Error::invalid("min_samples_split", "must be >= 2"));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::invalid("min_samples_leaf", "must be >= 1"));
        }
        Ok(())
    }
}

/// A single fitted regression tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cart {
    pub tree: Tree,
    pub n_features: usize,
}

impl Cart {
    pub fn predict(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.check_cols(self.n_features)?;
        Ok(self.tree.predict(x))
    }

    pub fn feature_importance(&self) -> Vec<f64> {
        super::impurity_importance(std::slice::from_ref(&self.tree), self.n_features)
    }
}

/// Greedy variance-reduction tree over all features.
pub fn fit_cart(train: &Dataset, params: &TreeParams) -> Result<Cart> {
    params.validate()?;
    if train.n_rows() == 0 {
        return Err(Error::EmptyData);
    }
    let pre = Presorted::new(train.x());
    let counts = vec![1u32; train.n_rows()];
    let tree = grow(
        &pre,
        train.y(),
        &counts,
        params,
        Splitter::Best {
            mtry: train.n_features(),
        },
        None,
    );
    Ok(Cart {
        tree,
        n_features: train.n_features(),
    })
}

/// How candidate splits are generated at each node.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Splitter {
    /// Exhaustive midpoint thresholds over `mtry` randomly chosen features.
    Best { mtry: usize },
    /// One uniform random threshold per candidate feature.
    Random { mtry: usize },
}

/// Column copies of the features plus row ids sorted by each column.
pub(crate) struct Presorted {
    cols: Vec<Vec<f64>>,
    order: Vec<Vec<u32>>,
}

impl Presorted {
    pub(crate) fn new(x: &Matrix) -> Self {
        let cols: Vec<Vec<f64>> = crate::exec::map_indexed(x.n_cols(), |j| x.column(j));
        let order = crate::exec::map_indexed(x.n_cols(), |j| {
            let c = &cols[j];
            let mut o: Vec<u32> = (0..x.n_rows() as u32).collect();
            o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]).then(a.cmp(&b)));
            o
        });
        Self { cols, order }
    }

    fn n_features(&self) -> usize {
        self.cols.len()
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m > a {
        m
    } else {
        b
    }
}

/// Grows one tree on rows with non-zero `counts` (bootstrap multiplicities).
pub(crate) fn grow(
    pre: &Presorted,
    y: &[f64],
    counts: &[u32],
    params: &TreeParams,
    splitter: Splitter,
    mut rng: Option<&mut Rng>,
) -> Tree {
    let n_features = pre.n_features();
    let mut order: Vec<Vec<u32>> = pre
        .order
        .iter()
        .map(|o| o.iter().copied().filter(|&r| counts[r as usize] > 0).collect())
        .collect();
    let m = order.first().map_or_else(
        || counts.iter().filter(|&&c| c > 0).count(),
        |o| o.len(),
    );
    // rows of the node in any fixed order, for sums when there are no features
    let all_rows: Vec<u32> = (0..counts.len() as u32)
        .filter(|&r| counts[r as usize] > 0)
        .collect();

    let mut go_left = vec![false; counts.len()];
    let mut scratch: Vec<u32> = Vec::with_capacity(m);
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        n_samples: 0,
    }];
    let mut stack = vec![(0usize, 0usize, m, 0usize)];

    while let Some((id, s, e, depth)) = stack.pop() {
        let rows: &[u32] = if n_features > 0 {
            &order[0][s..e]
        } else {
            &all_rows[s..e]
        };
        let (mut w, mut sum) = (0.0, 0.0);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &r in rows {
            let c = counts[r as usize] as f64;
            let v = y[r as usize];
            w += c;
            sum += c * v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let mean = sum / w;
        let leaf = Node::Leaf {
            value: mean,
            n_samples: w as usize,
        };
        let splittable = lo < hi
            && n_features > 0
            && w >= params.min_samples_split as f64
            && w >= 2.0 * params.min_samples_leaf as f64
            && params.max_depth.is_none_or(|d| depth < d);
        if !splittable {
            nodes[id] = leaf;
            continue;
        }
        let sse: f64 = rows
            .iter()
            .map(|&r| counts[r as usize] as f64 * (y[r as usize] - mean).powi(2))
            .sum();
        let features = candidate_features(n_features, splitter, rng.as_deref_mut());
        let best = match splitter {
            Splitter::Best { .. } => best_split(pre, &order, y, counts, &features, s, e, w, sum, params),
            Splitter::Random { .. } => random_split(
                pre,
                &order,
                y,
                counts,
                &features,
                s,
                e,
                w,
                sum,
                params,
                rng.as_deref_mut().expect("random splitter needs an rng"),
            ),
        };
        let Some(best) = best.filter(|b| b.gain > 1e-12 * sse) else {
            nodes[id] = leaf;
            continue;
        };

        let col = &pre.cols[best.feature];
        let mut n_left = 0;
        for &r in &order[best.feature][s..e] {
            let l = col[r as usize] < best.threshold;
            go_left[r as usize] = l;
            n_left += l as usize;
        }
        for o in order.iter_mut() {
            stable_partition(&mut o[s..e], &go_left, &mut scratch);
        }
        let left = nodes.len();
        let right = left + 1;
        nodes.push(leaf.clone());
        nodes.push(leaf);
        nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            gain: best.gain,
        };
        stack.push((right, s + n_left, e, depth + 1));
        stack.push((left, s, s + n_left, depth + 1));
    }
    Tree::from_nodes_unchecked(nodes)
}

fn candidate_features(n_features: usize, splitter: Splitter, rng: Option<&mut Rng>) -> Vec<usize> {
    let mtry = match splitter {
        Splitter::Best { mtry } | Splitter::Random { mtry } => mtry.clamp(1, n_features),
    };
    if mtry == n_features {
        return (0..n_features).collect();
    }
    let rng = rng.expect("feature subsampling needs an rng");
    let mut f = index::sample(rng, n_features, mtry).into_vec();
    f.sort_unstable();
    f
}

fn stable_partition(seg: &mut [u32], go_left: &[bool], scratch: &mut Vec<u32>) {
    scratch.clear();
    let mut k = 0;
    for i in 0..seg.len() {
        let r = seg[i];
        if go_left[r as usize] {
            seg[k] = r;
            k += 1;
        } else {
            scratch.push(r);
        }
    }
    seg[k..].copy_from_slice(scratch);
}

#[inline]
fn split_gain(wl: f64, sl: f64, w: f64, s: f64) -> f64 {
    let wr = w - wl;
    let d = sl / wl - (s - sl) / wr;
    wl * wr / w * d * d
}

#[allow(clippy::too_many_arguments)]
fn best_split(
    pre: &Presorted,
    order: &[Vec<u32>],
    y: &[f64],
    counts: &[u32],
    features: &[usize],
    s: usize,
    e: usize,
    w: f64,
    sum: f64,
    params: &TreeParams,
) -> Option<Candidate> {
    let min_leaf = params.min_samples_leaf as f64;
    let mut best: Option<Candidate> = None;
    for &f in features {
        let col = &pre.cols[f];
        let rows = &order[f][s..e];
        let (mut wl, mut sl) = (0.0, 0.0);
        for k in 0..rows.len() - 1 {
            let r = rows[k] as usize;
            let c = counts[r] as f64;
            wl += c;
            sl += c * y[r];
            let v = col[r];
            let next = col[rows[k + 1] as usize];
            if next <= v || wl < min_leaf || w - wl < min_leaf {
                continue;
            }
            let gain = split_gain(wl, sl, w, sum);
            // strict comparison keeps the lowest feature, then lowest threshold
            if best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold: midpoint(v, next),
                    gain,
                });
            }
        }
    }
    best
}

#[allow(clippy::too_many_arguments)]
fn random_split(
    pre: &Presorted,
    order: &[Vec<u32>],
    y: &[f64],
    counts: &[u32],
    features: &[usize],
    s: usize,
    e: usize,
    w: f64,
    sum: f64,
    params: &TreeParams,
    rng: &mut Rng,
) -> Option<Candidate> {
    use rand::Rng as _;
    let min_leaf = params.min_samples_leaf as f64;
    let mut best: Option<Candidate> = None;
    for &f in features {
        let col = &pre.cols[f];
        let rows = &order[f][s..e];
        let lo = col[rows[0] as usize];
        let hi = col[rows[rows.len() - 1] as usize];
        if lo >= hi {
            continue;
        }
        let u: f64 = rng.random();
        let t = lo + u * (hi - lo);
        if t <= lo || t > hi {
            continue;
        }
        let (mut wl, mut sl) = (0.0, 0.0);
        for &r in rows {
            let r = r as usize;
            if col[r] >= t {
                break;
            }
            let c = counts[r] as f64;
            wl += c;
            sl += c * y[r];
        }
        if wl < min_leaf || w - wl < min_leaf {
            continue;
        }
        let gain = split_gain(wl, sl, w, sum);
        if best.as_ref().is_none_or(|b| gain > b.gain) {
            best = Some(Candidate {
                feature: f,
                threshold: t,
                gain,
            });
        }
    }
    best
}
