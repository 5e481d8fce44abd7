//! Histogram tree growth shared by both boosters.

use serde::{Deserialize, Serialize};

use super::histogram::{HistLayout, HistogramSet};
use super::newton::gain_unchecked;
use crate::dataset::BinMapper;
use crate::tree::{Node, Tree};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    /// Repeatedly split the leaf with the largest gain.
    LeafWise,
    /// Split every splittable leaf of a level before moving deeper.
    DepthWise,
}

#[derive(Debug, Clone)]
pub(crate) struct GrowConfig {
    pub max_leaves: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub growth: Growth,
}

/// A grown tree with zero leaf values and the rows reaching each leaf.
pub(crate) struct Grown {
    pub tree: Tree,
    /// `(leaf node id, rows)` with rows in increasing order.
    pub leaves: Vec<(usize, Vec<usize>)>,
}

#[derive(Clone, Copy)]
struct Cand {
    feature: usize,
    bin: usize,
    gain: f64,
}

struct Open {
    node: usize,
    depth: usize,
    rows: Vec<usize>,
    /// Absent for nodes that can never be split.
    hist: Option<HistogramSet>,
    best: Option<Cand>,
}

pub(crate) struct BinnedView<'a> {
    pub mapper: &'a BinMapper,
    pub layout: &'a HistLayout,
    /// Column-major codes over all `n_rows` rows.
    pub codes: &'a [u16],
    pub n_rows: usize,
}

impl BinnedView<'_> {
    fn code(&self, f: usize, r: usize) -> u16 {
        self.codes[f * self.n_rows + r]
    }
}

fn splittable(cfg: &GrowConfig, n_rows: usize, depth: usize) -> bool {
    n_rows >= 2 * cfg.min_samples_leaf.max(1) && !cfg.max_depth.is_some_and(|d| depth >= d)
}

fn find_best(v: &BinnedView, cfg: &GrowConfig, o: &Open) -> Option<Cand> {
    let hist = o.hist.as_ref()?;
    let min_leaf = cfg.min_samples_leaf.max(1) as u32;
    let lambda = cfg.lambda;
    // node totals, identical for every feature up to rounding
    let first = v.layout.range(0);
    let g_tot: f64 = hist.cells[first.clone()].iter().map(|c| c.g).sum();
    let h_tot: f64 = hist.cells[first].iter().map(|c| c.h).sum();
    let c_tot = o.rows.len() as u32;
    // splits are ranked by the children's score gl²/(hl+λ) + gr²/(hr+λ)
    // alone, since the parent term and gamma are shared; scores are kept as
    // num/den and compared by cross-multiplication (den > 0)
    let mut best: Option<(usize, usize)> = None;
    let (mut best_num, mut best_den) = (0.0, 1.0);
    for f in 0..v.layout.n_features() {
        let range = v.layout.range(f);
        if range.len() < 2 {
            continue;
        }
        let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0u32);
        for (k, b) in range.clone().take(range.len() - 1).enumerate() {
            let cell = hist.cells[b];
            if cell.count == 0 {
                continue;
            }
            gl += cell.g;
            hl += cell.h;
            cl += cell.count;
            if cl < min_leaf {
                continue;
            }
            if c_tot - cl < min_leaf {
                break;
            }
            let (gr, dl, dr) = (g_tot - gl, hl + lambda, h_tot - hl + lambda);
            let num = gl * gl * dr + gr * gr * dl;
            let den = dl * dr;
            if best.is_none() || num * best_den > best_num * den {
                (best_num, best_den) = (num, den);
                best = Some((f, k));
            }
        }
    }
    let (feature, bin) = best?;
    let range = v.layout.range(feature);
    let (mut gl, mut hl) = (0.0, 0.0);
    for b in range.start..=range.start + bin {
        gl += hist.cells[b].g;
        hl += hist.cells[b].h;
    }
    let gain = gain_unchecked(gl, hl, g_tot - gl, h_tot - hl, lambda, cfg.gamma);
    (gain > 0.0).then_some(Cand { feature, bin, gain })
}

/// Grows one tree over `rows` (increasing order) from per-row `g` and `h`.
pub(crate) fn grow(v: &BinnedView, rows: Vec<usize>, g: &[f64], h: &[f64], cfg: &GrowConfig) -> Grown {
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        n_samples: rows.len(),
    }];
    let hist = splittable(cfg, rows.len(), 0).then(|| HistogramSet::build(v.layout, v.codes, v.n_rows, &rows, g, h));
    let mut root = Open {
        node: 0,
        depth: 0,
        rows,
        hist,
        best: None,
    };
    root.best = find_best(v, cfg, &root);
    let mut done: Vec<(usize, Vec<usize>)> = Vec::new();
    let max_leaves = cfg.max_leaves.max(1);
    let mut n_leaves = 1;

    match cfg.growth {
        Growth::LeafWise => {
            let mut open = vec![root];
            while n_leaves < max_leaves {
                let pick = open
                    .iter()
                    .enumerate()
                    .filter_map(|(i, o)| o.best.map(|c| (i, c.gain, o.node)))
                    .max_by(|a, b| a.1.total_cmp(&b.1).then(b.2.cmp(&a.2)));
                let Some((i, _, _)) = pick else { break };
                let parent = open.swap_remove(i);
                let (l, r) = split(v, cfg, &mut nodes, parent, g, h);
                open.push(l);
                open.push(r);
                n_leaves += 1;
            }
            done.extend(open.into_iter().map(|o| (o.node, o.rows)));
        }
        Growth::DepthWise => {
            let mut level = vec![root];
            while !level.is_empty() {
                let mut next = Vec::new();
                for o in level {
                    if o.best.is_some() && n_leaves < max_leaves {
                        let (l, r) = split(v, cfg, &mut nodes, o, g, h);
                        next.push(l);
                        next.push(r);
                        n_leaves += 1;
                    } else {
                        done.push((o.node, o.rows));
                    }
                }
                level = next;
            }
        }
    }
    done.sort_by_key(|(id, _)| *id);
    Grown {
        tree: Tree::from_nodes_unchecked(nodes),
        leaves: done,
    }
}

fn split(v: &BinnedView, cfg: &GrowConfig, nodes: &mut Vec<Node>, parent: Open, g: &[f64], h: &[f64]) -> (Open, Open) {
    let c = parent.best.expect("split requires a candidate");
    let (lrows, rrows): (Vec<usize>, Vec<usize>) =
        parent.rows.iter().partition(|&&r| v.code(c.feature, r) as usize <= c.bin);
    let depth = parent.depth + 1;
    let left_small = lrows.len() <= rrows.len();
    let (small_rows, big_rows) = if left_small { (&lrows, &rrows) } else { (&rrows, &lrows) };
    // the smaller child is built directly; the larger one is the parent's
    // buffer with the smaller child taken out
    let small = splittable(cfg, small_rows.len(), depth)
        .then(|| HistogramSet::build(v.layout, v.codes, v.n_rows, small_rows, g, h));
    let big = splittable(cfg, big_rows.len(), depth).then(|| {
        let mut p = parent.hist.expect("a split node has a histogram");
        match &small {
            Some(s) => p.subtract_in_place(s),
            None => p.remove_rows(v.layout, v.codes, v.n_rows, small_rows, g, h),
        }
        p
    });
    let (lhist, rhist) = if left_small { (small, big) } else { (big, small) };
    let left = nodes.len();
    let right = left + 1;
    nodes.push(Node::Leaf {
        value: 0.0,
        n_samples: lrows.len(),
    });
    nodes.push(Node::Leaf {
        value: 0.0,
        n_samples: rrows.len(),
    });
    nodes[parent.node] = Node::Split {
        feature: c.feature,
        threshold: v.mapper.edges(c.feature)[c.bin],
        left,
        right,
        gain: c.gain,
    };
    let mut l = Open {
        node: left,
        depth,
        rows: lrows,
        hist: lhist,
        best: None,
    };
    let mut r = Open {
        node: right,
        depth,
        rows: rrows,
        hist: rhist,
        best: None,
    };
    l.best = find_best(v, cfg, &l);
    r.best = find_best(v, cfg, &r);
    (l, r)
}
