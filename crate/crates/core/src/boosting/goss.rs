use rand::seq::index;

use crate::error::{Error, Result};
use crate::rng;

/// Gradient-based one-side sampling.
///
/// Keeps the `ceil(a*n)` rows with the largest `|g|` at weight 1 and
/// `ceil(b*n)` rows drawn uniformly from the rest at weight `(1-a)/b`.
/// Returned rows are in increasing index order.
pub fn goss_sample(abs_g: &[f64], a: f64, b: f64, seed: u64) -> Result<(Vec<usize>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::invalid("goss", "fractions must lie in [0, 1]"));
    }
    if a + b > 1.0 + 1e-12 {
        return Err(Error::invalid("goss", "top + random fractions exceed 1"));
    }
    let n = abs_g.len();
    if a >= 1.0 {
        return Ok(((0..n).collect(), vec![1.0; n]));
    }
    if b <= 0.0 {
        return Err(Error::invalid("goss_rand_fraction", "must be > 0 when the top fraction is below 1"));
    }
    let n_top = ceil_count(a, n);
    let mut by_mag: Vec<usize> = (0..n).collect();
    by_mag.sort_by(|&i, &j| abs_g[j].total_cmp(&abs_g[i]).then(i.cmp(&j)));
    let rest = &by_mag[n_top..];
    let n_rand = ceil_count(b, n).min(rest.len());
    let mut r = rng::stream(seed, 0x6055);
    let picked = index::sample(&mut r, rest.len(), n_rand);

    let w_small = (1.0 - a) / b;
    let mut weight = vec![0.0; n];
    for &i in &by_mag[..n_top] {
        weight[i] = 1.0;
    }
    for k in picked.iter() {
        weight[rest[k]] = w_small;
    }
    let rows: Vec<usize> = (0..n).filter(|&i| weight[i] > 0.0).collect();
    let w = rows.iter().map(|&i| weight[i]).collect();
    Ok((rows, w))
}

fn ceil_count(f: f64, n: usize) -> usize {
    ((f * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}
