//! Good/bad labels of the scale intervals `I_i^k = [i L_k, (i+1) L_k)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSample;
use crate::error::{Error, Result};
use crate::renewal::{DelaySpec, Renewal};
use crate::rng::derive_stream;
use crate::scales::ScaleTable;
use crate::stats::{wilson, Z95};

/// Bad interval indices per scale, from `k_base` to `k_top`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelGrid {
    pub k_base: usize,
    pub k_top: usize,
    /// number of complete intervals of each scale inside the window
    pub counts: Vec<u64>,
    /// sorted bad indices of each scale
    pub bad: Vec<Vec<u64>>,
}

impl LabelGrid {
    pub fn level(&self, k: usize) -> &[u64] {
        &self.bad[k - self.k_base]
    }

    pub fn is_bad(&self, k: usize, i: u64) -> bool {
        self.level(k).binary_search(&i).is_ok()
    }

    pub fn bits(&self, k: usize) -> Vec<bool> {
        let mut b = vec![false; self.counts[k - self.k_base] as usize];
        for &i in self.level(k) {
            b[i as usize] = true;
        }
        b
    }

    /// Bad children of the scale-k interval i, as indices at scale k-1.
    pub fn bad_children(&self, k: usize, i: u64, children: u64) -> &[u64] {
        let lv = self.level(k - 1);
        let lo = lv.partition_point(|&j| j < i * children);
        let hi = lv.partition_point(|&j| j < (i + 1) * children);
        &lv[lo..hi]
    }
}

/// Parent is bad iff two of its bad children are not adjacent.
fn parents(bad_children: &[u64], children: u64, n_parents: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut it = bad_children.iter().peekable();
    while let Some(&first) = it.next() {
        let parent = first / children;
        if parent >= n_parents {
            break;
        }
        let mut last = first;
        while let Some(&&j) = it.peek() {
            if j / children != parent {
                break;
            }
            last = j;
            it.next();
        }
        if last - first >= 2 {
            out.push(parent);
        }
    }
    out
}

fn base_bad(points: &[u64], len: u64, n: u64) -> Vec<u64> {
    let mut seen = vec![false; n as usize];
    for &p in points {
        let i = p / len;
        if i >= n {
            break;
        }
        seen[i as usize] = true;
    }
    (0..n).filter(|&i| !seen[i as usize]).collect()
}

fn scale_len(scales: &ScaleTable, k: usize) -> Result<u64> {
    scales
        .l_u64(k)
        .ok_or_else(|| Error::Overflow(format!("L_{k} does not fit a machine integer")))
}

fn children(scales: &ScaleTable, k: usize) -> Result<u64> {
    scales
        .children(k)
        .ok_or_else(|| Error::Overflow(format!("floor(A^{}) does not fit", k + 1)))
}

fn label_points(points: &[u64], scales: &ScaleTable, k_base: usize, k_top: usize, window: u64) -> Result<LabelGrid> {
    if k_top < k_base || k_top > scales.kmax() {
        return Err(Error::InvalidSpec(format!("scale range {k_base}..={k_top} outside table")));
    }
    let l_top = scale_len(scales, k_top)?;
    if window < l_top {
        return Err(Error::WindowTooSmall { window, required: l_top });
    }
    let mut counts = Vec::new();
    let mut bad = Vec::new();
    let lb = scale_len(scales, k_base)?;
    counts.push(window / lb);
    bad.push(base_bad(points, lb, window / lb));
    for k in k_base + 1..=k_top {
        let n = window / scale_len(scales, k)?;
        let b = parents(bad.last().unwrap(), children(scales, k)?, n);
        counts.push(n);
        bad.push(b);
    }
    Ok(LabelGrid { k_base, k_top, counts, bad })
}

pub fn label_intervals(
    env: &EnvironmentSample,
    scales: &ScaleTable,
    k_base: usize,
    k_top: usize,
    window: u64,
) -> Result<LabelGrid> {
    if !env.covers(window) {
        return Err(Error::EnvTooShort { have: env.last_point() + 1, need: window });
    }
    label_points(&env.points, scales, k_base, k_top, window)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PkEstimate {
    pub k: usize,
    pub p_hat: f64,
    pub wilson_ci: (f64, f64),
    pub successes: u64,
    pub trials: u64,
}

impl PkEstimate {
    fn new(k: usize, successes: u64, trials: u64) -> Self {
        PkEstimate {
            k,
            p_hat: successes as f64 / trials.max(1) as f64,
            wilson_ci: wilson(successes, trials, Z95),
            successes,
            trials,
        }
    }

    /// Binomial standard error at `p_hat`.
    pub fn se(&self) -> f64 {
        (self.p_hat * (1.0 - self.p_hat) / self.trials.max(1) as f64).sqrt()
    }
}

/// Renewal points in `[0, window)` under a stationary start.
fn stationary_points(ren: &Renewal, window: u64, s: &mut crate::rng::Stream, buf: &mut Vec<u64>) -> Result<()> {
    buf.clear();
    let mut x = ren.sample_delay(DelaySpec::Stationary, s)?;
    while x < window {
        buf.push(x);
        x += ren.sample_xi(s);
    }
    Ok(())
}

/// Monte Carlo estimates of `p_k = P(I_0^k bad)` for every `k` in
/// `k_base..=k_top`, one stationary window of length `L_{k_top}` per trial.
pub fn estimate_pk(
    ren: &Renewal,
    scales: &ScaleTable,
    k_top: usize,
    k_base: usize,
    trials: u64,
    seed: u64,
) -> Result<Vec<PkEstimate>> {
    ren.stationary()?;
    let window = scale_len(scales, k_top)?;
    let per_trial: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |buf, t| {
            let mut s = derive_stream(seed, "pk", t);
            stationary_points(ren, window, &mut s, buf)?;
            let g = label_points(buf, scales, k_base, k_top, window)?;
            Ok((k_base..=k_top).map(|k| g.is_bad(k, 0)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((k_base..=k_top)
        .map(|k| {
            let bad = per_trial.iter().filter(|v| v[k - k_base]).count() as u64;
            PkEstimate::new(k, bad, trials)
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllGoodEstimate {
    /// intervals required good at each scale, `ceil(8 L_k^{2/(k+1)})`
    pub counts: Vec<u64>,
    pub estimate: PkEstimate,
}

/// Estimates the probability that `I_i^k` is good for every `k` in
/// `k_base..=k_top` and every `i < ceil(8 L_k^{2/(k+1)})`.
pub fn estimate_all_good(ren: &Renewal, scales: &ScaleTable, k_base: usize, k_top: usize, trials: u64, seed: u64) -> Result<AllGoodEstimate> {
    ren.stationary()?;
    let mut counts = Vec::new();
    let mut window = 0u64;
    for k in k_base..=k_top {
        let lk = scale_len(scales, k)?;
        let n = (8.0 * (lk as f64).powf(2.0 / (k as f64 + 1.0))).ceil() as u64;
        counts.push(n);
        window = window.max(n * lk);
    }
    let l_top = scale_len(scales, k_top)?;
    // round the window up to whole top-scale intervals
    let window = window.div_ceil(l_top) * l_top;
    let good: Vec<bool> = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |buf, t| {
            let mut s = derive_stream(seed, "all_good", t);
            stationary_points(ren, window, &mut s, buf)?;
            let g = label_points(buf, scales, k_base, k_top, window)?;
            Ok((k_base..=k_top).zip(&counts).all(|(k, &n)| g.level(k).first().is_none_or(|&i| i >= n)))
        })
        .collect::<Result<_>>()?;
    let s = good.iter().filter(|&&b| b).count() as u64;
    Ok(AllGoodEstimate { counts, estimate: PkEstimate::new(k_top, s, trials) })
}
