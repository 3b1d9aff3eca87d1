//! Independent reference implementations used by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{HashMap, HashSet, VecDeque};

use num_bigint::BigUint;
use perclab::lattice::EdgeConfig;

/// Vertex-level BFS between the two sides of `[x0,x1]x[y0,y1]`, using only
/// edges with both ends in the rect, minus top-row horizontals and
/// right-column verticals.
pub fn bfs_crossing(cfg: &EdgeConfig, x0: usize, x1: usize, y0: usize, y1: usize, horizontal: bool) -> bool {
    let inside = |x: usize, y: usize| x >= x0 && x <= x1 && y >= y0 && y <= y1;
    let edge_ok = |a: (usize, usize), b: (usize, usize)| -> bool {
        if !inside(a.0, a.1) || !inside(b.0, b.1) {
            return false;
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if lo.1 == hi.1 {
            // horizontal lo -> lo + e1
            lo.1 != y1 && cfg.h(lo.0, lo.1)
        } else {
            lo.0 != x1 && cfg.v(lo.0, lo.1)
        }
    };
    let start: Vec<(usize, usize)> = if horizontal {
        (y0..=y1).map(|y| (x0, y)).collect()
    } else {
        (x0..=x1).map(|x| (x, y0)).collect()
    };
    let goal = |v: (usize, usize)| if horizontal { v.0 == x1 } else { v.1 == y1 };
    let mut seen: HashSet<(usize, usize)> = start.iter().copied().collect();
    let mut q: VecDeque<(usize, usize)> = start.into_iter().collect();
    while let Some(v) = q.pop_front() {
        if goal(v) {
            return true;
        }
        let mut nb = vec![(v.0 + 1, v.1), (v.0, v.1 + 1)];
        if v.0 > 0 {
            nb.push((v.0 - 1, v.1));
        }
        if v.1 > 0 {
            nb.push((v.0, v.1 - 1));
        }
        for w in nb {
            if edge_ok(v, w) && seen.insert(w) {
                q.push_back(w);
            }
        }
    }
    false
}

/// Recursive bad-interval oracle. `lens[k]` is the length of a scale-k
/// interval and `kids[k]` the number of scale-(k-1) children.
pub struct LabelOracle<'a> {
    pub renewals: HashSet<u64>,
    pub lens: &'a [u64],
    pub kids: &'a [u64],
    pub k_base: usize,
    memo: HashMap<(usize, u64), bool>,
}

impl<'a> LabelOracle<'a> {
    pub fn new(points: &[u64], lens: &'a [u64], kids: &'a [u64], k_base: usize) -> Self {
        LabelOracle { renewals: points.iter().copied().collect(), lens, kids, k_base, memo: HashMap::new() }
    }

    pub fn bad(&mut self, k: usize, i: u64) -> bool {
        if let Some(&b) = self.memo.get(&(k, i)) {
            return b;
        }
        let b = if k == self.k_base {
            let l = self.lens[k];
            !(i * l..(i + 1) * l).any(|x| self.renewals.contains(&x))
        } else {
            let n = self.kids[k];
            let bad: Vec<u64> = (0..n).filter(|&j| self.bad(k - 1, i * n + j)).collect();
            bad.iter().any(|&a| bad.iter().any(|&b| b > a + 1))
        };
        self.memo.insert((k, i), b);
        b
    }
}

/// Scales for an integer A: `L_k = A^{(k+1)(k+2)/2}`.
pub fn integer_scales(a: u32, kmax: usize) -> Vec<BigUint> {
    (0..=kmax).map(|k| BigUint::from(a).pow(((k + 1) * (k + 2) / 2) as u32)).collect()
}

/// Stationary delay of a finite law, straight from `P(xi > k) / E xi`.
pub fn lambda_oracle(law: &[(u64, f64)]) -> Vec<f64> {
    let mean: f64 = law.iter().map(|&(v, p)| v as f64 * p).sum();
    let max = law.iter().map(|l| l.0).max().unwrap();
    (0..max).map(|k| law.iter().filter(|l| l.0 > k).map(|l| l.1).sum::<f64>() / mean).collect()
}

/// One Z-chain step as a transition list.
fn z_next(law: &[(u64, f64)], z: u64) -> Vec<(u64, f64)> {
    if z > 0 {
        vec![(z - 1, 1.0)]
    } else {
        law.iter().map(|&(v, p)| (v - 1, p)).collect()
    }
}

/// Exact law of the coupling time `min{n >= 1: Z^a_n = Z^b_n = 0}` for
/// independent chains started at `start_a = m` and Z^b from `delay_b`, up to `horizon`.
pub fn coupling_law(law: &[(u64, f64)], start_a: u64, delay_b: &[f64], horizon: usize) -> Vec<f64> {
    let mut dist: HashMap<(u64, u64), f64> = HashMap::new();
    for (b, &p) in delay_b.iter().enumerate() {
        if p > 0.0 {
            *dist.entry((start_a, b as u64)).or_default() += p;
        }
    }
    let mut out = vec![0.0; horizon + 1];
    for n in 1..=horizon {
        let mut next: HashMap<(u64, u64), f64> = HashMap::new();
        for (&(a, b), &p) in &dist {
            for (a2, pa) in z_next(law, a) {
                for (b2, pb) in z_next(law, b) {
                    *next.entry((a2, b2)).or_default() += p * pa * pb;
                }
            }
        }
        out[n] = next.remove(&(0, 0)).unwrap_or(0.0);
        dist = next;
    }
    out
}

/// Exact `P(Z_i = 0)`, `P(Z_j = 0)`, `P(Z_i = 0, Z_j = 0)` for a stationary start, `i < j`.
pub fn zero_pair(law: &[(u64, f64)], i: usize, j: usize) -> (f64, f64, f64) {
    let lambda = lambda_oracle(law);
    let evolve = |d: &HashMap<u64, f64>, steps: usize| {
        let mut d = d.clone();
        for _ in 0..steps {
            let mut n: HashMap<u64, f64> = HashMap::new();
            for (&z, &p) in &d {
                for (z2, q) in z_next(law, z) {
                    *n.entry(z2).or_default() += p * q;
                }
            }
            d = n;
        }
        d
    };
    let start: HashMap<u64, f64> = lambda.iter().enumerate().map(|(k, &p)| (k as u64, p)).collect();
    let at_i = evolve(&start, i);
    let pi = at_i.get(&0).copied().unwrap_or(0.0);
    let pj = evolve(&start, j).get(&0).copied().unwrap_or(0.0);
    let cond = evolve(&HashMap::from([(0u64, 1.0)]), j - i).get(&0).copied().unwrap_or(0.0);
    (pi, pj, pi * cond)
}

/// Every rect with `1 <= w, h <= max` placed at (1,1) inside a larger window,
/// over every configuration of its own edges, with every other window edge
/// open. Returns (configurations checked, mismatches).
pub fn crossing_exhaustive(max: usize) -> (u64, u64) {
    use perclab::crossing::{crossing_h, crossing_v, Rect};
    let mut checked = 0;
    let mut bad = 0;
    for w in 1..=max {
        for h in 1..=max {
            let (cols, rows) = (w + 3, h + 3);
            let rect = Rect::new(1, 1 + w, 1, 1 + h).unwrap();
            let mut own = Vec::new();
            for y in 1..1 + h {
                for x in 1..1 + w {
                    own.push((true, x, y));
                    own.push((false, x, y));
                }
            }
            let mut cfg = EdgeConfig::closed(cols, rows);
            cfg.vertical_open.iter_mut().for_each(|b| *b = true);
            cfg.horizontal_open.iter_mut().for_each(|b| *b = true);
            for bits in 0u64..(1 << own.len()) {
                for (n, &(is_h, x, y)) in own.iter().enumerate() {
                    let open = bits >> n & 1 == 1;
                    if is_h {
                        cfg.set_h(x, y, open);
                    } else {
                        cfg.set_v(x, y, open);
                    }
                }
                let oh = bfs_crossing(&cfg, 1, 1 + w, 1, 1 + h, true);
                let ov = bfs_crossing(&cfg, 1, 1 + w, 1, 1 + h, false);
                checked += 1;
                bad += (crossing_h(&cfg, &rect).unwrap() != oh) as u64 + (crossing_v(&cfg, &rect).unwrap() != ov) as u64;
            }
        }
    }
    (checked, bad)
}

/// Open-site bottom-to-top path with nearest-neighbour steps, by DFS.
pub fn site_crossing(open: &[bool], width: usize, height: usize) -> bool {
    let mut seen = vec![false; open.len()];
    let mut stack: Vec<usize> = (0..width).filter(|&i| open[i]).collect();
    for &s in &stack {
        seen[s] = true;
    }
    while let Some(v) = stack.pop() {
        let (i, j) = (v % width, v / width);
        if j + 1 == height {
            return true;
        }
        let mut nb = vec![];
        if i > 0 {
            nb.push(v - 1);
        }
        if i + 1 < width {
            nb.push(v + 1);
        }
        if j > 0 {
            nb.push(v - width);
        }
        if j + 1 < height {
            nb.push(v + width);
        }
        for u in nb {
            if open[u] && !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    false
}

/// Per-sample decreases of crossing indicators along `p = 0.1, ..., 0.9` on
/// shared uniform fields over a random environment. Returns (samples, violations).
pub fn monotone_violations(fields: u64, seed: u64) -> (u64, u64) {
    use perclab::crossing::{crossing_h, crossing_v, Rect};
    use perclab::env::sample_environment;
    use perclab::lattice::{EdgeField, Formulation, WindowConfig};
    use perclab::pmf::{build_pmf, DistributionSpec};
    use perclab::renewal::{DelaySpec, Renewal};
    let ren = Renewal::new(build_pmf(&DistributionSpec::UniformRange { a: 1, b: 3 }).unwrap());
    let rects = [Rect::new(0, 12, 0, 8).unwrap(), Rect::new(2, 7, 1, 11).unwrap(), Rect::new(0, 15, 0, 11).unwrap()];
    let mut violations = 0;
    for t in 0..fields {
        let mut s = perclab::rng::derive_stream(seed, "monotone", t);
        let env = sample_environment(&ren, 16, DelaySpec::Fixed { m: 0 }, &mut s).unwrap();
        for form in [Formulation::UnitColumns, Formulation::Stretched] {
            let w = WindowConfig::new(16, 12, form).unwrap();
            let f = EdgeField::new(&env, &w, s.next_u64()).unwrap();
            let mut prev = vec![false; 2 * rects.len()];
            for ip in 1..=9 {
                let cfg = f.threshold(ip as f64 / 10.0);
                for (n, r) in rects.iter().enumerate() {
                    let now = [crossing_h(&cfg, r).unwrap(), crossing_v(&cfg, r).unwrap()];
                    for (m, &b) in now.iter().enumerate() {
                        violations += (prev[2 * n + m] && !b) as u64;
                        prev[2 * n + m] = b;
                    }
                }
            }
        }
    }
    (fields, violations)
}
