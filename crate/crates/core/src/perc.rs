//! Monte Carlo estimators on the lattice: crossing probabilities at a scale,
//! the finite-box percolation probability, critical sweeps, and the drivers
//! for the containment audits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsu::DisjointSetForest;
use crate::env::{sample_environment_covering, sample_two_sided, EnvironmentSample};
use crate::error::{Error, Result};
use crate::events::{
    containment_check_horizontal, containment_check_vertical, gamma_supports, horizontal_window, ladder_certificate, ladder_window,
    vertical_window, EventScratch, Geometry,
};
use crate::labels::label_intervals;
use crate::lattice::{sample_edges, EdgeField, Formulation, WindowConfig};
use crate::renewal::{DelaySpec, Renewal};
use crate::rng::{derive_stream, Stream};
use crate::scales::ScaleTable;
use crate::stats::Proportion;

const MAX_ATTEMPTS: u64 = 1_000_000;

/// Draws stationary environments covering `len` columns until `accept` holds.
fn conditioned_env(
    ren: &Renewal,
    len: u64,
    s: &mut Stream,
    accept: &dyn Fn(&EnvironmentSample) -> Result<bool>,
) -> Result<(EnvironmentSample, u64)> {
    for attempt in 1..=MAX_ATTEMPTS {
        let env = sample_environment_covering(ren, len, DelaySpec::Stationary, s)?;
        if accept(&env)? {
            return Ok((env, attempt));
        }
    }
    Err(Error::ConditioningFailed(1.0 / MAX_ATTEMPTS as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QkEstimate {
    pub k: usize,
    pub p: f64,
    /// failure frequency of `H_{0,0}^k` given `I_0^k`, `I_1^k` good
    pub h_hat: Proportion,
    /// failure frequency of `V_{0,0}^k` given `I_0^k` good
    pub v_hat: Proportion,
    pub q_hat: f64,
    pub environments_sampled: u64,
    pub conditioning: String,
}

pub fn estimate_qk(
    ren: &Renewal,
    p: f64,
    k: usize,
    trials: u64,
    seed: u64,
    scales: &ScaleTable,
    g: &Geometry,
) -> Result<QkEstimate> {
    ren.stationary()?;
    let (l, h) = (g.l[k] as usize, g.h[k] as usize);
    let window = WindowConfig::new(2 * l + 1, 2 * h + 1, Formulation::UnitColumns)?;
    let label_len = 2 * l as u64;
    let res: Vec<(bool, bool, u64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut s = derive_stream(seed, "qk", t);
            let mut sc = EventScratch::default();
            let both_good = |e: &EnvironmentSample| {
                let lab = label_intervals(e, scales, 0, k, label_len)?;
                Ok(!lab.is_bad(k, 0) && !lab.is_bad(k, 1))
            };
            let first_good = |e: &EnvironmentSample| {
                let lab = label_intervals(e, scales, 0, k, label_len)?;
                Ok(!lab.is_bad(k, 0))
            };
            let (env, a1) = conditioned_env(ren, 2 * l as u64 + 1, &mut s, &both_good)?;
            let cfg = sample_edges(&env, &window, p, &mut s)?;
            let h_fail = !sc.h(&cfg, g, 0, 0, k)?;
            let (env, a2) = conditioned_env(ren, 2 * l as u64 + 1, &mut s, &first_good)?;
            let cfg = sample_edges(&env, &window, p, &mut s)?;
            let v_fail = !sc.v(&cfg, g, 0, 0, k)?;
            Ok((h_fail, v_fail, a1 + a2))
        })
        .collect::<Result<_>>()?;
    let hf = res.iter().filter(|r| r.0).count() as u64;
    let vf = res.iter().filter(|r| r.1).count() as u64;
    let envs: u64 = res.iter().map(|r| r.2).sum();
    let rate = 2.0 * trials as f64 / envs.max(1) as f64;
    if trials > 0 && rate < 1e-4 {
        return Err(Error::ConditioningFailed(rate));
    }
    let h_hat = Proportion::new(hf, trials);
    let v_hat = Proportion::new(vf, trials);
    Ok(QkEstimate {
        k,
        p,
        q_hat: h_hat.hat.max(v_hat.hat),
        h_hat,
        v_hat,
        environments_sampled: envs,
        conditioning: "average over stationary environments accepted by rejection sampling \
                       (I_0, I_1 good for H; I_0 good for V), a lower proxy for the maximum over environments"
            .into(),
    })
}

/// Box `[-n, n]^2` of the two-sided stretched lattice, with a renewal at the
/// origin column.
fn theta_field(ren: &Renewal, n: usize, s: &mut Stream) -> Result<EdgeField> {
    let env = sample_two_sided(ren, n, s);
    let gaps = env.column_gaps(n)?;
    Ok(EdgeField::stretched(&gaps, 2 * n + 1, s.next_u64()))
}

struct BoxEdges {
    /// `(threshold, a, b)` sorted by threshold
    edges: Vec<(f64, u32, u32)>,
    origin: usize,
    boundary: usize,
    nodes: usize,
}

fn box_edges(f: &EdgeField, n: usize, sort: bool) -> BoxEdges {
    let side = 2 * n + 1;
    let mut edges = Vec::with_capacity(2 * side * side);
    for y in 0..side {
        for x in 0..side {
            let i = y * side + x;
            if y + 1 < side && f.vertical[i].is_finite() {
                edges.push((f.vertical[i], i as u32, (i + side) as u32));
            }
            if x + 1 < side && f.horizontal[i].is_finite() {
                edges.push((f.horizontal[i], i as u32, (i + 1) as u32));
            }
        }
    }
    if sort {
        edges.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    BoxEdges { edges, origin: n * side + n, boundary: side * side, nodes: side * side + 1 }
}

fn attach_boundary(d: &mut DisjointSetForest, n: usize, boundary: usize) {
    let side = 2 * n + 1;
    for t in 0..side {
        for (x, y) in [(t, 0), (t, side - 1), (0, t), (side - 1, t)] {
            d.union(boundary, y * side + x);
        }
    }
}

#[inline]
fn open_at(t: f64, p: f64) -> bool {
    t < p || p >= 1.0
}

/// Origin-to-boundary connection for each `p` of an increasing grid, from one field.
fn box_connections(f: &EdgeField, n: usize, grid: &[f64], d: &mut DisjointSetForest) -> Vec<bool> {
    let b = box_edges(f, n, grid.len() > 1);
    d.reset(b.nodes);
    attach_boundary(d, n, b.boundary);
    if let [p] = grid {
        for &(t, a, c) in &b.edges {
            if open_at(t, *p) {
                d.union(a as usize, c as usize);
            }
        }
        return vec![n == 0 || d.connected(b.origin, b.boundary)];
    }
    let mut next = 0;
    grid.iter()
        .map(|&p| {
            while next < b.edges.len() && open_at(b.edges[next].0, p) {
                let (_, a, c) = b.edges[next];
                d.union(a as usize, c as usize);
                next += 1;
            }
            n == 0 || d.connected(b.origin, b.boundary)
        })
        .collect()
}

/// Finite-box proxy for the percolation probability: the origin of the
/// two-sided stretched lattice joined to the boundary of `[-n, n]^2`.
pub fn theta_hat(ren: &Renewal, p: f64, n: usize, trials: u64, seed: u64) -> Result<Proportion> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("p = {p} must lie in [0,1]")));
    }
    let hits: Vec<bool> = (0..trials)
        .into_par_iter()
        .map_init(
            || DisjointSetForest::new(0),
            |d, t| {
                let mut s = derive_stream(seed, "theta", t);
                let f = theta_field(ren, n, &mut s)?;
                Ok(box_connections(&f, n, &[p], d)[0])
            },
        )
        .collect::<Result<_>>()?;
    Ok(Proportion::new(hits.iter().filter(|&&h| h).count() as u64, trials))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub n: usize,
    pub theta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// per size, the `p` where the curve crosses 1/2 by linear interpolation
    pub crossings: Vec<(usize, Option<f64>)>,
    /// per-sample decreases along the grid (zero by construction of the coupling)
    pub monotone_violations: u64,
}

impl SweepTable {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("ascii"))
    }

    pub fn from_csv(text: &str) -> Result<Vec<SweepRow>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        r.deserialize().map(|x| x.map_err(Error::from)).collect()
    }
}

pub fn half_crossing(points: &[(f64, f64)]) -> Option<f64> {
    for w in points.windows(2) {
        let ((p0, t0), (p1, t1)) = (w[0], w[1]);
        if t0 == 0.5 {
            return Some(p0);
        }
        if (t0 - 0.5) * (t1 - 0.5) < 0.0 {
            return Some(p0 + (0.5 - t0) * (p1 - p0) / (t1 - t0));
        }
    }
    points.last().filter(|&&(_, t)| t == 0.5).map(|&(p, _)| p)
}

/// `theta_hat(p, n)` on a grid, every `p` evaluated on the same fields.
pub fn pc_sweep(ren: &Renewal, p_grid: &[f64], sizes: &[usize], trials: u64, seed: u64) -> Result<SweepTable> {
    if p_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidSpec("p grid must be strictly increasing".into()));
    }
    let mut rows = Vec::new();
    let mut crossings = Vec::new();
    let mut monotone_violations = 0;
    for &n in sizes {
        let per: Vec<Vec<bool>> = (0..trials)
            .into_par_iter()
            .map_init(
                || DisjointSetForest::new(0),
                |d, t| {
                    let mut s = derive_stream(seed, "theta", t);
                    let f = theta_field(ren, n, &mut s)?;
                    Ok(box_connections(&f, n, p_grid, d))
                },
            )
            .collect::<Result<_>>()?;
        monotone_violations += per.iter().map(|v| v.windows(2).filter(|w| w[0] && !w[1]).count() as u64).sum::<u64>();
        let mut curve = Vec::new();
        for (ip, &p) in p_grid.iter().enumerate() {
            let k = per.iter().filter(|v| v[ip]).count() as u64;
            let pr = Proportion::new(k, trials);
            curve.push((p, pr.hat));
            rows.push(SweepRow { p, n, theta_hat: pr.hat, ci_lo: pr.lo, ci_hi: pr.hi, trials, seed });
        }
        crossings.push((n, half_crossing(&curve)));
    }
    Ok(SweepTable { rows, crossings, monotone_violations })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    /// bridged scale-k crossings imply `S_0^{k+1}`, strips imply `H_{0,0}^{k+1}`
    Horizontal,
    /// rescaled open-site crossing implies `V_{0,0}^{k+1}`
    Vertical,
    /// nested conjunction across scales implies a spanning cluster
    Ladder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub kind: AuditKind,
    pub antecedent_count: u64,
    pub violation_count: u64,
    pub consequent_count: u64,
    /// horizontal audit: antecedent samples in which some bridging path was nonempty
    pub bridged_count: u64,
    pub trials: u64,
    pub params: serde_json::Value,
}

/// Per-sample audit of one containment at toy scales. `level` is the scale k
/// for the horizontal and vertical audits and `k_hi` for the ladder (with `k_lo = 0`).
pub fn run_audit(
    kind: AuditKind,
    ren: &Renewal,
    scales: &ScaleTable,
    g: &Geometry,
    level: usize,
    p: f64,
    trials: u64,
    seed: u64,
) -> Result<AuditRecord> {
    ren.stationary()?;
    let (cols, rows) = match kind {
        AuditKind::Horizontal => horizontal_window(g, level),
        AuditKind::Vertical => vertical_window(g, level),
        AuditKind::Ladder => ladder_window(g, level),
    };
    let window = WindowConfig::new(cols, rows, Formulation::UnitColumns)?;
    let tag = match kind {
        AuditKind::Horizontal => "audit_h",
        AuditKind::Vertical => "audit_v",
        AuditKind::Ladder => "audit_ladder",
    };
    let out: Vec<(bool, bool, bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut s = derive_stream(seed, tag, t);
            match kind {
                AuditKind::Horizontal => {
                    let label_len = 2 * g.l[level + 1];
                    let parents_good = |e: &EnvironmentSample| {
                        let lab = label_intervals(e, scales, 0, level + 1, label_len)?;
                        Ok(!lab.is_bad(level + 1, 0) && !lab.is_bad(level + 1, 1))
                    };
                    let (env, _) = conditioned_env(ren, cols as u64, &mut s, &parents_good)?;
                    let lab = label_intervals(&env, scales, 0, level + 1, label_len)?;
                    let cfg = sample_edges(&env, &window, p, &mut s)?;
                    let a = containment_check_horizontal(&cfg, level, &lab, g)?;
                    let bridged = gamma_supports(level, &lab, g)?.iter().any(|x| x.is_some());
                    Ok((a.antecedent, a.s0, a.violation_strip || a.violation_h, a.antecedent && bridged))
                }
                AuditKind::Vertical => {
                    let env = sample_environment_covering(ren, cols as u64, DelaySpec::Stationary, &mut s)?;
                    let cfg = sample_edges(&env, &window, p, &mut s)?;
                    let a = containment_check_vertical(&cfg, level, g)?;
                    Ok((a.antecedent, a.consequent, a.violation, false))
                }
                AuditKind::Ladder => {
                    let env = sample_environment_covering(ren, cols as u64, DelaySpec::Stationary, &mut s)?;
                    let cfg = sample_edges(&env, &window, p, &mut s)?;
                    let a = ladder_certificate(&cfg, 0, level, g)?;
                    Ok((a.antecedent, a.consequent, a.violation, false))
                }
            }
        })
        .collect::<Result<_>>()?;
    let count = |f: fn(&(bool, bool, bool, bool)) -> bool| out.iter().filter(|x| f(x)).count() as u64;
    Ok(AuditRecord {
        kind,
        antecedent_count: count(|x| x.0),
        consequent_count: count(|x| x.1),
        violation_count: count(|x| x.2),
        bridged_count: count(|x| x.3),
        trials,
        params: serde_json::json!({
            "level": level,
            "p": p,
            "seed": seed,
            "L": g.l,
            "H": g.h,
            "window": [cols, rows],
        }),
    })
}
