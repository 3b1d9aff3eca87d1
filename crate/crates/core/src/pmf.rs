//! Integer interarrival laws with an explicit head and a parametric tail.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ratio_tail_sum, LogPowerTerm, SeriesValue};

const SERIES_TOL: f64 = 1e-14;

/// Parametric tail `P(k)` for `k >= start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form")]
pub enum TailForm {
    None,
    /// `scale * ratio^(k - start)`
    Geometric { start: u64, ratio: f64, scale: f64 },
    /// `scale * k^(-exponent)`
    Power { start: u64, exponent: f64, scale: f64 },
    /// `scale * k^-2 * exp(-c sqrt(ln k)) * (ln k)^-(1+eps)`
    BorderlineLog { start: u64, c: f64, eps: f64, scale: f64 },
}

impl TailForm {
    pub fn start(&self) -> Option<u64> {
        match *self {
            TailForm::None => None,
            TailForm::Geometric { start, .. }
            | TailForm::Power { start, .. }
            | TailForm::BorderlineLog { start, .. } => Some(start),
        }
    }

    fn log_power(&self, j: f64, w: f64) -> Option<LogPowerTerm> {
        match *self {
            TailForm::Power { exponent, scale, .. } => {
                Some(LogPowerTerm { coef: scale, a: j - exponent, b: w, d: 0.0 })
            }
            TailForm::BorderlineLog { c, eps, scale, .. } => {
                Some(LogPowerTerm { coef: scale, a: j - 2.0, b: w - c, d: 1.0 + eps })
            }
            _ => None,
        }
    }

    pub fn mass(&self, k: u64) -> f64 {
        match *self {
            TailForm::None => 0.0,
            TailForm::Geometric { start, ratio, scale } => {
                if k < start {
                    0.0
                } else {
                    scale * ratio.powf((k - start) as f64)
                }
            }
            _ => {
                let s = self.start().unwrap();
                if k < s {
                    0.0
                } else {
                    self.log_power(0.0, 0.0).unwrap().eval(k as f64)
                }
            }
        }
    }

    /// `sum_{k >= n} k^j F_w(k) P(k)` over the tail, `None` if divergent.
    fn series(&self, n: u64, j: f64, w: f64) -> Option<SeriesValue> {
        let start = match self.start() {
            None => return Some(SeriesValue::exact(0.0)),
            Some(s) => s,
        };
        let n = n.max(start);
        let weight = |k: u64| (k as f64).powf(j) * crate::renewal::fc(w, k as f64);
        match *self {
            TailForm::Geometric { .. } => {
                ratio_tail_sum(|k| weight(k) * self.mass(k), n, SERIES_TOL)
            }
            _ => {
                let term = self.log_power(j, w).unwrap();
                if !term.converges() {
                    return None;
                }
                let mut head = SeriesValue::exact(0.0);
                let mut from = n;
                if from < 2 {
                    head.value += weight(1) * self.mass(1);
                    from = 2;
                }
                // deep tails (sampling, delay tables) need less relative accuracy
                let tol = if from < 10_000 { SERIES_TOL } else { 1e-11 };
                Some(head + term.tail_sum(from, tol)?)
            }
        }
    }
}

/// Law of a positive integer random variable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct IntegerPmf {
    head: Vec<(u64, f64)>,
    tail: TailForm,
    suffix0: Vec<f64>,
    tail_total: f64,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    head: Vec<(u64, f64)>,
    tail: TailForm,
}

impl TryFrom<PmfRepr> for IntegerPmf {
    type Error = Error;
    fn try_from(r: PmfRepr) -> Result<Self> {
        IntegerPmf::new(r.head, r.tail)
    }
}

impl From<IntegerPmf> for PmfRepr {
    fn from(p: IntegerPmf) -> Self {
        PmfRepr { head: p.head, tail: p.tail }
    }
}

impl IntegerPmf {
    pub fn new(head: Vec<(u64, f64)>, tail: TailForm) -> Result<Self> {
        let pmf = Self::unchecked(head, tail)?;
        let total = pmf.suffix0.first().copied().unwrap_or(0.0) + pmf.tail_total;
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("total mass {total} differs from 1")));
        }
        Ok(pmf)
    }

    fn unchecked(head: Vec<(u64, f64)>, tail: TailForm) -> Result<Self> {
        for w in head.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::InvalidSpec("head values must increase strictly".into()));
            }
        }
        if head.iter().any(|&(v, p)| v == 0 || !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidSpec("head needs values >= 1 and finite probs >= 0".into()));
        }
        if let Some(s) = tail.start() {
            if s == 0 || head.last().is_some_and(|&(v, _)| v >= s) {
                return Err(Error::InvalidSpec("tail must start after the head".into()));
            }
        }
        match tail {
            TailForm::Geometric { ratio, scale, .. } if !(0.0..1.0).contains(&ratio) || scale < 0.0 => {
                return Err(Error::InvalidSpec("geometric tail needs 0 <= ratio < 1".into()))
            }
            TailForm::Power { exponent, .. } if exponent <= 1.0 => {
                return Err(Error::NonSummable(format!("power tail exponent {exponent} <= 1")))
            }
            TailForm::BorderlineLog { eps, .. } if eps <= 0.0 => {
                return Err(Error::NonSummable("borderline tail needs eps > 0".into()))
            }
            _ => {}
        }
        let mut suffix0 = vec![0.0; head.len() + 1];
        for i in (0..head.len()).rev() {
            suffix0[i] = suffix0[i + 1] + head[i].1;
        }
        let tail_total = tail
            .series(1, 0.0, 0.0)
            .ok_or_else(|| Error::NonSummable("tail mass".into()))?
            .value;
        Ok(IntegerPmf { head, tail, suffix0, tail_total })
    }

    /// Builds a pmf from unnormalized head weights.
    pub fn from_weights(weights: &[(u64, f64)]) -> Result<Self> {
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidSpec("weights sum to zero".into()));
        }
        let mut head: Vec<(u64, f64)> = weights.iter().map(|&(v, w)| (v, w / total)).collect();
        head.retain(|x| x.1 > 0.0);
        IntegerPmf::new(head, TailForm::None)
    }

    pub fn head(&self) -> &[(u64, f64)] {
        &self.head
    }

    pub fn tail(&self) -> &TailForm {
        &self.tail
    }

    pub fn mass(&self, k: u64) -> f64 {
        if let Ok(i) = self.head.binary_search_by_key(&k, |x| x.0) {
            return self.head[i].1;
        }
        self.tail.mass(k)
    }

    /// Smallest value with positive mass.
    pub fn min_support(&self) -> u64 {
        self.head
            .iter()
            .find(|x| x.1 > 0.0)
            .map(|x| x.0)
            .or(self.tail.start())
            .unwrap_or(1)
    }

    /// Largest value with positive mass, `None` for infinite support.
    pub fn max_support(&self) -> Option<u64> {
        match self.tail {
            TailForm::None => self.head.iter().rev().find(|x| x.1 > 0.0).map(|x| x.0),
            _ => None,
        }
    }

    /// The first `n` support atoms in increasing order.
    pub fn atoms(&self, n: usize) -> Vec<u64> {
        let mut out: Vec<u64> = self.head.iter().filter(|x| x.1 > 0.0).map(|x| x.0).take(n).collect();
        if let Some(s) = self.tail.start() {
            let mut k = s;
            while out.len() < n {
                if self.tail.mass(k) > 0.0 {
                    out.push(k);
                }
                k += 1;
                if k > s + 1_000_000 {
                    break;
                }
            }
        }
        out
    }

    /// `sum_{k >= n} k^j F_w(k) P(k)`, `None` when the series diverges.
    pub fn series(&self, n: u64, j: f64, w: f64) -> Option<SeriesValue> {
        let idx = self.head.partition_point(|x| x.0 < n);
        let mut head = 0.0;
        for &(v, p) in &self.head[idx..] {
            head += (v as f64).powf(j) * crate::renewal::fc(w, v as f64) * p;
        }
        Some(SeriesValue::exact(head) + self.tail.series(n, j, w)?)
    }

    /// `P(xi >= n)`.
    pub fn tail_mass(&self, n: u64) -> f64 {
        let idx = self.head.partition_point(|x| x.0 < n);
        let head = self.suffix0[idx];
        let tail = match self.tail.start() {
            None => 0.0,
            Some(s) if n <= s => self.tail_total,
            Some(_) => self.tail.series(n, 0.0, 0.0).map(|s| s.value).unwrap_or(0.0),
        };
        head + tail
    }

    /// `sum_{k >= n} k P(k)`; infinite when the mean diverges.
    pub fn tail_first_moment(&self, n: u64) -> f64 {
        self.series(n, 1.0, 0.0).map(|s| s.value).unwrap_or(f64::INFINITY)
    }

    /// Inverse-transform sampler.
    pub fn sampler(&self) -> Sampler {
        Sampler::new(self)
    }

    /// CSV rows `value,prob`, tail listed until the remaining mass is below `cut`.
    pub fn to_csv(&self, cut: f64) -> String {
        let mut s = String::from("value,prob\n");
        let last = match self.tail.start() {
            None => self.head.last().map(|x| x.0).unwrap_or(0),
            Some(_) => {
                let mut k = self.tail.start().unwrap();
                while self.tail_mass(k) > cut && k < 1_000_000 {
                    k = (k + 1).max(k * 11 / 10);
                }
                k
            }
        };
        for v in 1..=last {
            let p = self.mass(v);
            if p > 0.0 {
                s.push_str(&format!("{v},{p:e}\n"));
            }
        }
        s
    }

    /// Parses `value,prob` CSV into a head-only pmf.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let mut head = Vec::new();
        for rec in rdr.deserialize() {
            let (v, p): (u64, f64) = rec?;
            head.push((v, p));
        }
        IntegerPmf::new(head, TailForm::None)
    }
}

/// Interarrival law families accepted in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family")]
pub enum DistributionSpec {
    Deterministic { d: u64 },
    UniformRange { a: u64, b: u64 },
    Zeta { s: f64, cutoff: u64 },
    BorderlineLog { c: f64, eps: f64, cutoff: u64 },
    /// Explicit finite law given by unnormalized weights.
    Table { values: Vec<u64>, weights: Vec<f64> },
}

fn borderline_unnormalized(c: f64, eps: f64, k: u64) -> f64 {
    let l = (k as f64).ln();
    (k as f64).powi(-2) * (-c * l.sqrt()).exp() * l.powf(-(1.0 + eps))
}

/// Normalizer `sum_{k>=3} k^-2 e^{-c sqrt(ln k)} (ln k)^-(1+eps)` with its error bound.
pub fn borderline_normalizer(c: f64, eps: f64) -> SeriesValue {
    LogPowerTerm { coef: 1.0, a: -2.0, b: -c, d: 1.0 + eps }
        .tail_sum(3, 1e-15)
        .expect("borderline series converges for eps > 0")
}

/// `zeta(s)` with its error bound.
pub fn zeta(s: f64) -> SeriesValue {
    SeriesValue::exact(1.0)
        + LogPowerTerm { coef: 1.0, a: -s, b: 0.0, d: 0.0 }.tail_sum(2, 1e-15).expect("s > 1")
}

pub fn build_pmf(spec: &DistributionSpec) -> Result<IntegerPmf> {
    match spec {
        &DistributionSpec::Deterministic { d } => {
            if d < 1 {
                return Err(Error::InvalidSpec("deterministic value must be >= 1".into()));
            }
            IntegerPmf::new(vec![(d, 1.0)], TailForm::None)
        }
        &DistributionSpec::UniformRange { a, b } => {
            if a < 1 || a > b {
                return Err(Error::InvalidSpec(format!("uniform range needs 1 <= a <= b, got {a}, {b}")));
            }
            let n = (b - a + 1) as f64;
            IntegerPmf::new((a..=b).map(|v| (v, 1.0 / n)).collect(), TailForm::None)
        }
        &DistributionSpec::Zeta { s, cutoff } => {
            if !(s > 1.0) {
                return Err(Error::NonSummable(format!("zeta exponent {s} <= 1")));
            }
            if s <= 2.0 {
                return Err(Error::InvalidSpec(format!("zeta exponent {s} <= 2 gives an infinite mean")));
            }
            if cutoff < 1 {
                return Err(Error::InvalidSpec("cutoff must be >= 1".into()));
            }
            let z = zeta(s).value;
            let head = (1..cutoff).map(|k| (k, (k as f64).powf(-s) / z)).collect();
            IntegerPmf::new(head, TailForm::Power { start: cutoff, exponent: s, scale: 1.0 / z })
        }
        &DistributionSpec::BorderlineLog { c, eps, cutoff } => {
            if !(c >= 0.0) || !c.is_finite() {
                return Err(Error::InvalidSpec(format!("borderline c = {c} must be >= 0")));
            }
            if !(eps > 0.0) {
                return Err(Error::InvalidSpec(format!("borderline eps = {eps} must be > 0")));
            }
            if cutoff < 3 {
                return Err(Error::InvalidSpec("borderline cutoff must be >= 3".into()));
            }
            let z = borderline_normalizer(c, eps).value;
            let head = (3..cutoff).map(|k| (k, borderline_unnormalized(c, eps, k) / z)).collect();
            IntegerPmf::new(head, TailForm::BorderlineLog { start: cutoff, c, eps, scale: 1.0 / z })
        }
        DistributionSpec::Table { values, weights } => {
            if values.len() != weights.len() || values.is_empty() {
                return Err(Error::InvalidSpec("table needs matching nonempty values and weights".into()));
            }
            if weights.iter().any(|w| !(*w >= 0.0)) {
                return Err(Error::InvalidSpec("table weights must be >= 0".into()));
            }
            let mut pairs: Vec<(u64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
            pairs.sort_by_key(|x| x.0);
            IntegerPmf::from_weights(&pairs)
        }
    }
}

/// Inverse-transform sampler: tabulated CDF with a guide table, and a
/// bisection on the tail mass beyond the table.
#[derive(Clone, Debug)]
pub struct Sampler {
    values: Vec<u64>,
    cdf: Vec<f64>,
    guide: Vec<u32>,
    pmf: Option<IntegerPmf>,
    table_end: u64,
}

const TABLE_TAIL: f64 = 1e-13;
const TABLE_CAP: u64 = 1 << 20;

impl Sampler {
    fn new(pmf: &IntegerPmf) -> Self {
        let mut values = Vec::new();
        let mut probs = Vec::new();
        for &(v, p) in &pmf.head {
            if p > 0.0 {
                values.push(v);
                probs.push(p);
            }
        }
        let mut table_end = pmf.head.last().map(|x| x.0 + 1).unwrap_or(1);
        let mut infinite = false;
        if let Some(s) = pmf.tail.start() {
            infinite = true;
            let mut k = s;
            let mut remaining = pmf.tail_total;
            while remaining > TABLE_TAIL && k - s < TABLE_CAP {
                let p = pmf.tail.mass(k);
                values.push(k);
                probs.push(p);
                remaining -= p;
                k += 1;
            }
            table_end = k;
        }
        Sampler::from_table(values, probs, if infinite { Some(pmf.clone()) } else { None }, table_end)
    }

    /// Sampler over a finite table of values and masses (masses sum to one).
    pub fn finite(values: Vec<u64>, probs: Vec<f64>) -> Self {
        let end = values.last().map(|v| v + 1).unwrap_or(0);
        Sampler::from_table(values, probs, None, end)
    }

    fn from_table(values: Vec<u64>, probs: Vec<f64>, pmf: Option<IntegerPmf>, table_end: u64) -> Self {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        if pmf.is_none() {
            if let Some(last) = cdf.last_mut() {
                *last = f64::INFINITY;
            }
        }
        let g = cdf.len().max(1);
        let mut guide = vec![0u32; g];
        let mut i = 0usize;
        for (j, slot) in guide.iter_mut().enumerate() {
            let t = j as f64 / g as f64;
            while i + 1 < cdf.len() && cdf[i] <= t {
                i += 1;
            }
            *slot = i as u32;
        }
        Sampler { values, cdf, guide, pmf, table_end }
    }

    /// Smallest `k` with `P(xi <= k) > u`.
    #[inline]
    pub fn quantile(&self, u: f64) -> u64 {
        let g = self.guide.len();
        let mut i = self.guide[((u * g as f64) as usize).min(g - 1)] as usize;
        while i < self.cdf.len() && self.cdf[i] <= u {
            i += 1;
        }
        if i < self.cdf.len() {
            return self.values[i];
        }
        self.tail_quantile(u)
    }

    #[cold]
    fn tail_quantile(&self, u: f64) -> u64 {
        let pmf = self.pmf.as_ref().expect("finite support covers [0,1)");
        let target = 1.0 - u;
        // P(xi <= k) > u  <=>  P(xi >= k+1) < 1 - u
        let mut lo = self.table_end;
        let mut hi = lo.max(2) * 2;
        while pmf.tail_mass(hi + 1) >= target {
            lo = hi;
            hi = hi.saturating_mul(2);
            if hi > u64::MAX / 4 {
                return hi;
            }
        }
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if pmf.tail_mass(mid + 1) < target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    #[inline]
    pub fn sample(&self, stream: &mut crate::rng::Stream) -> u64 {
        self.quantile(stream.uniform())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_specs() {
        let d = build_pmf(&DistributionSpec::Deterministic { d: 3 }).unwrap();
        assert_eq!(d.mass(3), 1.0);
        let u = build_pmf(&DistributionSpec::UniformRange { a: 2, b: 4 }).unwrap();
        for v in 2..=4 {
            assert!((u.mass(v) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(matches!(build_pmf(&DistributionSpec::Deterministic { d: 0 }), Err(Error::InvalidSpec(_))));
        assert!(matches!(build_pmf(&DistributionSpec::UniformRange { a: 4, b: 2 }), Err(Error::InvalidSpec(_))));
        assert!(matches!(build_pmf(&DistributionSpec::Zeta { s: 2.0, cutoff: 5 }), Err(Error::InvalidSpec(_))));
        assert!(matches!(build_pmf(&DistributionSpec::Zeta { s: 0.5, cutoff: 5 }), Err(Error::NonSummable(_))));
        assert!(matches!(
            build_pmf(&DistributionSpec::BorderlineLog { c: 1.0, eps: 0.0, cutoff: 3 }),
            Err(Error::InvalidSpec(_))
        ));
    }

    #[test]
    fn quantile_finite() {
        let u = build_pmf(&DistributionSpec::UniformRange { a: 2, b: 3 }).unwrap();
        let s = u.sampler();
        assert_eq!(s.quantile(0.0), 2);
        assert_eq!(s.quantile(0.4999), 2);
        assert_eq!(s.quantile(0.5), 3);
        assert_eq!(s.quantile(0.9999999), 3);
    }

    #[test]
    fn quantile_heavy_tail_beyond_table() {
        let z = build_pmf(&DistributionSpec::Zeta { s: 2.5, cutoff: 10 }).unwrap();
        let s = z.sampler();
        let u = 1.0 - 1e-11;
        let k = s.quantile(u);
        let t = 1.0 - u;
        assert!(k > 1 << 20);
        assert!(z.tail_mass(k + 1) < t && z.tail_mass(k) >= t);
    }

    #[test]
    fn json_roundtrip() {
        let spec = DistributionSpec::BorderlineLog { c: 18.0, eps: 0.5, cutoff: 3 };
        let j = serde_json::to_string(&spec).unwrap();
        assert!(j.contains("\"family\":\"BorderlineLog\""));
        assert_eq!(serde_json::from_str::<DistributionSpec>(&j).unwrap(), spec);
        let pmf = build_pmf(&spec).unwrap();
        let back: IntegerPmf = serde_json::from_str(&serde_json::to_string(&pmf).unwrap()).unwrap();
        assert_eq!(back, pmf);
    }
}
