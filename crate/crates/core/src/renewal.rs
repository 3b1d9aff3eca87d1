//! Renewal machinery: the F_c weight, stationary delay, the residual-time
//! chain Z, coupling times, c1 estimation and the aperiodic lift.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{LogPowerTerm, SeriesValue};
use crate::pmf::{IntegerPmf, Sampler, TailForm};
use crate::rng::{derive_stream, Stream};
use crate::stats::Moments;

/// `F_c(x) = exp(c sqrt(ln x))` for x >= 1, and 1 below.
#[inline]
pub fn fc(c: f64, x: f64) -> f64 {
    if x <= 1.0 {
        1.0
    } else {
        (c * x.ln().sqrt()).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightFunction {
    pub c: f64,
}

impl WeightFunction {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(Error::OutOfRange(format!("weight c = {c} must be positive")));
        }
        Ok(WeightFunction { c })
    }

    pub fn eval(&self, x: f64) -> f64 {
        fc(self.c, x)
    }

    /// `max(e^{(ln 2 / c)^2}, e^{1/2})`
    pub fn c_tilde(&self) -> f64 {
        ((std::f64::consts::LN_2 / self.c).powi(2)).exp().max(0.5f64.exp())
    }
}

pub fn weight_fc(w: WeightFunction, x: f64) -> f64 {
    w.eval(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum DelaySpec {
    Fixed { m: u64 },
    Stationary,
}

pub fn mean_xi(pmf: &IntegerPmf) -> Result<f64> {
    pmf.series(1, 1.0, 0.0).map(|s| s.value).ok_or(Error::InfiniteMean)
}

/// `E(xi F_c(xi) 1{xi >= 1})`.
pub fn moment_xi_fc(pmf: &IntegerPmf, w: WeightFunction) -> Result<SeriesValue> {
    pmf.series(1, 1.0, w.c)
        .ok_or_else(|| Error::Diverges(format!("E xi F_c(xi) with c = {}", w.c)))
}

/// Truncated stationary delay law `lambda_k = P(xi > k) / E xi`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryDelay {
    /// `lambda_0 .. lambda_{K-1}` (not renormalized).
    pub lambda: Vec<f64>,
    /// `P(rho >= K)`, dropped by the sampler.
    pub discarded: f64,
    pub mean: f64,
}

const DELAY_DISCARD: f64 = 1e-12;
const DELAY_CAP: u64 = 1 << 22;

impl StationaryDelay {
    /// `P(rho >= m)`.
    pub fn tail(&self, pmf: &IntegerPmf, m: u64) -> f64 {
        if (m as usize) < self.lambda.len() {
            compensated(&self.lambda[m as usize..]) + self.discarded
        } else {
            rho_tail(pmf, self.mean, m)
        }
    }

    pub fn total(&self) -> f64 {
        compensated(&self.lambda) + self.discarded
    }
}

fn compensated(xs: &[f64]) -> f64 {
    let mut acc = crate::numerics::Neumaier::default();
    for &x in xs {
        acc.add(x);
    }
    acc.sum()
}

/// `P(rho >= m) = (S1(m+1) - m S0(m+1)) / E xi`.
fn rho_tail(pmf: &IntegerPmf, mean: f64, m: u64) -> f64 {
    if let Some(max) = pmf.max_support() {
        if m >= max {
            return 0.0;
        }
    }
    let s1 = pmf.tail_first_moment(m + 1);
    let s0 = pmf.tail_mass(m + 1);
    ((s1 - m as f64 * s0) / mean).max(0.0)
}

pub fn stationary_delay(pmf: &IntegerPmf) -> Result<StationaryDelay> {
    let mean = mean_xi(pmf)?;
    let k_end = match pmf.max_support() {
        Some(max) => max,
        None => {
            let mut k = 64u64;
            while k < DELAY_CAP && rho_tail(pmf, mean, k) > DELAY_DISCARD {
                k *= 2;
            }
            let (mut lo, mut hi) = (k / 2, k);
            while lo + 1 < hi {
                let mid = (lo + hi) / 2;
                if rho_tail(pmf, mean, mid) > DELAY_DISCARD {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            hi
        }
    };
    let mut lambda = vec![0.0; k_end as usize];
    let mut s = pmf.tail_mass(k_end);
    for k in (0..k_end).rev() {
        // s = P(xi >= k + 1)
        lambda[k as usize] = s / mean;
        s += pmf.mass(k);
    }
    let discarded = if pmf.max_support().is_some() { 0.0 } else { rho_tail(pmf, mean, k_end) };
    Ok(StationaryDelay { lambda, discarded, mean })
}

/// `E(F_c(rho) 1{rho >= 1}) = (1/E xi) sum_{k>=1} F_c(k) P(xi >= k+1)`.
pub fn moment_rho_fc(pmf: &IntegerPmf, w: WeightFunction) -> Result<SeriesValue> {
    moment_xi_fc(pmf, w)?;
    let mean = mean_xi(pmf)?;
    let backward = |k_end: u64| -> f64 {
        let mut s = pmf.tail_mass(k_end);
        let mut acc = 0.0;
        for k in (1..k_end).rev() {
            acc += fc(w.c, k as f64) * s;
            s += pmf.mass(k);
        }
        acc / mean
    };
    if let Some(max) = pmf.max_support() {
        return Ok(SeriesValue { value: backward(max), error_bound: 1e-15 * max as f64 });
    }
    // remainder sum_{k>=K} F(k) S0(k+1) lies in [0, U]
    let upper = |k_end: u64| -> f64 {
        let u = match *pmf.tail() {
            TailForm::Power { exponent, scale, .. } => {
                LogPowerTerm { coef: scale, a: 1.0 - exponent, b: w.c, d: 0.0 }.tail_integral(k_end as f64)
            }
            TailForm::BorderlineLog { c, eps, scale, .. } => {
                LogPowerTerm { coef: scale, a: -1.0, b: w.c - c, d: 1.0 + eps }.tail_integral(k_end as f64)
            }
            TailForm::Geometric { ratio, .. } => {
                let mut acc = 0.0;
                let mut k = k_end;
                loop {
                    let t = fc(w.c, k as f64) * pmf.mass(k + 1) / (1.0 - ratio);
                    acc += t;
                    k += 1;
                    if t <= 1e-18 * acc || k > k_end + 1_000_000 {
                        break;
                    }
                }
                2.0 * acc
            }
            TailForm::None => 0.0,
        };
        u / mean
    };
    let start = pmf.tail().start().unwrap_or(2).max(2);
    let mut k_end = (start + 64).next_power_of_two().max(4096);
    loop {
        let partial = backward(k_end);
        let u = upper(k_end);
        let rounding = 1e-15 * k_end as f64 * partial;
        if 0.5 * u <= 1e-10 * (partial + 0.5 * u) || k_end >= 1 << 24 {
            return Ok(SeriesValue { value: partial + 0.5 * u, error_bound: 0.5 * u + rounding });
        }
        k_end *= 2;
    }
}

/// Sampler bundle for an interarrival law and its stationary delay.
#[derive(Debug)]
pub struct Renewal {
    pub pmf: IntegerPmf,
    xi: Sampler,
    stationary: OnceLock<Result<(StationaryDelay, Sampler)>>,
}

impl Clone for Renewal {
    fn clone(&self) -> Self {
        Renewal::new(self.pmf.clone())
    }
}

impl Renewal {
    pub fn new(pmf: IntegerPmf) -> Self {
        let xi = pmf.sampler();
        Renewal { pmf, xi, stationary: OnceLock::new() }
    }

    pub fn xi_sampler(&self) -> &Sampler {
        &self.xi
    }

    fn stationary_pair(&self) -> Result<&(StationaryDelay, Sampler)> {
        self.stationary
            .get_or_init(|| {
                let d = stationary_delay(&self.pmf)?;
                let kept = 1.0 - d.discarded;
                let w: Vec<(u64, f64)> =
                    d.lambda.iter().enumerate().map(|(k, &l)| (k as u64, l / kept)).collect();
                let sampler = delay_sampler(&w);
                Ok((d, sampler))
            })
            .as_ref()
            .map_err(|e| e.clone())
    }

    pub fn stationary(&self) -> Result<&StationaryDelay> {
        Ok(&self.stationary_pair()?.0)
    }

    #[inline]
    pub fn sample_xi(&self, s: &mut Stream) -> u64 {
        self.xi.sample(s)
    }

    pub fn sample_delay(&self, delay: DelaySpec, s: &mut Stream) -> Result<u64> {
        match delay {
            DelaySpec::Fixed { m } => Ok(m),
            DelaySpec::Stationary => Ok(self.stationary_pair()?.1.sample(s)),
        }
    }

    /// One step of the Z chain.
    #[inline]
    pub fn step(&self, state: u64, u: f64) -> u64 {
        if state > 0 {
            state - 1
        } else {
            self.xi.quantile(u) - 1
        }
    }
}

fn delay_sampler(weights: &[(u64, f64)]) -> Sampler {
    let kept: Vec<&(u64, f64)> = weights.iter().filter(|w| w.1 > 0.0).collect();
    Sampler::finite(kept.iter().map(|w| w.0).collect(), kept.iter().map(|w| w.1).collect())
}

pub fn step_z(pmf: &IntegerPmf, state: u64, u: f64) -> u64 {
    if state > 0 {
        state - 1
    } else {
        pmf.sampler().quantile(u) - 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ZPath {
    pub states: Vec<u64>,
}

impl ZPath {
    /// Checks the kernel support constraint on every transition.
    pub fn is_valid(&self, pmf: &IntegerPmf) -> bool {
        self.states.windows(2).all(|w| {
            if w[0] > 0 {
                w[1] == w[0] - 1
            } else {
                pmf.mass(w[1] + 1) > 0.0
            }
        })
    }
}

pub fn sample_z_path(ren: &Renewal, delay: DelaySpec, n: usize, stream: &mut Stream) -> Result<ZPath> {
    let mut states = Vec::with_capacity(n + 1);
    let mut z = ren.sample_delay(delay, stream)?;
    states.push(z);
    for _ in 0..n {
        z = ren.step(z, stream.uniform());
        states.push(z);
    }
    Ok(ZPath { states })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingOutcome {
    Coupled(u64),
    Censored(u64),
}

/// First index k >= 1 where two independent Z chains are both at zero.
pub fn coupling_time(ren: &Renewal, d1: DelaySpec, d2: DelaySpec, stream: &mut Stream, cap: u64) -> Result<CouplingOutcome> {
    let mut a = ren.sample_delay(d1, stream)?;
    let mut b = ren.sample_delay(d2, stream)?;
    // a, b: successive zero times of each chain
    loop {
        if a == b && a >= 1 {
            return Ok(if a <= cap { CouplingOutcome::Coupled(a) } else { CouplingOutcome::Censored(cap) });
        }
        if a.min(b) > cap {
            return Ok(CouplingOutcome::Censored(cap));
        }
        if a <= b {
            a += ren.sample_xi(stream);
        } else {
            b += ren.sample_xi(stream);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct C1Estimate {
    pub moment_rho: SeriesValue,
    pub moment_t: f64,
    pub moment_t_se: f64,
    pub c1: f64,
    /// `c1` with the rho bound's upper end and `moment_t + 1.96 se`.
    pub c1_upper: f64,
    pub censor_fraction: f64,
    pub flagged: bool,
    pub trials: u64,
}

/// `c1 = E F_c(rho) 1{rho>=1} + E F_c(T)`, T under delays (Fixed(0), Stationary).
/// Censored trials contribute `F_c(cap)`, a lower bound on their true weight.
pub fn estimate_c1(ren: &Renewal, w: WeightFunction, trials: u64, cap: u64, seed: u64) -> Result<C1Estimate> {
    let moment_rho = moment_rho_fc(&ren.pmf, w)?;
    ren.stationary()?;
    let outcomes: Vec<CouplingOutcome> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = derive_stream(seed, "c1", i);
            coupling_time(ren, DelaySpec::Fixed { m: 0 }, DelaySpec::Stationary, &mut s, cap)
        })
        .collect::<Result<_>>()?;
    let mut m = Moments::default();
    let mut censored = 0u64;
    for o in &outcomes {
        match *o {
            CouplingOutcome::Coupled(t) => m.push(w.eval(t as f64)),
            CouplingOutcome::Censored(c) => {
                censored += 1;
                m.push(w.eval(c as f64));
            }
        }
    }
    let moment_t = m.mean();
    let se = m.se();
    let censor_fraction = censored as f64 / trials.max(1) as f64;
    Ok(C1Estimate {
        moment_rho,
        moment_t,
        moment_t_se: se,
        c1: moment_rho.value + moment_t,
        c1_upper: moment_rho.upper() + moment_t + crate::stats::Z95 * se,
        censor_fraction,
        flagged: censored > 0,
        trials,
    })
}

/// TV distance between the law of Z_n (stationary start) and lambda on
/// `[0, support_cap]`, with the remaining mass lumped into one bin.
pub fn stationarity_tv(ren: &Renewal, n: usize, trials: u64, support_cap: u64, seed: u64) -> Result<f64> {
    let d = ren.stationary()?;
    let bins = support_cap as usize + 2;
    let states: Vec<u64> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut s = derive_stream(seed, "stationarity", i);
            let mut z = ren.sample_delay(DelaySpec::Stationary, &mut s)?;
            for _ in 0..n {
                z = ren.step(z, s.uniform());
            }
            Ok(z)
        })
        .collect::<Result<_>>()?;
    let mut emp = vec![0.0; bins];
    for z in states {
        emp[(z as usize).min(bins - 1)] += 1.0 / trials as f64;
    }
    let mut exact = vec![0.0; bins];
    for (k, l) in d.lambda.iter().enumerate() {
        exact[k.min(bins - 1)] += l;
    }
    exact[bins - 1] += d.discarded;
    Ok(crate::stats::tv_distance(&emp, &exact))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub a1: u64,
    pub a2: u64,
    pub a0: u64,
    pub c_tilde: f64,
    /// true when ceil(c~) rather than a2 determines a0
    pub c_tilde_binds: bool,
    pub lifted: IntegerPmf,
}

impl LiftReport {
    /// The lift applied to a single (integer) value.
    pub fn lift_value(&self, x: u64) -> u64 {
        if x > self.a0 {
            x
        } else if x > self.a1 {
            self.a0
        } else {
            self.a0 - 1
        }
    }
}

pub fn aperiodic_lift(pmf: &IntegerPmf, w: WeightFunction) -> Result<LiftReport> {
    let atoms = pmf.atoms(2);
    if atoms.len() < 2 {
        return Err(Error::DegenerateSupport);
    }
    let (a1, a2) = (atoms[0], atoms[1]);
    let c_tilde = w.c_tilde();
    let ceil_ct = c_tilde.ceil() as u64;
    let mut a0 = a2.max(ceil_ct) + 1;
    if (a0 - 1) as f64 <= c_tilde {
        a0 += 1;
    }
    let low = pmf.mass(a1);
    let mid = pmf.tail_mass(a1 + 1) - pmf.tail_mass(a0 + 1);
    let mut head = vec![(a0 - 1, low), (a0, mid)];
    for &(v, p) in pmf.head() {
        if v > a0 {
            head.push((v, p));
        }
    }
    let tail = match *pmf.tail() {
        TailForm::None => TailForm::None,
        TailForm::Geometric { start, ratio, scale } if start <= a0 => {
            TailForm::Geometric { start: a0 + 1, ratio, scale: scale * ratio.powf((a0 + 1 - start) as f64) }
        }
        TailForm::Power { start, exponent, scale } if start <= a0 => {
            TailForm::Power { start: a0 + 1, exponent, scale }
        }
        TailForm::BorderlineLog { start, c, eps, scale } if start <= a0 => {
            TailForm::BorderlineLog { start: a0 + 1, c, eps, scale }
        }
        t => t,
    };
    let lifted = IntegerPmf::new(head, tail)?;
    Ok(LiftReport { a1, a2, a0, c_tilde, c_tilde_binds: ceil_ct > a2, lifted })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{build_pmf, DistributionSpec};

    fn uni(a: u64, b: u64) -> IntegerPmf {
        build_pmf(&DistributionSpec::UniformRange { a, b }).unwrap()
    }

    #[test]
    fn weight_values() {
        assert_eq!(fc(2.0, 1.0), 1.0);
        assert!((fc(2.0, std::f64::consts::E) - 2f64.exp()).abs() < 1e-12);
        assert!((fc(2.0, 4f64.exp()) - 4f64.exp()).abs() < 1e-10);
        assert_eq!(fc(5.0, 0.3), 1.0);
    }

    #[test]
    fn delay_small_cases() {
        let d = stationary_delay(&uni(2, 3)).unwrap();
        assert_eq!(d.lambda.len(), 3);
        for (a, b) in d.lambda.iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-12);
        }
        let one = stationary_delay(&uni(1, 1)).unwrap();
        assert_eq!(one.lambda, vec![1.0]);
    }

    #[test]
    fn coupling_parity() {
        let ren = Renewal::new(uni(2, 2));
        let mut s = derive_stream(1, "t", 0);
        let f0 = DelaySpec::Fixed { m: 0 };
        assert_eq!(coupling_time(&ren, f0, f0, &mut s, 100).unwrap(), CouplingOutcome::Coupled(2));
        assert_eq!(
            coupling_time(&ren, f0, DelaySpec::Fixed { m: 1 }, &mut s, 100).unwrap(),
            CouplingOutcome::Censored(100)
        );
    }

    #[test]
    fn lift_examples() {
        let w = WeightFunction::new(18.0).unwrap();
        let r = aperiodic_lift(&uni(1, 2), w).unwrap();
        assert_eq!((r.a1, r.a2, r.a0), (1, 2, 3));
        assert!((r.lifted.mass(2) - 0.5).abs() < 1e-15 && (r.lifted.mass(3) - 0.5).abs() < 1e-15);
        let p = IntegerPmf::from_weights(&[(5, 1.0), (7, 1.0)]).unwrap();
        let r = aperiodic_lift(&p, w).unwrap();
        assert_eq!((r.a1, r.a2, r.a0), (5, 7, 8));
        assert!((r.lifted.mass(7) - 0.5).abs() < 1e-15 && (r.lifted.mass(8) - 0.5).abs() < 1e-15);
        assert!(matches!(aperiodic_lift(&uni(4, 4), w), Err(Error::DegenerateSupport)));
    }
}
