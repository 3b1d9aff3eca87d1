//! Proof-constant arithmetic: the p_k recursion, the k0 conditions and the
//! final tail sums, all evaluated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renewal::fc;
use crate::scales::{compute_a, ln_floor_pow, ln_l_logspace};

const LN_2: f64 = std::f64::consts::LN_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiscaleParams {
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub mu: f64,
    #[serde(default)]
    pub toy_a: Option<f64>,
    #[serde(default)]
    pub height_cap: Option<f64>,
}

impl MultiscaleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu < self.beta && self.beta < 1.0) {
            return Err(Error::InvalidSpec(format!(
                "need 0 < mu < beta < 1, got mu = {}, beta = {}",
                self.mu, self.beta
            )));
        }
        match self.toy_a {
            Some(a) if !(a > 1.0 && a.is_finite()) => Err(Error::OutOfRange(format!("toy A = {a} must exceed 1"))),
            Some(_) => Ok(()),
            None => compute_a(self.alpha, self.c).map(|_| ()),
        }
    }

    /// `A`, or the toy override.
    pub fn a(&self) -> Result<f64> {
        match self.toy_a {
            Some(a) => Ok(a),
            None => compute_a(self.alpha, self.c),
        }
    }
}

/// `(A^{2(k+2)}/2) (p_k^2 + c1 / F_c(L_k))`
pub fn pk_recursion_rhs(pk: f64, c1: f64, a: f64, k: u64, lk: f64, c: f64) -> f64 {
    0.5 * a.powf(2.0 * (k as f64 + 2.0)) * (pk * pk + c1 / fc(c, lk))
}

/// `exp(-c sqrt(ln L_k)/2)`
pub fn pk_bound(c: f64, lk: f64) -> f64 {
    if lk <= 1.0 {
        return 1.0;
    }
    (-c * lk.ln().sqrt() / 2.0).exp()
}

pub fn pk_bound_ln(c: f64, ln_lk: f64) -> f64 {
    -c * ln_lk.max(0.0).sqrt() / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct K0Row {
    pub k: u64,
    pub cond1: bool,
    pub cond2: bool,
    pub cond3: bool,
    pub slack1: f64,
    pub slack2: f64,
    pub slack3: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct K0Report {
    pub a: f64,
    pub c: f64,
    pub c1: f64,
    pub moment_rho: f64,
    /// `c/4 - sqrt(2 ln A)`
    pub margin: f64,
    pub rows: Vec<K0Row>,
    /// first k with all three conditions
    pub first_k: Option<u64>,
    /// smallest k such that all three hold on `[k, kmax]`
    pub k0: Option<u64>,
    /// k where some condition flips from true to false inside the range
    pub monotonicity_violations: Vec<u64>,
}

/// Evaluates the three k0 conditions for `k = 0..=kmax`. `moment_rho` is an
/// upper bound on `E F_c(rho) 1{rho >= 1}`.
pub fn check_k0_conditions(params: &MultiscaleParams, c1: f64, moment_rho: f64, kmax: u64) -> Result<K0Report> {
    params.validate()?;
    if !(c1 > 0.0) {
        return Err(Error::OutOfRange(format!("c1 = {c1} must be positive")));
    }
    let a = params.a()?;
    let c = params.c;
    let ln_a = a.ln();
    let s = (2.0 * ln_a).sqrt();
    let margin = c / 4.0 - s;
    let target2 = (16.0 * (c1 + 1.0)).ln();
    let ln_moment = moment_rho.ln();

    let mut rows = Vec::with_capacity(kmax as usize + 1);
    // ln L_k accumulated incrementally
    let mut ln_l = 0.0;
    for k in 0..=kmax {
        ln_l += ln_floor_pow(a, k + 1);
        let kf = k as f64;
        let r = crate::scales::r_k(k, a);
        let lhs1 = c - 2.0 * ((kf + 2.0) / (kf + 1.0)).sqrt() * s - 0.5 * c * r.max(0.0).sqrt();
        let slack1 = if r > 0.0 { lhs1 - margin } else { f64::NEG_INFINITY };
        let cond1 = margin > 0.0 && slack1 > 0.0;
        let slack2 = margin * ((kf + 1.0) * (kf + 2.0) / 2.0).sqrt() * ln_a.sqrt() - target2;
        let cond2 = slack2 > 0.0;
        let slack3 = 0.5 * c * ln_l.max(0.0).sqrt() - ln_moment;
        let cond3 = slack3 >= 0.0;
        rows.push(K0Row { k, cond1, cond2, cond3, slack1, slack2, slack3 });
    }
    let all = |r: &K0Row| r.cond1 && r.cond2 && r.cond3;
    let first_k = rows.iter().find(|r| all(r)).map(|r| r.k);
    let k0 = match rows.iter().rposition(|r| !all(r)) {
        None => Some(0),
        Some(i) if i + 1 < rows.len() => Some(rows[i + 1].k),
        Some(_) => None,
    };
    let mut monotonicity_violations = Vec::new();
    for w in rows.windows(2) {
        let flip = |x: bool, y: bool| x && !y;
        if flip(w[0].cond1, w[1].cond1) || flip(w[0].cond2, w[1].cond2) || flip(w[0].cond3, w[1].cond3) {
            monotonicity_violations.push(w[1].k);
        }
    }
    Ok(K0Report {
        a,
        c,
        c1,
        moment_rho,
        margin,
        rows,
        first_k,
        k0,
        monotonicity_violations,
    })
}

/// `ln` of the k-th summand `A^{k+2} exp(-(A^{(k+1)(k+2)/2} / 2^{k+1})^{1 - mu/(k+1)})`.
pub fn ln_tail_term(a: f64, mu: f64, k: u64) -> f64 {
    let kf = k as f64;
    let ln_lower = (kf + 1.0) * (kf + 2.0) / 2.0 * a.ln() - (kf + 1.0) * LN_2;
    ln_term_with(a, mu, k, ln_lower)
}

fn ln_term_with(a: f64, mu: f64, k: u64, ln_l: f64) -> f64 {
    let kf = k as f64;
    (kf + 2.0) * a.ln() - ((1.0 - mu / (kf + 1.0)) * ln_l).exp()
}

/// Index from which the geometric remainder bound is valid.
pub fn remainder_start(a: f64) -> u64 {
    let t = (4.0 * 2f64.sqrt()).max(4.0 * LN_2 / a.ln());
    t.floor() as u64 + 1
}

/// `ln` of the bound on `sum_{k >= K}` of the summands:
/// `A^{K+2} e^{-A^{K^2/8}/sqrt 2} / (1 - e^{-A^{K^2/8} ln A / (8 sqrt 2)})`.
pub fn ln_remainder_bound(a: f64, big_k: u64) -> f64 {
    let kf = big_k as f64;
    let ln_a = a.ln();
    let x = (kf * kf / 8.0 * ln_a).exp();
    let num = (kf + 2.0) * ln_a - x / 2f64.sqrt();
    let den = -(-(x * ln_a / (8.0 * 2f64.sqrt()))).exp_m1();
    num - den.ln()
}

fn log_add(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let m = x.max(y);
    m + ((x - m).exp() + (y - m).exp()).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailSum {
    pub from: u64,
    pub horizon: u64,
    /// ln of the explicit partial sum over `from..=max(horizon, K-1)`
    pub ln_partial: f64,
    /// ln of the certified remainder bound
    pub ln_remainder: f64,
    pub remainder_from: u64,
    /// ln of the certified upper bound on the full sum
    pub ln_total: f64,
    pub value: f64,
}

fn tail_sum_with(a: f64, mu: f64, from: u64, horizon: u64, term: &dyn Fn(u64) -> f64) -> TailSum {
    let rem_from = horizon.max(from).saturating_add(1).max(remainder_start(a)).max(from);
    let mut ln_partial = f64::NEG_INFINITY;
    for k in from..rem_from {
        ln_partial = log_add(ln_partial, term(k));
    }
    let ln_remainder = ln_remainder_bound(a, rem_from);
    let ln_total = log_add(ln_partial, ln_remainder);
    let _ = mu;
    TailSum {
        from,
        horizon,
        ln_partial,
        ln_remainder,
        remainder_from: rem_from,
        ln_total,
        value: ln_total.exp(),
    }
}

/// Certified upper bound on `sum_{k >= k4}` of the summands, explicit to
/// `horizon` with the geometric remainder past it.
pub fn tail_sum_k4(a: f64, mu: f64, k4: u64, horizon: u64) -> Result<TailSum> {
    check_a_mu(a, mu)?;
    Ok(tail_sum_with(a, mu, k4, horizon, &|k| ln_tail_term(a, mu, k)))
}

fn check_a_mu(a: f64, mu: f64) -> Result<()> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::OutOfRange(format!("A = {a} must exceed 1")));
    }
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::OutOfRange(format!("mu = {mu} must lie in (0,1)")));
    }
    Ok(())
}

/// Smallest `k4 >= 1` whose tail sum is below 1/2, searched up to `kmax`.
pub fn minimal_k4(a: f64, mu: f64, horizon: u64, kmax: u64) -> Result<Option<(u64, TailSum)>> {
    check_a_mu(a, mu)?;
    for k in 1..=kmax {
        let t = tail_sum_k4(a, mu, k, horizon.max(k))?;
        if t.ln_total < -LN_2 {
            return Ok(Some((k, t)));
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderBound {
    pub k5: u64,
    /// `1 - sum` using the lower bound on `L_k`
    pub bound: f64,
    /// `1 - sum` using the exact `L_k`
    pub bound_exact_scales: f64,
    pub tail: TailSum,
}

/// `1 - sum_{k >= k5} A^{k+2} exp(-L_k^{1 - mu/(k+1)})` with `L_k` replaced by its
/// lower bound `A^{(k+1)(k+2)/2}/2^{k+1}`.
pub fn ladder_lower_bound(a: f64, mu: f64, k5: u64, horizon: u64) -> Result<LadderBound> {
    let tail = tail_sum_k4(a, mu, k5, horizon)?;
    let exact = tail_sum_with(a, mu, k5, horizon, &|k| ln_term_with(a, mu, k, ln_l_logspace(a, k)));
    Ok(LadderBound {
        k5,
        bound: -tail.ln_total.exp_m1(),
        bound_exact_scales: -exact.ln_total.exp_m1(),
        tail,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryRow {
    pub k: u64,
    /// `ln(8 L_k^{2/(k+1)})`, the log of the number of intervals
    pub ln_count: f64,
    /// `ln` of the union bound `8 L_k^{2/(k+1)} exp(-c sqrt(ln L_k)/2)` on the
    /// probability that one of the intervals is bad
    pub ln_union: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorollaryReport {
    pub rows: Vec<CorollaryRow>,
    /// ln of the partial sum of the union bounds
    pub ln_sum: f64,
    /// `1 - sum`, a lower bound on the probability of all intervals good
    /// whenever the sum is below one and the rows reach the decay regime
    pub lower_bound: f64,
}

/// Union bounds on the complements of the all-good events per scale.
pub fn corollary_union_bounds(a: f64, c: f64, k_from: u64, k_to: u64) -> CorollaryReport {
    let mut rows = Vec::new();
    let mut ln_sum = f64::NEG_INFINITY;
    for k in k_from..=k_to {
        let ln_l = ln_l_logspace(a, k);
        let ln_count = 8f64.ln() + 2.0 / (k as f64 + 1.0) * ln_l;
        let ln_union = ln_count + pk_bound_ln(c, ln_l);
        ln_sum = log_add(ln_sum, ln_union);
        rows.push(CorollaryRow { k, ln_count, ln_union });
    }
    CorollaryReport { rows, ln_sum, lower_bound: -ln_sum.exp_m1() }
}
