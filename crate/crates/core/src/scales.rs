//! Scales `L_k`, heights `H_k`, and exact checks of the scale inequalities.

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LN_96: f64 = 4.564_348_191_467_836;

pub fn compute_a(alpha: f64, c: f64) -> Result<f64> {
    let lo = (-c * c / 32.0).exp();
    if !(alpha > lo && alpha < 1.0) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} must lie in ({lo}, 1)")));
    }
    Ok(alpha * (c * c / 32.0).exp())
}

/// `w(alpha, mu) = sqrt(32 ln(96^{2/mu} / alpha))`
pub fn w_alpha_mu(alpha: f64, mu: f64) -> f64 {
    (32.0 * (2.0 / mu * LN_96 - alpha.ln())).sqrt()
}

pub fn alpha_mu_threshold() -> f64 {
    8.0 * LN_96.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMu {
    pub alpha: f64,
    pub mu: f64,
    /// `(mu/2) ln A - ln 96`, positive iff `A^{mu/2} > 96`
    pub margin: f64,
    pub t_star: f64,
}

/// Picks `alpha = mu = 1 - t` with `t = min(0.01, t*/2)`, where `t*` solves
/// `w(1-t*, 1-t*) = c` by bisection.
pub fn find_alpha_mu(c: f64) -> Result<AlphaMu> {
    let threshold = alpha_mu_threshold();
    if !(c > threshold) {
        return Err(Error::BelowThreshold { c, threshold });
    }
    let f = |t: f64| w_alpha_mu(1.0 - t, 1.0 - t) - c;
    let (mut lo, mut hi) = (0.0f64, 1.0f64 - 1e-15);
    if f(hi) < 0.0 {
        lo = hi;
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let t_star = lo;
    let t = (t_star / 2.0).min(0.01);
    let (alpha, mu) = (1.0 - t, 1.0 - t);
    let margin = alpha_mu_margin(alpha, mu, c);
    if !(margin > margin_slack(c)) {
        return Err(Error::BelowThreshold { c, threshold });
    }
    Ok(AlphaMu { alpha, mu, margin, t_star })
}

/// `(mu/2)(c^2/32 + ln alpha) - ln 96`.
pub fn alpha_mu_margin(alpha: f64, mu: f64, c: f64) -> f64 {
    0.5 * mu * (c * c / 32.0 + alpha.ln()) - LN_96
}

/// Generous bound on the rounding error of `alpha_mu_margin`.
fn margin_slack(c: f64) -> f64 {
    64.0 * f64::EPSILON * (c * c / 32.0 + LN_96 + 1.0)
}

pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn ratio_floor(r: &BigRational) -> BigUint {
    r.numer().div_floor(r.denom()).to_biguint().expect("nonnegative")
}

fn rpow(base: &BigRational, e: u64) -> BigRational {
    num_traits::pow(base.clone(), e as usize)
}

fn big(n: u64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn bu(x: &BigUint) -> BigRational {
    BigRational::from_integer(x.clone().into())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaleTable {
    pub a: f64,
    /// `floor(A^{k+1})`
    pub floors: Vec<BigUint>,
    pub l: Vec<BigUint>,
    pub r: Vec<f64>,
}

/// `r(k, A) = 2 ln 4 / ((k+1)((k+2) ln A - 2 ln 2)) + (k+3)/(k+1)`
pub fn r_k(k: u64, a: f64) -> f64 {
    let kf = k as f64;
    let ln2 = std::f64::consts::LN_2;
    2.0 * (4f64).ln() / ((kf + 1.0) * ((kf + 2.0) * a.ln() - 2.0 * ln2)) + (kf + 3.0) / (kf + 1.0)
}

impl ScaleTable {
    pub fn new(a: f64, kmax: usize) -> Result<Self> {
        if !(a > 1.0) || !a.is_finite() {
            return Err(Error::OutOfRange(format!("A = {a} must exceed 1")));
        }
        let ar = BigRational::from_float(a).expect("finite");
        let mut floors = Vec::with_capacity(kmax + 1);
        let mut l = Vec::with_capacity(kmax + 1);
        let mut pow = ar.clone();
        for k in 0..=kmax {
            let f = ratio_floor(&pow);
            let lk = if k == 0 { f.clone() } else { &l[k - 1] * &f };
            floors.push(f);
            l.push(lk);
            pow *= &ar;
        }
        let r = (0..=kmax as u64).map(|k| r_k(k, a)).collect();
        Ok(ScaleTable { a, floors, l, r })
    }

    pub fn kmax(&self) -> usize {
        self.l.len() - 1
    }

    pub fn a_exact(&self) -> BigRational {
        BigRational::from_float(self.a).unwrap()
    }

    /// `L_k` as a machine integer, if it fits.
    pub fn l_u64(&self, k: usize) -> Option<u64> {
        self.l.get(k)?.to_u64()
    }

    /// Number of children of a scale-k interval, `floor(A^{k+1})` for k >= 1.
    pub fn children(&self, k: usize) -> Option<u64> {
        self.floors.get(k)?.to_u64()
    }

    /// `floor(A^{k+2} / 2)`
    pub fn half_floor(&self, k: usize) -> u64 {
        let p = rpow(&self.a_exact(), k as u64 + 2) / big(2);
        ratio_floor(&p).to_u64().unwrap_or(u64::MAX)
    }

    /// `M_k = floor(A^{k+2}/2) - 1`
    pub fn m_k(&self, k: usize) -> u64 {
        self.half_floor(k).saturating_sub(1)
    }

    pub fn ln_l(&self, k: usize) -> f64 {
        ln_biguint(&self.l[k])
    }
}

pub fn scale_table(a: f64, kmax: usize) -> Result<ScaleTable> {
    ScaleTable::new(a, kmax)
}

/// `ln floor(A^j)`: exact rational floor for small `j`, `j ln A` once
/// `A^j > 2^52` (relative correction below 2^-52).
pub fn ln_floor_pow(a: f64, j: u64) -> f64 {
    let e = j as f64 * a.ln();
    if e < 36.0 && j > 256 {
        (a.powf(j as f64)).floor().ln()
    } else if e < 36.0 {
        let p = rpow(&BigRational::from_float(a).unwrap(), j);
        ln_biguint(&ratio_floor(&p))
    } else {
        e
    }
}

/// `ln L_k` for arbitrary k.
pub fn ln_l_logspace(a: f64, k: u64) -> f64 {
    (0..=k).map(|j| ln_floor_pow(a, j + 1)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, PartialOrd, Ord, Hash)]
pub enum InequalityId {
    FloorBounds,
    LkSandwich,
    AxBounds,
    PowerSandwich,
    NextScaleSandwich,
    RBound,
}

impl InequalityId {
    pub fn name(&self) -> &'static str {
        match self {
            InequalityId::FloorBounds => "floor_bounds",
            InequalityId::LkSandwich => "lk_sandwich",
            InequalityId::AxBounds => "ax_bounds",
            InequalityId::PowerSandwich => "power_sandwich",
            InequalityId::NextScaleSandwich => "next_scale_sandwich",
            InequalityId::RBound => "r_bound",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InequalityRow {
    pub k: usize,
    pub id: InequalityId,
    /// `None` when the inequality does not apply (r-bound with a nonpositive denominator)
    pub pass: Option<bool>,
    /// smallest relative slack over the inequality's sides
    pub margin: f64,
}

fn rel_margin(lo: &BigRational, hi: &BigRational) -> f64 {
    // (hi - lo) / hi in floating point, for reporting only
    let d = hi - lo;
    let ln_ratio = |x: &BigRational| -> f64 {
        if x.is_zero() {
            return f64::NEG_INFINITY;
        }
        let s = if x < &BigRational::zero() { -1.0 } else { 1.0 };
        let ax = if s < 0.0 { -x.clone() } else { x.clone() };
        s * (ln_biguint(&ax.numer().to_biguint().unwrap()) - ln_biguint(&ax.denom().to_biguint().unwrap())).exp()
    };
    if hi.is_zero() {
        return 0.0;
    }
    let dsign = if d < BigRational::zero() { -1.0 } else { 1.0 };
    let dm = ln_ratio(&(if dsign < 0.0 { -d.clone() } else { d.clone() }));
    let hm = ln_ratio(hi);
    dsign * dm / hm
}

fn both(k: usize, id: InequalityId, pairs: &[(BigRational, BigRational)]) -> InequalityRow {
    let pass = pairs.iter().all(|(lo, hi)| lo <= hi);
    let margin = pairs.iter().map(|(lo, hi)| rel_margin(lo, hi)).fold(f64::INFINITY, f64::min);
    InequalityRow { k, id, pass: Some(pass), margin }
}

/// Checks every scale inequality family exactly, the value of `A` being
/// taken as the exact rational equal to its binary representation.
pub fn verify_scale_inequalities(a: f64, kmax: usize) -> Result<Vec<InequalityRow>> {
    let t = ScaleTable::new(a, kmax + 1)?;
    let ar = t.a_exact();
    let two = big(2);
    let mut rows = Vec::new();
    for k in 0..=kmax {
        let k1 = k as u64 + 1;
        let ak1 = rpow(&ar, k1);
        let fl = bu(&t.floors[k]);
        rows.push(both(k, InequalityId::FloorBounds, &[(&ak1 / &two, fl.clone()), (fl, ak1)]));

        let lk = bu(&t.l[k]);
        let tri = rpow(&ar, k1 * (k1 + 1) / 2);
        let p2 = rpow(&two, k1);
        rows.push(both(k, InequalityId::LkSandwich, &[(&tri / &p2, lk.clone()), (lk.clone(), tri.clone())]));
        rows.push(both(k, InequalityId::AxBounds, &[(lk.clone(), tri.clone()), (tri.clone(), &p2 * &lk)]));

        // L_k^{2/(k+1)} <= A^{k+2} <= 4 L_k^{2/(k+1)}, raised to the power k+1
        let lk2 = &lk * &lk;
        let apow = rpow(&ar, (k1 + 1) * k1);
        let four = rpow(&big(4), k1);
        rows.push(both(k, InequalityId::PowerSandwich, &[(lk2.clone(), apow.clone()), (apow, &four * &lk2)]));

        // L_k^{(k+3)/(k+1)}/2 <= L_{k+1} <= 4 L_k^{(k+3)/(k+1)}, raised to k+1
        let lnext = bu(&t.l[k + 1]);
        let lhs = rpow(&lnext, k1);
        let lk3 = rpow(&lk, k1 + 2);
        rows.push(both(
            k,
            InequalityId::NextScaleSandwich,
            &[(&lk3 / &p2, lhs.clone()), (lhs, &four * &lk3)],
        ));

        // ln L_{k+1} <= r(k,A) ln L_k, in outward-rounded floating point
        let ln_a = a.ln();
        let denom = (k as f64 + 2.0) * ln_a - 2.0 * std::f64::consts::LN_2;
        let row = if !(denom > 0.0) || t.l[k] < BigUint::from(2u32) {
            InequalityRow { k, id: InequalityId::RBound, pass: None, margin: f64::NAN }
        } else {
            let lhs = ln_biguint(&t.l[k + 1]);
            let rhs = t.r[k] * ln_biguint(&t.l[k]);
            let slack = 1e-13 * (lhs.abs() + rhs.abs()) + 1e-300;
            InequalityRow {
                k,
                id: InequalityId::RBound,
                pass: Some(lhs + slack <= rhs - slack),
                margin: (rhs - lhs) / rhs,
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn inequality_csv(rows: &[InequalityRow]) -> String {
    let mut s = String::from("k,inequality,pass,margin\n");
    for r in rows {
        let pass = match r.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "na",
        };
        s.push_str(&format!("{},{},{},{:e}\n", r.k, r.id.name(), pass, r.margin));
    }
    s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightTable {
    pub beta: f64,
    pub cap: Option<f64>,
    /// `ln H_k`
    pub h_log: Vec<f64>,
    /// exact heights when they fit in 64 bits
    pub h_toy: Option<Vec<u64>>,
}

pub const H0: u64 = 100;

/// `ln ceil(e^x)`
fn ln_ceil_exp(x: f64) -> f64 {
    if x < 36.0 {
        x.exp().ceil().ln()
    } else {
        x
    }
}

impl HeightTable {
    /// `H_0 = 100`, `H_k = 2 ceil(e^{E_k}) H_{k-1}` with `E_k = L_k^{1 - beta/(k+1)}`,
    /// the exponent replaced by `min(E_k, cap)` when a cap is set.
    pub fn new(beta: f64, scales: &ScaleTable, kmax: usize, cap: Option<f64>) -> Result<Self> {
        Self::with_base(beta, scales, kmax, cap, H0)
    }

    /// Same recursion from an arbitrary positive base height `h0`.
    pub fn with_base(beta: f64, scales: &ScaleTable, kmax: usize, cap: Option<f64>, h0: u64) -> Result<Self> {
        if h0 == 0 {
            return Err(Error::OutOfRange("base height must be positive".into()));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::OutOfRange(format!("beta = {beta} must lie in (0,1)")));
        }
        let kmax = kmax.min(scales.kmax());
        let mut h_log = vec![(h0 as f64).ln()];
        let mut h_int: Option<Vec<u64>> = Some(vec![h0]);
        for k in 1..=kmax {
            let e = ((1.0 - beta / (k as f64 + 1.0)) * scales.ln_l(k)).exp();
            let e = cap.map_or(e, |c| e.min(c));
            let step = std::f64::consts::LN_2 + ln_ceil_exp(e);
            let next = h_log[k - 1] + step;
            if !next.is_finite() {
                return Err(Error::Overflow(format!("ln H_{k} = ln 2 + ceil(e^{e}) + ln H_{}", k - 1)));
            }
            h_log.push(next);
            h_int = h_int.and_then(|mut v| {
                if e >= 43.0 {
                    return None;
                }
                let ce = e.exp().ceil() as u64;
                let h = v[k - 1].checked_mul(2)?.checked_mul(ce)?;
                v.push(h);
                Some(v)
            });
        }
        Ok(HeightTable { beta, cap, h_log, h_toy: h_int })
    }

    pub fn h(&self, k: usize) -> Option<u64> {
        self.h_toy.as_ref()?.get(k).copied()
    }

    pub fn require(&self, k: usize) -> Result<u64> {
        self.h(k).ok_or_else(|| Error::Overflow(format!("H_{k} does not fit a machine integer")))
    }
}

pub fn height_table(beta: f64, scales: &ScaleTable, kmax: usize, cap: Option<f64>) -> Result<HeightTable> {
    HeightTable::new(beta, scales, kmax, cap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_tables() {
        let t = ScaleTable::new(2.5, 4).unwrap();
        let l: Vec<u64> = (0..4).map(|k| t.l_u64(k).unwrap()).collect();
        assert_eq!(l, vec![2, 12, 180, 7020]);
        let t = ScaleTable::new(2.0, 1).unwrap();
        assert_eq!((t.l_u64(0), t.l_u64(1)), (Some(2), Some(8)));
    }

    #[test]
    fn a_examples() {
        let c = (32.0 * 10f64.ln()).sqrt();
        assert!((compute_a(0.5, c).unwrap() - 5.0).abs() < 1e-12);
        assert!(compute_a(1.0, 18.0).is_err());
        let a = compute_a(0.99, 18.0).unwrap();
        assert!((a / 2.47e4 - 1.0).abs() < 0.01);
    }

    #[test]
    fn alpha_mu() {
        let r = find_alpha_mu(18.0).unwrap();
        assert_eq!((r.alpha, r.mu), (0.99, 0.99));
        assert!(w_alpha_mu(0.99, 0.99) < 18.0);
        assert!(matches!(find_alpha_mu(17.0), Err(Error::BelowThreshold { .. })));
    }

    #[test]
    fn heights_toy() {
        let t = ScaleTable::new(3.0, 3).unwrap();
        let h = HeightTable::new(0.9, &t, 2, Some(1.0)).unwrap();
        assert_eq!(h.h(0), Some(100));
        assert_eq!(h.h(1), Some(600));
        assert_eq!(h.h(2), Some(3600));
    }

    #[test]
    fn inequalities_a25() {
        let rows = verify_scale_inequalities(2.5, 10).unwrap();
        assert!(rows.iter().all(|r| r.pass != Some(false)));
    }
}
