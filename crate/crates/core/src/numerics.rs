//! Series and quadrature helpers with explicit error bounds.
//!
//! Tail sums of the log-power family `g(x) = C x^a e^{b sqrt(ln x)} (ln x)^{-d}`
//! use an explicit head plus an Euler-Maclaurin remainder; for convex
//! decreasing `g` the remainder error is at most `(g(K-1) - g(K)) / 8`.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// A value with a certified absolute error bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub error_bound: f64,
}

impl SeriesValue {
    pub fn exact(value: f64) -> Self {
        SeriesValue { value, error_bound: 0.0 }
    }

    pub fn upper(&self) -> f64 {
        self.value + self.error_bound
    }

    pub fn lower(&self) -> f64 {
        self.value - self.error_bound
    }
}

impl std::ops::Add for SeriesValue {
    type Output = SeriesValue;
    fn add(self, o: SeriesValue) -> SeriesValue {
        SeriesValue { value: self.value + o.value, error_bound: self.error_bound + o.error_bound }
    }
}

impl std::ops::Mul<f64> for SeriesValue {
    type Output = SeriesValue;
    fn mul(self, s: f64) -> SeriesValue {
        SeriesValue { value: self.value * s, error_bound: self.error_bound * s.abs() }
    }
}

const GL_N: usize = 20;

fn gauss_legendre() -> &'static ([f64; GL_N], [f64; GL_N]) {
    static NODES: OnceLock<([f64; GL_N], [f64; GL_N])> = OnceLock::new();
    NODES.get_or_init(|| {
        let mut x = [0.0; GL_N];
        let mut w = [0.0; GL_N];
        let n = GL_N as f64;
        for i in 0..GL_N {
            let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
            loop {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=GL_N {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n * (z * p1 - p0) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-16 {
                    let (mut q0, mut q1) = (1.0, z);
                    for k in 2..=GL_N {
                        let kf = k as f64;
                        let q2 = ((2.0 * kf - 1.0) * z * q1 - (kf - 1.0) * q0) / kf;
                        q0 = q1;
                        q1 = q2;
                    }
                    let dq = n * (z * q1 - q0) / (z * z - 1.0);
                    x[i] = z;
                    w[i] = 2.0 / ((1.0 - z * z) * dq * dq);
                    break;
                }
            }
        }
        (x, w)
    })
}

fn gl_panel<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let (x, w) = gauss_legendre();
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for i in 0..GL_N {
        s += w[i] * f(mid + half * x[i]);
    }
    s * half
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let left = gl_panel(f, a, m);
    let right = gl_panel(f, m, b);
    let both = left + right;
    if depth == 0 || (both - whole).abs() <= tol * both.abs().max(1e-300) {
        return both;
    }
    adapt(f, a, m, left, tol, depth - 1) + adapt(f, m, b, right, tol, depth - 1)
}

/// Adaptive Gauss-Legendre quadrature on a finite interval.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    let whole = gl_panel(&f, a, b);
    adapt(&f, a, b, whole, rel_tol, 30)
}

/// `g(x) = coef * x^a * exp(b * sqrt(ln x)) * (ln x)^(-d)` for x > 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogPowerTerm {
    pub coef: f64,
    pub a: f64,
    pub b: f64,
    pub d: f64,
}

impl LogPowerTerm {
    pub fn ln_eval(&self, x: f64) -> f64 {
        let l = x.ln();
        let mut s = self.coef.ln() + self.a * l + self.b * l.max(0.0).sqrt();
        if self.d != 0.0 {
            s -= self.d * l.ln();
        }
        s
    }

    pub fn eval(&self, x: f64) -> f64 {
        if self.coef == 0.0 {
            return 0.0;
        }
        self.ln_eval(x).exp()
    }

    /// Comparison test for `sum_k g(k)`.
    pub fn converges(&self) -> bool {
        if self.coef == 0.0 || self.a < -1.0 {
            return true;
        }
        if self.a > -1.0 {
            return false;
        }
        self.b < 0.0 || (self.b == 0.0 && self.d > 1.0)
    }

    /// `int_K^inf g(x) dx` for K > 1, evaluated in the variable v = sqrt(ln x).
    pub fn tail_integral(&self, k: f64) -> f64 {
        debug_assert!(k > 1.0);
        if self.coef == 0.0 {
            return 0.0;
        }
        let v0 = k.ln().sqrt();
        let e = self.a + 1.0;
        if self.b == 0.0 && self.d == 0.0 {
            return self.coef * k.powf(e) / (-e);
        }
        if e == 0.0 && self.b == 0.0 {
            return 2.0 * self.coef * v0.powf(2.0 - 2.0 * self.d) / (2.0 * self.d - 2.0);
        }
        let phi = |v: f64| (1.0 - 2.0 * self.d) * v.ln() + e * v * v + self.b * v;
        let phi0 = phi(v0);
        let psi = |v: f64| (phi(v) - phi0).exp();
        let slope = |v: f64| ((1.0 - 2.0 * self.d) / v + 2.0 * e * v + self.b).abs();
        let mut total = 0.0;
        let mut lo = v0;
        let mut h = 0.25 / slope(v0).max(1e-3);
        for _ in 0..4000 {
            let hi = lo + h;
            let part = integrate(psi, lo, hi, 1e-14);
            total += part;
            let decreasing = (1.0 - 2.0 * self.d) / hi + 2.0 * e * hi + self.b < 0.0;
            if decreasing && part <= 1e-18 * total {
                break;
            }
            lo = hi;
            h = (h * 1.5).min(0.5 / slope(hi).max(1e-12) + h);
        }
        2.0 * self.coef * phi0.exp() * total
    }

    /// `sum_{k >= n} g(k)` for n >= 2 with certified error, or `None` if divergent.
    pub fn tail_sum(&self, n: u64, rel_tol: f64) -> Option<SeriesValue> {
        if !self.converges() {
            return None;
        }
        if self.coef == 0.0 {
            return Some(SeriesValue::exact(0.0));
        }
        let n = n.max(2);
        let mut partial = Neumaier::default();
        let mut k = n;
        let mut step = 32u64;
        let max_terms: u64 = 1 << 24;
        loop {
            let stop = k + step;
            while k < stop {
                partial.add(self.eval(k as f64));
                k += 1;
            }
            let head = partial.sum();
            let g_prev = self.eval((k - 1) as f64);
            let g_k = self.eval(k as f64);
            let g_next = self.eval((k + 1) as f64);
            let shape_ok = g_prev >= g_k && g_k >= g_next && g_prev + g_next >= 2.0 * g_k;
            if shape_ok {
                let rem = self.tail_integral(k as f64) + 0.5 * g_k;
                let em = (g_prev - g_k) / 8.0;
                let total = head + rem + 0.5 * em;
                let rounding = 4.0 * f64::EPSILON * head.abs();
                let err = 0.5 * em + rounding + 1e-13 * rem;
                if err <= rel_tol * total.abs() || k - n >= max_terms {
                    return Some(SeriesValue { value: total, error_bound: err });
                }
            } else if k - n >= max_terms {
                return Some(SeriesValue { value: head, error_bound: f64::INFINITY });
            }
            step = (step * 2).min(1 << 20);
        }
    }
}

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn sum(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `sum_{k >= n} g(k)` for a term whose successive ratios g(k+1)/g(k) are
/// eventually nonincreasing and below one (geometric-type tails).
pub fn ratio_tail_sum<G: Fn(u64) -> f64>(g: G, n: u64, rel_tol: f64) -> Option<SeriesValue> {
    let mut partial = 0.0;
    let mut prev_ratio = f64::INFINITY;
    for k in n..n + (1u64 << 26) {
        let gk = g(k);
        let gn = g(k + 1);
        partial += gk;
        if gk == 0.0 {
            return Some(SeriesValue::exact(partial));
        }
        let ratio = gn / gk;
        if ratio < 1.0 && ratio <= prev_ratio {
            let bound = gn / (1.0 - ratio);
            if bound <= rel_tol * partial.abs() {
                return Some(SeriesValue { value: partial + 0.5 * bound, error_bound: 0.5 * bound });
            }
        }
        prev_ratio = ratio;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_polynomial_and_exp() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-14);
        assert!((v - 9.0).abs() < 1e-12);
        let e = integrate(f64::exp, 0.0, 1.0, 1e-14);
        assert!((e - (std::f64::consts::E - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn power_tail_integral_closed_form() {
        let t = LogPowerTerm { coef: 1.0, a: -2.0, b: 0.0, d: 0.0 };
        assert!((t.tail_integral(10.0) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn numeric_integral_matches_closed_form_neighbour() {
        // a = -1, b = 0, d = 2: closed form 1 / ln K
        let t = LogPowerTerm { coef: 1.0, a: -1.0, b: 0.0, d: 2.0 };
        assert!((t.tail_integral(100.0) - 1.0 / 100f64.ln()).abs() < 1e-14);
        // a = -2, d = 0 but b tiny negative: close to 1/K
        let u = LogPowerTerm { coef: 1.0, a: -2.0, b: -1e-9, d: 0.0 };
        assert!((u.tail_integral(100.0) - 0.01).abs() < 1e-10);
    }

    #[test]
    fn basel_tail() {
        // sum_{k>=1} 1/k^2 = pi^2/6
        let t = LogPowerTerm { coef: 1.0, a: -2.0, b: 0.0, d: 0.0 };
        let s = t.tail_sum(2, 1e-14).unwrap();
        let want = std::f64::consts::PI.powi(2) / 6.0 - 1.0;
        assert!((s.value - want).abs() < 1e-13, "{} vs {}", s.value, want);
        assert!(s.error_bound < 1e-12);
    }

    #[test]
    fn divergence_verdicts() {
        assert!(!LogPowerTerm { coef: 1.0, a: -1.0, b: 0.0, d: 1.0 }.converges());
        assert!(LogPowerTerm { coef: 1.0, a: -1.0, b: 0.0, d: 1.5 }.converges());
        assert!(LogPowerTerm { coef: 1.0, a: -1.0, b: -0.1, d: 0.0 }.converges());
        assert!(!LogPowerTerm { coef: 1.0, a: -0.9, b: -5.0, d: 9.0 }.converges());
    }

    #[test]
    fn geometric_ratio_sum() {
        let s = ratio_tail_sum(|k| 0.5f64.powi(k as i32), 0, 1e-15).unwrap();
        assert!((s.value - 2.0).abs() < 1e-14);
    }
}
