//! Empirical decoupling gap `mu(A n B) - mu(A) mu(B)` for events of the
//! stationary residual-time chain separated by `2n` steps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renewal::{fc, DelaySpec, Renewal};
use crate::rng::derive_stream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Test {
    Le { t: u64 },
    Eq { t: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cond {
    pub index: u64,
    #[serde(flatten)]
    pub test: Test,
}

/// Conjunction of coordinate tests; empty means the sure event.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub conds: Vec<Cond>,
}

impl Event {
    pub fn always() -> Self {
        Event::default()
    }

    pub fn zero_at(index: u64) -> Self {
        Event { conds: vec![Cond { index, test: Test::Eq { t: 0 } }] }
    }

    pub fn holds(&self, z: &[u64]) -> bool {
        self.conds.iter().all(|c| {
            let v = z[c.index as usize];
            match c.test {
                Test::Le { t } => v <= t,
                Test::Eq { t } => v == t,
            }
        })
    }

    pub fn min_index(&self) -> Option<u64> {
        self.conds.iter().map(|c| c.index).min()
    }

    pub fn max_index(&self) -> Option<u64> {
        self.conds.iter().map(|c| c.index).max()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecouplingReport {
    pub m: u64,
    pub n: u64,
    pub p_a: f64,
    pub p_b: f64,
    pub p_ab: f64,
    pub gap: f64,
    /// delta-method standard error of `gap`
    pub se: f64,
    /// `c1 / F_c(n)`
    pub bound: f64,
    pub trials: u64,
}

impl DecouplingReport {
    pub fn within(&self, z: f64) -> bool {
        self.gap <= self.bound + z * self.se
    }
}

/// Event A must live on `Z_0..Z_m`, event B on `Z_{m+2n}, ...`.
#[allow(clippy::too_many_arguments)]
pub fn decoupling_gap(
    ren: &Renewal,
    m: u64,
    n: u64,
    event_a: &Event,
    event_b: &Event,
    trials: u64,
    seed: u64,
    c: f64,
    c1: f64,
) -> Result<DecouplingReport> {
    if event_a.max_index().is_some_and(|i| i > m) {
        return Err(Error::BadEventWindow(format!("event A reaches past index {m}")));
    }
    if event_b.min_index().is_some_and(|i| i < m + 2 * n) {
        return Err(Error::BadEventWindow(format!("event B touches indices before {}", m + 2 * n)));
    }
    ren.stationary()?;
    let horizon = event_a.max_index().unwrap_or(0).max(event_b.max_index().unwrap_or(0)) as usize;
    let cells: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map_init(Vec::new, |z: &mut Vec<u64>, t| {
            let mut s = derive_stream(seed, "decouple", t);
            z.clear();
            let mut x = ren.sample_delay(DelaySpec::Stationary, &mut s)?;
            z.push(x);
            for _ in 0..horizon {
                x = ren.step(x, s.uniform());
                z.push(x);
            }
            Ok((event_a.holds(z), event_b.holds(z)))
        })
        .collect::<Result<_>>()?;
    let (mut na, mut nb, mut nab) = (0u64, 0u64, 0u64);
    for &(a, b) in &cells {
        na += a as u64;
        nb += b as u64;
        nab += (a && b) as u64;
    }
    let nt = trials.max(1) as f64;
    let (fa, fb, fab) = (na as f64 / nt, nb as f64 / nt, nab as f64 / nt);
    // influence values per cell (a, b)
    let phi = |a: bool, b: bool| (a && b) as u8 as f64 - fb * a as u8 as f64 - fa * b as u8 as f64;
    let mean = fab - 2.0 * fa * fb;
    let var = (nab as f64 * (phi(true, true) - mean).powi(2)
        + (na - nab) as f64 * (phi(true, false) - mean).powi(2)
        + (nb - nab) as f64 * (phi(false, true) - mean).powi(2)
        + (trials - na - (nb - nab)) as f64 * mean.powi(2))
        / nt;
    Ok(DecouplingReport {
        m,
        n,
        p_a: fa,
        p_b: fb,
        p_ab: fab,
        gap: fab - fa * fb,
        se: (var / nt).sqrt(),
        bound: c1 / fc(c, n as f64),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows_checked() {
        let ren = Renewal::new(crate::pmf::build_pmf(&crate::pmf::DistributionSpec::UniformRange { a: 2, b: 3 }).unwrap());
        let e = decoupling_gap(&ren, 0, 2, &Event::zero_at(1), &Event::zero_at(4), 10, 1, 2.0, 1.0);
        assert!(matches!(e, Err(Error::BadEventWindow(_))));
        let e = decoupling_gap(&ren, 0, 2, &Event::zero_at(0), &Event::zero_at(3), 10, 1, 2.0, 1.0);
        assert!(matches!(e, Err(Error::BadEventWindow(_))));
        let r = decoupling_gap(&ren, 0, 2, &Event::always(), &Event::zero_at(4), 1000, 1, 2.0, 1.0).unwrap();
        assert_eq!(r.gap, 0.0);
    }
}
