//! Edge configurations on a finite window of the quarter plane.
//!
//! Vertices are `(x, y)` with `0 <= x < columns`, `0 <= y < rows`. The vertical
//! edge stored at `(x, y)` joins `(x, y)` to `(x, y+1)`; the horizontal one
//! joins `(x, y)` to `(x+1, y)`.

use serde::{Deserialize, Serialize};

use crate::env::EnvironmentSample;
use crate::error::{Error, Result};
use crate::rng::{hash_uniform, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Formulation {
    /// columns `0, 1, 2, ...`; the horizontal edge between column i and i+1 opens
    /// with probability `p^{xi_{i+1}}`
    Stretched,
    /// unit columns; vertical edges off the renewal set are closed
    UnitColumns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub columns: usize,
    pub rows: usize,
    pub formulation: Formulation,
}

impl WindowConfig {
    pub fn new(columns: usize, rows: usize, formulation: Formulation) -> Result<Self> {
        if columns == 0 || rows == 0 {
            return Err(Error::InvalidSpec(format!("window {columns}x{rows} must be nonempty")));
        }
        Ok(WindowConfig { columns, rows, formulation })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum EdgeMode {
    Direct,
    UniformField { seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeConfig {
    pub columns: usize,
    pub rows: usize,
    pub vertical_open: Vec<bool>,
    pub horizontal_open: Vec<bool>,
    pub p: f64,
    pub mode: EdgeMode,
}

impl EdgeConfig {
    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        y * self.columns + x
    }

    #[inline]
    pub fn v(&self, x: usize, y: usize) -> bool {
        self.vertical_open[y * self.columns + x]
    }

    #[inline]
    pub fn h(&self, x: usize, y: usize) -> bool {
        self.horizontal_open[y * self.columns + x]
    }

    pub fn set_v(&mut self, x: usize, y: usize, open: bool) {
        let i = self.idx(x, y);
        self.vertical_open[i] = open;
    }

    pub fn set_h(&mut self, x: usize, y: usize, open: bool) {
        let i = self.idx(x, y);
        self.horizontal_open[i] = open;
    }

    /// All edges closed (including the nonexistent ones past the window).
    pub fn closed(columns: usize, rows: usize) -> Self {
        EdgeConfig {
            columns,
            rows,
            vertical_open: vec![false; columns * rows],
            horizontal_open: vec![false; columns * rows],
            p: 0.0,
            mode: EdgeMode::Direct,
        }
    }
}

/// Per-edge opening thresholds for one environment: an edge is open at `p`
/// iff its threshold is below `p`, so the configurations are monotone in `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeField {
    pub columns: usize,
    pub rows: usize,
    pub seed: u64,
    pub vertical: Vec<f64>,
    pub horizontal: Vec<f64>,
}

#[inline]
fn is_open(t: f64, p: f64) -> bool {
    t < p || (p >= 1.0 && t.is_finite())
}

/// Edge exponents: `Some(e)` opens with probability `p^e`, `None` never opens.
struct Exponents {
    vertical: Vec<Option<u64>>,
    horizontal: Vec<u64>,
}

fn exponents(env: &EnvironmentSample, w: &WindowConfig) -> Result<Exponents> {
    match w.formulation {
        Formulation::Stretched => {
            let need = w.columns.saturating_sub(1);
            if env.gaps.len() < need {
                return Err(Error::EnvTooShort { have: env.gaps.len() as u64, need: need as u64 });
            }
            Ok(Exponents { vertical: vec![Some(1); w.columns], horizontal: env.gaps[..need].to_vec() })
        }
        Formulation::UnitColumns => {
            let mask = env.renewal_mask(w.columns as u64)?;
            Ok(Exponents {
                vertical: mask.iter().map(|&m| if m { Some(1) } else { None }).collect(),
                horizontal: vec![1; w.columns.saturating_sub(1)],
            })
        }
    }
}

pub fn sample_edges(env: &EnvironmentSample, window: &WindowConfig, p: f64, stream: &mut Stream) -> Result<EdgeConfig> {
    check_p(p)?;
    let ex = exponents(env, window)?;
    Ok(direct(&ex, window, p, stream))
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::OutOfRange(format!("p = {p} must lie in [0,1]")));
    }
    Ok(())
}

fn direct(ex: &Exponents, w: &WindowConfig, p: f64, stream: &mut Stream) -> EdgeConfig {
    let (c, r) = (w.columns, w.rows);
    let mut cfg = EdgeConfig::closed(c, r);
    cfg.p = p;
    let ph: Vec<f64> = ex.horizontal.iter().map(|&e| p.powi(e.min(i32::MAX as u64) as i32)).collect();
    for y in 0..r {
        for x in 0..c {
            let i = y * c + x;
            if y + 1 < r && ex.vertical[x].is_some() {
                cfg.vertical_open[i] = stream.uniform() < p;
            }
            if x + 1 < c {
                cfg.horizontal_open[i] = stream.uniform() < ph[x];
            }
        }
    }
    cfg
}

impl EdgeField {
    pub fn new(env: &EnvironmentSample, window: &WindowConfig, seed: u64) -> Result<Self> {
        let ex = exponents(env, window)?;
        Ok(Self::from_exponents(&ex, window, seed))
    }

    /// Stretched field from explicit column gaps.
    pub fn stretched(gaps: &[u64], rows: usize, seed: u64) -> Self {
        let w = WindowConfig { columns: gaps.len() + 1, rows, formulation: Formulation::Stretched };
        let ex = Exponents { vertical: vec![Some(1); w.columns], horizontal: gaps.to_vec() };
        Self::from_exponents(&ex, &w, seed)
    }

    fn from_exponents(ex: &Exponents, w: &WindowConfig, seed: u64) -> Self {
        let (c, r) = (w.columns, w.rows);
        let mut vertical = vec![f64::INFINITY; c * r];
        let mut horizontal = vec![f64::INFINITY; c * r];
        for y in 0..r {
            for x in 0..c {
                let i = y * c + x;
                if y + 1 < r && ex.vertical[x].is_some() {
                    vertical[i] = hash_uniform(seed, 2 * i as u64);
                }
                if x + 1 < c {
                    let u = hash_uniform(seed, 2 * i as u64 + 1);
                    let e = ex.horizontal[x];
                    horizontal[i] = if e == 1 { u } else { u.powf(1.0 / e as f64) };
                }
            }
        }
        EdgeField { columns: c, rows: r, seed, vertical, horizontal }
    }

    pub fn threshold(&self, p: f64) -> EdgeConfig {
        EdgeConfig {
            columns: self.columns,
            rows: self.rows,
            vertical_open: self.vertical.iter().map(|&t| is_open(t, p)).collect(),
            horizontal_open: self.horizontal.iter().map(|&t| is_open(t, p)).collect(),
            p,
            mode: EdgeMode::UniformField { seed: self.seed },
        }
    }
}
