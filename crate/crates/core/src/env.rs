//! Sampled environments: renewal gaps and the column set they induce.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::renewal::{DelaySpec, Renewal};
use crate::rng::Stream;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvironmentSample {
    /// `xi_1, xi_2, ...`
    pub gaps: Vec<u64>,
    /// renewal positions; `points[0] = delay_offset`, `points[i] - points[i-1] = gaps[i-1]`
    pub points: Vec<u64>,
    pub delay_offset: u64,
}

impl EnvironmentSample {
    pub fn from_gaps(delay_offset: u64, gaps: Vec<u64>) -> Result<Self> {
        if gaps.contains(&0) {
            return Err(Error::InvalidSpec("gaps must be positive".into()));
        }
        let mut points = Vec::with_capacity(gaps.len() + 1);
        let mut x = delay_offset;
        points.push(x);
        for &g in &gaps {
            x = x.checked_add(g).ok_or_else(|| Error::Overflow("renewal position".into()))?;
            points.push(x);
        }
        Ok(EnvironmentSample { gaps, points, delay_offset })
    }

    pub fn is_valid(&self) -> bool {
        self.points.first() == Some(&self.delay_offset)
            && self.points.len() == self.gaps.len() + 1
            && self.points.windows(2).zip(&self.gaps).all(|(w, &g)| w[0] < w[1] && w[1] - w[0] == g)
    }

    pub fn last_point(&self) -> u64 {
        *self.points.last().unwrap()
    }

    /// Renewal status of every column in `[0, len)` is determined.
    pub fn covers(&self, len: u64) -> bool {
        len == 0 || self.last_point() + 1 >= len
    }

    pub fn contains(&self, x: u64) -> bool {
        self.points.binary_search(&x).is_ok()
    }

    /// `mask[x]` is true iff column x is a renewal point, for `x < len`.
    pub fn renewal_mask(&self, len: u64) -> Result<Vec<bool>> {
        if !self.covers(len) {
            return Err(Error::EnvTooShort { have: self.last_point() + 1, need: len });
        }
        let mut mask = vec![false; len as usize];
        for &p in &self.points {
            if p >= len {
                break;
            }
            mask[p as usize] = true;
        }
        Ok(mask)
    }

    pub fn write_gaps(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# delay_offset {}", self.delay_offset)?;
        for g in &self.gaps {
            writeln!(f, "{g}")?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn read_gaps(path: &Path) -> Result<Self> {
        Self::parse_gaps(&std::fs::read_to_string(path)?)
    }

    /// One gap per line; an optional `# delay_offset N` line sets the delay.
    pub fn parse_gaps(text: &str) -> Result<Self> {
        let mut delay = 0;
        let mut gaps = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("delay_offset") {
                    delay = v.trim().parse().map_err(|_| Error::Config(format!("line {}: bad delay", n + 1)))?;
                }
                continue;
            }
            gaps.push(line.parse().map_err(|_| Error::Config(format!("line {}: bad gap {line:?}", n + 1)))?);
        }
        Self::from_gaps(delay, gaps)
    }
}

/// `n_gaps` interarrival times after a delay drawn from `delay`.
pub fn sample_environment(ren: &Renewal, n_gaps: usize, delay: DelaySpec, stream: &mut Stream) -> Result<EnvironmentSample> {
    let d = ren.sample_delay(delay, stream)?;
    let gaps = (0..n_gaps).map(|_| ren.sample_xi(stream)).collect();
    EnvironmentSample::from_gaps(d, gaps)
}

/// Samples gaps until the renewal status of all of `[0, len)` is known.
pub fn sample_environment_covering(ren: &Renewal, len: u64, delay: DelaySpec, stream: &mut Stream) -> Result<EnvironmentSample> {
    let d = ren.sample_delay(delay, stream)?;
    let mut gaps = Vec::new();
    let mut x = d;
    while x + 1 < len {
        let g = ren.sample_xi(stream);
        gaps.push(g);
        x += g;
    }
    EnvironmentSample::from_gaps(d, gaps)
}

/// Gaps to the right and to the left of a renewal point at the origin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TwoSidedEnvironment {
    pub right: Vec<u64>,
    pub left: Vec<u64>,
}

pub fn sample_two_sided(ren: &Renewal, n_each: usize, stream: &mut Stream) -> TwoSidedEnvironment {
    let right = (0..n_each).map(|_| ren.sample_xi(stream)).collect();
    let left = (0..n_each).map(|_| ren.sample_xi(stream)).collect();
    TwoSidedEnvironment { right, left }
}

impl TwoSidedEnvironment {
    /// Gaps between consecutive columns `-n..=n`, left to right.
    pub fn column_gaps(&self, n: usize) -> Result<Vec<u64>> {
        if self.left.len() < n || self.right.len() < n {
            return Err(Error::EnvTooShort { have: self.left.len().min(self.right.len()) as u64, need: n as u64 });
        }
        let mut g: Vec<u64> = self.left[..n].iter().rev().copied().collect();
        g.extend_from_slice(&self.right[..n]);
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::{build_pmf, DistributionSpec};

    #[test]
    fn deterministic_gaps() {
        let ren = Renewal::new(build_pmf(&DistributionSpec::Deterministic { d: 3 }).unwrap());
        let mut s = Stream::new(1, "t", 0);
        let e = sample_environment(&ren, 4, DelaySpec::Fixed { m: 0 }, &mut s).unwrap();
        assert_eq!(e.points, vec![0, 3, 6, 9, 12]);
        assert!(e.is_valid());
        let mask = e.renewal_mask(7).unwrap();
        assert_eq!(mask, vec![true, false, false, true, false, false, true]);
        assert!(e.renewal_mask(14).is_err());
    }

    #[test]
    fn gap_file_roundtrip() {
        let e = EnvironmentSample::from_gaps(2, vec![1, 4, 2]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.txt");
        e.write_gaps(&p).unwrap();
        assert_eq!(EnvironmentSample::read_gaps(&p).unwrap(), e);
    }

    #[test]
    fn two_sided_order() {
        let t = TwoSidedEnvironment { right: vec![1, 2], left: vec![3, 4] };
        assert_eq!(t.column_gaps(2).unwrap(), vec![4, 3, 1, 2]);
    }
}
