//! Scale crossing events, the renormalized site lattice and per-sample
//! containment audits. All events live on the unit-column lattice.

use serde::{Deserialize, Serialize};

use crate::crossing::{connects, crossing_h_with, crossing_v_with, Rect};
use crate::dsu::DisjointSetForest;
use crate::error::{Error, Result};
use crate::labels::LabelGrid;
use crate::lattice::EdgeConfig;
use crate::scales::{HeightTable, ScaleTable};

/// Scale and height tables resolved to machine integers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub l: Vec<u64>,
    pub h: Vec<u64>,
    /// `floor(A^{k+1})`
    pub children: Vec<u64>,
    /// `M_k = floor(A^{k+2}/2) - 1`
    pub m: Vec<u64>,
}

impl Geometry {
    pub fn new(scales: &ScaleTable, heights: &HeightTable, kmax: usize) -> Result<Self> {
        let mut g = Geometry { l: vec![], h: vec![], children: vec![], m: vec![] };
        for k in 0..=kmax {
            g.l.push(scales.l_u64(k).ok_or_else(|| Error::Overflow(format!("L_{k}")))?);
            g.h.push(heights.require(k)?);
            g.children.push(scales.children(k).ok_or_else(|| Error::Overflow(format!("floor(A^{})", k + 1)))?);
            g.m.push(if k < scales.kmax() { scales.m_k(k) } else { 0 });
        }
        Ok(g)
    }

    fn lk(&self, k: usize) -> usize {
        self.l[k] as usize
    }

    fn hk(&self, k: usize) -> usize {
        self.h[k] as usize
    }

    /// Scale-k children of one scale-(k+1) interval.
    pub fn per_parent(&self, k: usize) -> u64 {
        self.children[k + 1]
    }

    /// `R((I_i^k u I_{i+1}^k) x [j H_k, (j+1) H_k))`
    pub fn rect_h(&self, i: usize, j: usize, k: usize) -> Rect {
        let (l, h) = (self.lk(k), self.hk(k));
        Rect { x0: i * l, x1: (i + 2) * l, y0: j * h, y1: (j + 1) * h }
    }

    /// `R(I_i^k x [j H_k, (j+2) H_k))`
    pub fn rect_v(&self, i: usize, j: usize, k: usize) -> Rect {
        let (l, h) = (self.lk(k), self.hk(k));
        Rect { x0: i * l, x1: (i + 1) * l, y0: j * h, y1: (j + 2) * h }
    }

    /// `R([0, 2 L_{k+1}) x [2j H_k, (2j+2) H_k))`
    pub fn rect_strip(&self, k: usize, j: usize) -> Rect {
        let h = self.hk(k);
        Rect { x0: 0, x1: 2 * self.lk(k + 1), y0: 2 * j * h, y1: (2 * j + 2) * h }
    }

    /// Number of strips of height `2 H_k` in `[0, H_{k+1})`.
    pub fn strips(&self, k: usize) -> usize {
        self.hk(k + 1) / (2 * self.hk(k))
    }

    /// Height of the rescaled grid used for the vertical crossing at `k+1`:
    /// `2 H_{k+1} / H_k`.
    pub fn rescaled_height(&self, k: usize) -> usize {
        2 * self.hk(k + 1) / self.hk(k)
    }
}

pub struct EventScratch {
    dsu: DisjointSetForest,
}

impl Default for EventScratch {
    fn default() -> Self {
        EventScratch { dsu: DisjointSetForest::new(0) }
    }
}

impl EventScratch {
    pub fn h(&mut self, cfg: &EdgeConfig, g: &Geometry, i: usize, j: usize, k: usize) -> Result<bool> {
        crossing_h_with(cfg, &g.rect_h(i, j, k), &mut self.dsu)
    }

    pub fn v(&mut self, cfg: &EdgeConfig, g: &Geometry, i: usize, j: usize, k: usize) -> Result<bool> {
        crossing_v_with(cfg, &g.rect_v(i, j, k), &mut self.dsu)
    }

    pub fn strip(&mut self, cfg: &EdgeConfig, g: &Geometry, k: usize, j: usize) -> Result<bool> {
        crossing_h_with(cfg, &g.rect_strip(k, j), &mut self.dsu)
    }
}

pub fn event_h(cfg: &EdgeConfig, i: usize, j: usize, k: usize, g: &Geometry) -> Result<bool> {
    EventScratch::default().h(cfg, g, i, j, k)
}

pub fn event_v(cfg: &EdgeConfig, i: usize, j: usize, k: usize, g: &Geometry) -> Result<bool> {
    EventScratch::default().v(cfg, g, i, j, k)
}

pub fn strip_event_s(cfg: &EdgeConfig, level: usize, j: usize, g: &Geometry) -> Result<bool> {
    EventScratch::default().strip(cfg, g, level, j)
}

/// Row carrying the bridging paths over bad intervals: the highest row whose
/// horizontal edges belong to the strip `S_0`.
pub fn gamma_row(g: &Geometry, level: usize) -> usize {
    2 * g.hk(level) - 1
}

/// Horizontal edge ranges `[m_lo, m_hi)` of the two bridging paths, one per
/// scale-(level+1) parent.
pub fn gamma_supports(level: usize, labels: &LabelGrid, g: &Geometry) -> Result<[Option<(usize, usize)>; 2]> {
    let n = g.per_parent(level);
    let l = g.lk(level);
    let mut out = [None, None];
    for (parent, slot) in out.iter_mut().enumerate() {
        let bad = labels.bad_children(level + 1, parent as u64, n);
        if bad.len() > 2 || (bad.len() == 2 && bad[1] != bad[0] + 1) {
            return Err(Error::TooManyBadChildren(parent as u64));
        }
        if let Some(&j) = bad.first() {
            let lo = j.saturating_sub(1);
            let hi = (j + 2).min(2 * n - 1);
            *slot = Some((lo as usize * l, (hi as usize + 1) * l));
        }
    }
    Ok(out)
}

pub fn gamma_paths_open(cfg: &EdgeConfig, level: usize, labels: &LabelGrid, g: &Geometry) -> Result<bool> {
    let row = gamma_row(g, level);
    let sup = gamma_supports(level, labels, g)?;
    for &(lo, hi) in sup.iter().flatten() {
        if hi > cfg.columns || row >= cfg.rows {
            return Err(Error::RectOutOfWindow("bridging path outside window".into()));
        }
        if !(lo..hi).all(|m| cfg.h(m, row)) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizontalAudit {
    pub antecedent: bool,
    pub s0: bool,
    pub any_strip: bool,
    pub h_next: bool,
    /// antecedent without `S_0`
    pub violation_strip: bool,
    /// some strip crossing without `H_{0,0}^{k+1}`
    pub violation_h: bool,
}

/// Columns and rows a window needs for the horizontal audit at `level`.
pub fn horizontal_window(g: &Geometry, level: usize) -> (usize, usize) {
    (2 * g.lk(level + 1) + 1, g.hk(level + 1) + 1)
}

pub fn containment_check_horizontal(cfg: &EdgeConfig, level: usize, labels: &LabelGrid, g: &Geometry) -> Result<HorizontalAudit> {
    let k = level;
    let (c, r) = horizontal_window(g, k);
    if cfg.columns < c || cfg.rows < r {
        return Err(Error::WindowTooSmall { window: cfg.columns.min(cfg.rows) as u64, required: c.max(r) as u64 });
    }
    let mut sc = EventScratch::default();
    let n2 = 2 * g.per_parent(k) as usize;
    let good = |i: usize| !labels.is_bad(k, i as u64);
    let mut antecedent = gamma_paths_open(cfg, k, labels, g)?;
    for i in 0..n2 {
        if !antecedent {
            break;
        }
        if good(i) && !sc.v(cfg, g, i, 0, k)? {
            antecedent = false;
        }
        if i + 1 < n2 && good(i) && good(i + 1) && !sc.h(cfg, g, i, 0, k)? {
            antecedent = false;
        }
    }
    let s0 = sc.strip(cfg, g, k, 0)?;
    let mut any_strip = s0;
    for j in 1..g.strips(k) {
        if any_strip {
            break;
        }
        any_strip = sc.strip(cfg, g, k, j)?;
    }
    let h_next = sc.h(cfg, g, 0, 0, k + 1)?;
    Ok(HorizontalAudit {
        antecedent,
        s0,
        any_strip,
        h_next,
        violation_strip: antecedent && !s0,
        violation_h: any_strip && !h_next,
    })
}

/// One neighbour offset `(di, dj)` of the renormalized lattice.
pub type Offset = (i64, i64);

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenormGrid {
    pub k: usize,
    pub width: usize,
    pub height: usize,
    /// site `(i, j)` at `j * width + i`
    pub sites: Vec<bool>,
    pub m_k: u64,
    pub dependency: Vec<Offset>,
}

impl RenormGrid {
    pub fn site(&self, i: usize, j: usize) -> bool {
        self.sites[j * self.width + i]
    }
}

/// Offsets of the sites whose rectangles share edges with those of site (0,0).
pub fn dependency_offsets() -> Vec<Offset> {
    // a site covers the unit cells (0,0), (1,0) (its H rect) and (0,1) (its V rect)
    let cells = |di: i64, dj: i64| [(di, dj), (di + 1, dj), (di, dj + 1)];
    let base = cells(0, 0);
    let mut out = Vec::new();
    for dj in -2..=2 {
        for di in -2..=2 {
            if (di, dj) != (0, 0) && cells(di, dj).iter().any(|c| base.contains(c)) {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Site `(i, j)` is open iff `H_{i,j}^k` and `V_{i,j}^k` both occur.
pub fn renormalize(cfg: &EdgeConfig, k: usize, g: &Geometry, width: usize, jmax: usize) -> Result<RenormGrid> {
    let mut sc = EventScratch::default();
    let mut sites = Vec::with_capacity(width * jmax);
    for j in 0..jmax {
        for i in 0..width {
            sites.push(sc.h(cfg, g, i, j, k)? && sc.v(cfg, g, i, j, k)?);
        }
    }
    Ok(RenormGrid { k, width, height: jmax, sites, m_k: g.m[k], dependency: dependency_offsets() })
}

/// Open-site path with nearest-neighbour steps from row 0 to row `height - 1`
/// inside `[0, width) x [0, height)`.
pub fn rescaled_vertical_crossing(grid: &RenormGrid, width: usize, height: usize) -> Result<bool> {
    if width == 0 || height == 0 {
        return Ok(false);
    }
    if grid.width < width || grid.height < height {
        return Err(Error::GridTooSmall {
            have: format!("{}x{}", grid.width, grid.height),
            need: format!("{width}x{height}"),
        });
    }
    let n = width * height;
    let mut d = DisjointSetForest::new(n + 2);
    let (bottom, top) = (n, n + 1);
    let id = |i: usize, j: usize| j * width + i;
    for j in 0..height {
        for i in 0..width {
            if !grid.site(i, j) {
                continue;
            }
            if j == 0 {
                d.union(bottom, id(i, j));
            }
            if j + 1 == height {
                d.union(top, id(i, j));
            }
            if i + 1 < width && grid.site(i + 1, j) {
                d.union(id(i, j), id(i + 1, j));
            }
            if j + 1 < height && grid.site(i, j + 1) {
                d.union(id(i, j), id(i, j + 1));
            }
        }
    }
    Ok(d.connected(bottom, top))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerticalAudit {
    pub antecedent: bool,
    pub consequent: bool,
    pub violation: bool,
}

/// Columns and rows a window needs for the vertical audit at `level`.
pub fn vertical_window(g: &Geometry, level: usize) -> (usize, usize) {
    let k = level;
    let cols = ((g.m[k] as usize + 1) * g.lk(k)).max(g.lk(k + 1)) + 1;
    let rows = (g.rescaled_height(k) + 1) * g.hk(k) + 1;
    (cols, rows)
}

/// An open-site vertical crossing of the `M_k x 2H_{k+1}/H_k` rescaled grid
/// implies `V_{0,0}^{k+1}`.
pub fn containment_check_vertical(cfg: &EdgeConfig, level: usize, g: &Geometry) -> Result<VerticalAudit> {
    let k = level;
    let (c, r) = vertical_window(g, k);
    if cfg.columns < c || cfg.rows < r {
        return Err(Error::WindowTooSmall { window: cfg.columns.min(cfg.rows) as u64, required: c.max(r) as u64 });
    }
    let (w, h) = (g.m[k] as usize, g.rescaled_height(k));
    let grid = renormalize(cfg, k, g, w, h)?;
    let antecedent = rescaled_vertical_crossing(&grid, w, h)?;
    let consequent = event_v(cfg, 0, 0, k + 1, g)?;
    Ok(VerticalAudit { antecedent, consequent, violation: antecedent && !consequent })
}

/// Columns and rows a window needs for the ladder between `k_lo` and `k_hi`.
pub fn ladder_window(g: &Geometry, k_hi: usize) -> (usize, usize) {
    (3 * g.lk(k_hi) + 1, 2 * g.hk(k_hi) + 1)
}

/// The nested conjunction: for `k_lo <= k < k_hi`, `H_{i,0}^k` and `V_{i,0}^k`
/// for `0 <= i <= floor(A^{k+2}) - 2`; at `k_hi`, for `i` in `{0, 1}`. When it
/// holds, the cluster of the base `[0, L_{k_lo}] x {0}` reaches row `2 H_{k_hi}`.
pub fn ladder_certificate(cfg: &EdgeConfig, k_lo: usize, k_hi: usize, g: &Geometry) -> Result<VerticalAudit> {
    if k_lo > k_hi {
        return Err(Error::InvalidSpec(format!("k_lo = {k_lo} exceeds k_hi = {k_hi}")));
    }
    let (c, r) = ladder_window(g, k_hi);
    if cfg.columns < c || cfg.rows < r {
        return Err(Error::WindowTooSmall { window: cfg.columns.min(cfg.rows) as u64, required: c.max(r) as u64 });
    }
    let mut sc = EventScratch::default();
    let mut antecedent = true;
    'outer: for k in k_lo..=k_hi {
        let top = if k == k_hi { 1 } else { g.per_parent(k) as usize - 2 };
        for i in 0..=top {
            if !(sc.h(cfg, g, i, 0, k)? && sc.v(cfg, g, i, 0, k)?) {
                antecedent = false;
                break 'outer;
            }
        }
    }
    let frame = Rect { x0: 0, x1: 3 * g.lk(k_hi), y0: 0, y1: 2 * g.hk(k_hi) };
    let consequent = connects(
        cfg,
        &frame,
        (0..=g.lk(k_lo)).map(|x| (x, 0)),
        (0..=frame.x1).map(|x| (x, frame.y1)),
    )?;
    Ok(VerticalAudit { antecedent, consequent, violation: antecedent && !consequent })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_neighbours() {
        let mut d = dependency_offsets();
        d.sort();
        assert_eq!(d, vec![(-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0)]);
    }
}
