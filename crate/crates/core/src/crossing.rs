//! Rectangles and their crossing events.

use serde::{Deserialize, Serialize};

use crate::dsu::DisjointSetForest;
use crate::error::{Error, Result};
use crate::lattice::EdgeConfig;

/// `R([x0,x1) x [y0,y1))`: vertices `[x0,x1] x [y0,y1]`, edges of the top row
/// and of the right column removed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl Rect {
    pub fn new(x0: usize, x1: usize, y0: usize, y1: usize) -> Result<Self> {
        if x0 >= x1 || y0 >= y1 {
            return Err(Error::RectOutOfWindow(format!("degenerate rect [{x0},{x1})x[{y0},{y1})")));
        }
        Ok(Rect { x0, x1, y0, y1 })
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn check(&self, cfg: &EdgeConfig) -> Result<()> {
        if self.x1 >= cfg.columns || self.y1 >= cfg.rows {
            return Err(Error::RectOutOfWindow(format!(
                "rect [{},{}]x[{},{}] exceeds window {}x{}",
                self.x0, self.x1, self.y0, self.y1, cfg.columns, cfg.rows
            )));
        }
        Ok(())
    }

    /// Calls `f(a, b)` for each open edge, with vertices as local indices.
    fn for_open_edges(&self, cfg: &EdgeConfig, mut f: impl FnMut(usize, usize)) {
        let w = self.width() + 1;
        for y in self.y0..self.y1 {
            let ly = y - self.y0;
            for x in self.x0..self.x1 {
                let a = ly * w + (x - self.x0);
                if cfg.h(x, y) {
                    f(a, a + 1);
                }
                if cfg.v(x, y) {
                    f(a, a + w);
                }
            }
        }
    }

    fn local(&self, x: usize, y: usize) -> usize {
        (y - self.y0) * (self.width() + 1) + (x - self.x0)
    }
}

/// Union-find over the rect's open edges, with two extra nodes after the vertices.
fn sides_connected(
    cfg: &EdgeConfig,
    rect: &Rect,
    dsu: &mut DisjointSetForest,
    side_a: impl Iterator<Item = (usize, usize)>,
    side_b: impl Iterator<Item = (usize, usize)>,
) -> bool {
    let n = (rect.width() + 1) * (rect.height() + 1);
    dsu.reset(n + 2);
    let (sa, sb) = (n, n + 1);
    for (x, y) in side_a {
        dsu.union(sa, rect.local(x, y));
    }
    for (x, y) in side_b {
        dsu.union(sb, rect.local(x, y));
    }
    rect.for_open_edges(cfg, |a, b| {
        dsu.union(a, b);
    });
    dsu.connected(sa, sb)
}

pub fn crossing_h_with(cfg: &EdgeConfig, rect: &Rect, dsu: &mut DisjointSetForest) -> Result<bool> {
    rect.check(cfg)?;
    let r = *rect;
    Ok(sides_connected(
        cfg,
        rect,
        dsu,
        (r.y0..=r.y1).map(|y| (r.x0, y)),
        (r.y0..=r.y1).map(|y| (r.x1, y)),
    ))
}

pub fn crossing_v_with(cfg: &EdgeConfig, rect: &Rect, dsu: &mut DisjointSetForest) -> Result<bool> {
    rect.check(cfg)?;
    let r = *rect;
    Ok(sides_connected(
        cfg,
        rect,
        dsu,
        (r.x0..=r.x1).map(|x| (x, r.y0)),
        (r.x0..=r.x1).map(|x| (x, r.y1)),
    ))
}

pub fn crossing_h(cfg: &EdgeConfig, rect: &Rect) -> Result<bool> {
    crossing_h_with(cfg, rect, &mut DisjointSetForest::new(0))
}

pub fn crossing_v(cfg: &EdgeConfig, rect: &Rect) -> Result<bool> {
    crossing_v_with(cfg, rect, &mut DisjointSetForest::new(0))
}

/// Whether some vertex of `from` is joined to some vertex of `to` by open
/// edges of `rect`.
pub fn connects(
    cfg: &EdgeConfig,
    rect: &Rect,
    from: impl Iterator<Item = (usize, usize)>,
    to: impl Iterator<Item = (usize, usize)>,
) -> Result<bool> {
    rect.check(cfg)?;
    Ok(sides_connected(cfg, rect, &mut DisjointSetForest::new(0), from, to))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_and_closed() {
        let mut cfg = EdgeConfig::closed(4, 4);
        let r = Rect::new(0, 3, 0, 3).unwrap();
        assert!(!crossing_h(&cfg, &r).unwrap());
        for v in cfg.vertical_open.iter_mut().chain(cfg.horizontal_open.iter_mut()) {
            *v = true;
        }
        assert!(crossing_h(&cfg, &r).unwrap() && crossing_v(&cfg, &r).unwrap());
        assert!(crossing_h(&cfg, &Rect::new(0, 4, 0, 1).unwrap()).is_err());
    }

    #[test]
    fn top_row_excluded() {
        // only the top row of horizontals open: not part of the rect
        let mut cfg = EdgeConfig::closed(3, 3);
        cfg.set_h(0, 1, true);
        cfg.set_h(1, 1, true);
        let r = Rect::new(0, 2, 0, 1).unwrap();
        assert!(!crossing_h(&cfg, &r).unwrap());
        cfg.set_h(0, 0, true);
        cfg.set_h(1, 0, true);
        assert!(crossing_h(&cfg, &r).unwrap());
    }
}
