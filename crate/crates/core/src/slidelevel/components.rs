use super::heatmap::SlideGrid;

/// A maximal 4-connected set of cells with probability `>= τ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    /// `(row, col)` in row-major order.
    pub cells: Vec<(usize, usize)>,
    pub probability_sum: f64,
    /// `(min_row, min_col, max_row, max_col)`, inclusive.
    pub bbox: (usize, usize, usize, usize),
}

impl Region {
    pub fn area(&self) -> usize {
        self.cells.len()
    }

    pub fn mean_probability(&self) -> f64 {
        self.probability_sum / self.cells.len() as f64
    }

    /// Area over bounding-box area.
    pub fn extent(&self) -> f64 {
        let (r0, c0, r1, c1) = self.bbox;
        self.area() as f64 / ((r1 - r0 + 1) * (c1 - c0 + 1)) as f64
    }
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn union(parent: &mut [usize], a: usize, b: usize) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi] = lo;
    }
}

/// Two-pass union-find labelling with 4-connectivity. Regions come out
/// ordered by their first cell in raster order.
pub fn connected_components(grid: &SlideGrid, threshold: f64) -> Vec<Region> {
    let (h, w) = (grid.height(), grid.width());
    let above = |r: usize, c: usize| grid.get(r, c) >= threshold;
    let mut parent: Vec<usize> = (0..h * w).collect();
    for r in 0..h {
        for c in 0..w {
            if !above(r, c) {
                continue;
            }
            let cell = r * w + c;
            if r > 0 && above(r - 1, c) {
                union(&mut parent, cell, cell - w);
            }
            if c > 0 && above(r, c - 1) {
                union(&mut parent, cell, cell - 1);
            }
        }
    }

    let mut slot = vec![usize::MAX; h * w];
    let mut regions: Vec<Region> = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !above(r, c) {
                continue;
            }
            let root = find(&mut parent, r * w + c);
            if slot[root] == usize::MAX {
                slot[root] = regions.len();
                regions.push(Region {
                    cells: Vec::new(),
                    probability_sum: 0.0,
                    bbox: (r, c, r, c),
                });
            }
            let region = &mut regions[slot[root]];
            region.cells.push((r, c));
            region.probability_sum += grid.get(r, c);
            let b = &mut region.bbox;
            *b = (b.0.min(r), b.1.min(c), b.2.max(r), b.3.max(c));
        }
    }
    regions
}
