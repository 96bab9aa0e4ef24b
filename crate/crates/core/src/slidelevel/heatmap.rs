use std::io::Write;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchPrediction {
    pub row: usize,
    pub col: usize,
    pub probability: f64,
}

/// Per-cell tumor probability of one slide, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SlideGrid {
    height: usize,
    width: usize,
    probs: Vec<f64>,
    pub slide_id: usize,
    pub label: usize,
}

impl SlideGrid {
    pub fn from_probs(height: usize, width: usize, probs: Vec<f64>, slide_id: usize, label: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::validation("grid dimensions must be >= 1"));
        }
        if probs.len() != height * width {
            return Err(Error::dimension("grid cells", height * width, probs.len()));
        }
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::validation("grid probabilities must lie in [0, 1]"));
        }
        Ok(Self {
            height,
            width,
            probs,
            slide_id,
            label,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.width + col]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Whitespace-separated rows, one line per grid row.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for r in 0..self.height {
            let row: Vec<String> = (0..self.width).map(|c| format!("{:.4}", self.get(r, c))).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
        Ok(())
    }
}

/// Places patch probabilities on a `height × width` grid. Cells without a
/// patch are 0.
pub fn heatmap_from_patches(
    height: usize,
    width: usize,
    patches: &[PatchPrediction],
    slide_id: usize,
    label: usize,
) -> Result<SlideGrid> {
    let mut probs = vec![0.0; height * width];
    let mut seen = vec![false; height * width];
    for p in patches {
        if p.row >= height || p.col >= width {
            return Err(Error::validation(format!(
                "patch ({}, {}) outside {height}×{width} grid",
                p.row, p.col
            )));
        }
        let cell = p.row * width + p.col;
        if seen[cell] {
            return Err(Error::validation(format!("duplicate patch at ({}, {})", p.row, p.col)));
        }
        seen[cell] = true;
        probs[cell] = p.probability;
    }
    SlideGrid::from_probs(height, width, probs, slide_id, label)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_predictions_give_zero_grid() {
        let g = heatmap_from_patches(3, 4, &[], 0, 0).unwrap();
        assert!(g.probs().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn single_patch_placed() {
        let g = heatmap_from_patches(
            3,
            4,
            &[PatchPrediction {
                row: 2,
                col: 1,
                probability: 0.7,
            }],
            0,
            1,
        )
        .unwrap();
        assert_eq!(g.probs().iter().filter(|&&p| p != 0.0).count(), 1);
        assert_eq!(g.get(2, 1), 0.7);
    }

    #[test]
    fn duplicates_and_out_of_range_rejected() {
        let p = PatchPrediction {
            row: 0,
            col: 0,
            probability: 0.5,
        };
        assert!(heatmap_from_patches(2, 2, &[p, p], 0, 0).is_err());
        let far = PatchPrediction { row: 2, ..p };
        assert!(heatmap_from_patches(2, 2, &[far], 0, 0).is_err());
        let bad = PatchPrediction { probability: 1.5, ..p };
        assert!(heatmap_from_patches(2, 2, &[bad], 0, 0).is_err());
    }
}
