use serde::{Deserialize, Serialize};

use super::components::{connected_components, Region};
use super::heatmap::SlideGrid;

/// The two heatmap binarization thresholds.
pub const THRESHOLDS: [f64; 2] = [0.5, 0.95];
pub const FEATURE_COUNT: usize = 11;

/// Geometry of the supra-threshold regions at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ThresholdSummary {
    pub region_count: usize,
    pub largest_area: usize,
    pub total_area: usize,
    pub largest_mean_probability: f64,
    pub largest_extent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionFeatures {
    pub low: ThresholdSummary,
    pub high: ThresholdSummary,
    pub max_probability: f64,
}

impl RegionFeatures {
    /// Flat order: `low` fields, `high` fields, then the global maximum.
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        let s = |t: &ThresholdSummary| {
            [
                t.region_count as f64,
                t.largest_area as f64,
                t.total_area as f64,
                t.largest_mean_probability,
                t.largest_extent,
            ]
        };
        let (a, b) = (s(&self.low), s(&self.high));
        [a[0], a[1], a[2], a[3], a[4], b[0], b[1], b[2], b[3], b[4], self.max_probability]
    }

    pub fn names() -> [&'static str; FEATURE_COUNT] {
        [
            "regions_050",
            "largest_area_050",
            "total_area_050",
            "largest_mean_050",
            "largest_extent_050",
            "regions_095",
            "largest_area_095",
            "total_area_095",
            "largest_mean_095",
            "largest_extent_095",
            "max_probability",
        ]
    }
}

/// The largest region; equal areas are broken by mean probability and then
/// extent, so the choice never depends on region numbering.
fn largest(regions: &[Region]) -> Option<&Region> {
    regions.iter().max_by(|a, b| {
        a.area()
            .cmp(&b.area())
            .then(a.mean_probability().total_cmp(&b.mean_probability()))
            .then(a.extent().total_cmp(&b.extent()))
    })
}

pub(crate) fn summarize(regions: &[Region]) -> ThresholdSummary {
    match largest(regions) {
        None => ThresholdSummary::default(),
        Some(big) => ThresholdSummary {
            region_count: regions.len(),
            largest_area: big.area(),
            total_area: regions.iter().map(Region::area).sum(),
            largest_mean_probability: big.mean_probability(),
            largest_extent: big.extent(),
        },
    }
}

pub fn extract_features(grid: &SlideGrid) -> RegionFeatures {
    RegionFeatures {
        low: summarize(&connected_components(grid, THRESHOLDS[0])),
        high: summarize(&connected_components(grid, THRESHOLDS[1])),
        max_probability: grid.probs().iter().copied().fold(0.0, f64::max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_grid_has_zero_features() {
        let g = SlideGrid::from_probs(4, 5, vec![0.0; 20], 0, 0).unwrap();
        assert!(extract_features(&g).to_array().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_grid_is_one_region() {
        let g = SlideGrid::from_probs(4, 5, vec![1.0; 20], 0, 1).unwrap();
        let f = extract_features(&g);
        for s in [f.low, f.high] {
            assert_eq!(s.region_count, 1);
            assert_eq!(s.largest_area, 20);
            assert_eq!(s.total_area, 20);
            assert_eq!(s.largest_extent, 1.0);
            assert_eq!(s.largest_mean_probability, 1.0);
        }
        assert_eq!(f.max_probability, 1.0);
    }

    #[test]
    fn high_threshold_areas_are_smaller() {
        let probs = vec![0.6, 0.97, 0.2, 0.99, 0.96, 0.1, 0.3, 0.51, 0.5];
        let g = SlideGrid::from_probs(3, 3, probs, 0, 1).unwrap();
        let f = extract_features(&g);
        assert_eq!(f.low.total_area, 6);
        assert_eq!(f.high.total_area, 3);
        assert!(f.high.largest_area <= f.low.largest_area);
        assert_eq!(f.max_probability, 0.99);
    }
}
