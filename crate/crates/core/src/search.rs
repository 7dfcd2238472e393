//! Two-level search over large sorted arrays.

use serde::{Deserialize, Serialize};

const BLOCK: usize = 16;

/// Every `BLOCK`-th element of a sorted array. Searching this small array
/// first keeps lookups in a long array down to one cached level plus one block.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub(crate) struct BlockIndex {
    top: Vec<f64>,
}

impl BlockIndex {
    pub(crate) fn new(sorted: &[f64]) -> Self {
        Self {
            top: sorted.iter().step_by(BLOCK).copied().collect(),
        }
    }

    /// `sorted.partition_point(|&d| d < x)` for the array this index was
    /// built from.
    pub(crate) fn count_below(&self, sorted: &[f64], x: f64) -> usize {
        if self.top.is_empty() {
            return sorted.partition_point(|&d| d < x);
        }
        let b = self.top.partition_point(|&d| d < x);
        if b == 0 {
            return 0;
        }
        let start = (b - 1) * BLOCK;
        let end = (b * BLOCK).min(sorted.len());
        start + sorted[start..end].partition_point(|&d| d < x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_partition_point() {
        for n in [1usize, 2, 15, 16, 17, 100, 1000] {
            let sorted: Vec<f64> = (0..n).map(|i| (i / 2) as f64 * 0.5).collect();
            let idx = BlockIndex::new(&sorted);
            for k in -2..(n as i64 + 2) {
                let x = k as f64 * 0.25;
                assert_eq!(
                    idx.count_below(&sorted, x),
                    sorted.partition_point(|&d| d < x),
                    "n {n} x {x}"
                );
            }
            assert_eq!(
                BlockIndex::default().count_below(&sorted, 1.0),
                sorted.partition_point(|&d| d < 1.0)
            );
        }
    }
}
