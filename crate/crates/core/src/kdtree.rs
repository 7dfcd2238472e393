//! Implicit kd-tree over integer rank vectors, queried with the L∞ metric.

pub(crate) struct KdTree {
    dims: usize,
    // coordinates in tree order, row-major: node i at i * dims
    coords: Vec<u32>,
    // point id of every node; each subrange's midpoint is its splitting node
    order: Vec<u32>,
}

impl KdTree {
    pub(crate) fn new(dims: usize, coords: Vec<u32>) -> Self {
        assert!(dims > 0 && coords.len().is_multiple_of(dims));
        let n = coords.len() / dims;
        let mut order: Vec<u32> = (0..n as u32).collect();
        Self::build(&coords, dims, &mut order, 0);
        // lay the coordinates out in tree order so a search walks memory
        // roughly sequentially instead of jumping through ids
        let mut laid = Vec::with_capacity(coords.len());
        for &id in &order {
            laid.extend_from_slice(&coords[id as usize * dims..(id as usize + 1) * dims]);
        }
        Self {
            dims,
            coords: laid,
            order,
        }
    }

    fn build(coords: &[u32], dims: usize, ids: &mut [u32], depth: usize) {
        if ids.len() <= 1 {
            return;
        }
        let dim = depth % dims;
        let mid = ids.len() / 2;
        ids.select_nth_unstable_by_key(mid, |&id| (coords[id as usize * dims + dim], id));
        let (left, right) = ids.split_at_mut(mid);
        Self::build(coords, dims, left, depth + 1);
        Self::build(coords, dims, &mut right[1..], depth + 1);
    }

    fn node(&self, i: usize) -> &[u32] {
        &self.coords[i * self.dims..(i + 1) * self.dims]
    }

    /// Closest point in L∞; ties go to the smallest id.
    pub(crate) fn nearest(&self, query: &[u32]) -> u32 {
        assert_eq!(query.len(), self.dims);
        let mut best = (u32::MAX, u32::MAX);
        self.search(0, self.order.len(), 0, query, &mut best);
        best.1
    }

    fn search(&self, lo: usize, hi: usize, depth: usize, query: &[u32], best: &mut (u32, u32)) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let id = self.order[mid];
        let node = self.node(mid);
        let d = node.iter().zip(query).map(|(&a, &q)| a.abs_diff(q)).max().unwrap_or(0);
        if (d, id) < *best {
            *best = (d, id);
        }
        let dim = depth % self.dims;
        let split = node[dim];
        let q = query[dim];
        let (near, far) = if q < split {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(near.0, near.1, depth + 1, query, best);
        // a tie on distance may still win on id, so only prune strictly
        if split.abs_diff(q) <= best.0 {
            self.search(far.0, far.1, depth + 1, query, best);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{RandomStream, Randomness};

    fn brute(coords: &[u32], dims: usize, q: &[u32]) -> u32 {
        let n = coords.len() / dims;
        (0..n as u32)
            .min_by_key(|&i| {
                let d = (0..dims)
                    .map(|k| coords[i as usize * dims + k].abs_diff(q[k]))
                    .max()
                    .unwrap();
                (d, i)
            })
            .unwrap()
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = RandomStream::new(2);
        for dims in 1..5 {
            let n = 300;
            let coords: Vec<u32> = (0..n * dims).map(|_| (rng.unit() * 40.0) as u32).collect();
            let tree = KdTree::new(dims, coords.clone());
            for _ in 0..500 {
                let q: Vec<u32> = (0..dims).map(|_| (rng.unit() * 45.0) as u32).collect();
                assert_eq!(tree.nearest(&q), brute(&coords, dims, &q));
            }
        }
    }

    #[test]
    fn single_point() {
        let tree = KdTree::new(2, vec![3, 4]);
        assert_eq!(tree.nearest(&[100, 0]), 0);
    }
}
