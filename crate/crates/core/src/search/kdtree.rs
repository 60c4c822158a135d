//! Static kd-tree for exact nearest-neighbour queries in the ∞-norm.
//!
//! The tree is implicit: each range `[lo, hi)` of `idx` splits at its median
//! on axis `depth % d`. Points live in an external flat buffer so several
//! trees can share one table of half-sums.

const LEAF: usize = 8;

pub(crate) struct KdTree {
    d: usize,
    idx: Vec<u32>,
}

impl KdTree {
    pub(crate) fn build(points: &[f64], d: usize, mut idx: Vec<u32>) -> Self {
        build_rec(points, d, &mut idx, 0);
        KdTree { d, idx }
    }

    #[cfg(test)]
    pub(crate) fn len(&self) -> usize {
        self.idx.len()
    }

    /// Closest point to `q` as `(distance, point index)`; ties go to the
    /// smaller index. `None` for an empty tree.
    pub(crate) fn nearest(&self, points: &[f64], q: &[f64]) -> Option<(f64, u32)> {
        if self.idx.is_empty() {
            return None;
        }
        let mut best = (f64::INFINITY, u32::MAX);
        self.query(points, q, 0, self.idx.len(), 0, &mut best);
        Some(best)
    }

    fn consider(&self, points: &[f64], q: &[f64], i: u32, best: &mut (f64, u32)) {
        let p = &points[i as usize * self.d..(i as usize + 1) * self.d];
        let mut dist = 0.0f64;
        for (a, b) in p.iter().zip(q) {
            dist = dist.max((a - b).abs());
            if dist > best.0 {
                return;
            }
        }
        if dist < best.0 || (dist == best.0 && i < best.1) {
            *best = (dist, i);
        }
    }

    fn query(&self, points: &[f64], q: &[f64], lo: usize, hi: usize, depth: usize, best: &mut (f64, u32)) {
        if hi - lo <= LEAF {
            for &i in &self.idx[lo..hi] {
                self.consider(points, q, i, best);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let pivot = self.idx[mid];
        self.consider(points, q, pivot, best);
        let axis = depth % self.d;
        let diff = q[axis] - points[pivot as usize * self.d + axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.query(points, q, near.0, near.1, depth + 1, best);
        if diff.abs() <= best.0 {
            self.query(points, q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build_rec(points: &[f64], d: usize, idx: &mut [u32], depth: usize) {
    if idx.len() <= LEAF {
        return;
    }
    let axis = depth % d;
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        let pa = points[a as usize * d + axis];
        let pb = points[b as usize * d + axis];
        pa.total_cmp(&pb).then(a.cmp(&b))
    });
    let (left, right) = idx.split_at_mut(mid);
    build_rec(points, d, left, depth + 1);
    build_rec(points, d, &mut right[1..], depth + 1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for d in 1..=4 {
            let n = 500;
            let pts: Vec<f64> = (0..n * d).map(|_| rng.random_range(-3.0..3.0)).collect();
            let tree = KdTree::build(&pts, d, (0..n as u32).collect());
            assert_eq!(tree.len(), n);
            for _ in 0..200 {
                let q: Vec<f64> = (0..d).map(|_| rng.random_range(-4.0..4.0)).collect();
                let (dist, i) = tree.nearest(&pts, &q).unwrap();
                let scan = (0..n)
                    .map(|k| {
                        let e = (0..d).map(|j| (pts[k * d + j] - q[j]).abs()).fold(0.0, f64::max);
                        (e, k as u32)
                    })
                    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                    .unwrap();
                assert_eq!((dist, i), scan);
            }
        }
    }

    #[test]
    fn empty_and_subset_trees() {
        let pts = vec![0.0, 1.0, 2.0, 3.0];
        assert!(KdTree::build(&pts, 1, vec![]).nearest(&pts, &[0.0]).is_none());
        let t = KdTree::build(&pts, 1, vec![1, 3]);
        assert_eq!(t.nearest(&pts, &[0.0]), Some((1.0, 1)));
    }
}
