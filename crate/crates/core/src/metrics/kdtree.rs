//! Static 3-d tree for exact nearest-neighbour queries. Distances are
//! computed with [`dist_sq3`], the same arithmetic as the brute-force scan,
//! so accelerated results are bit-identical to it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::point::{dist_sq3, Point3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 8;

enum Node<T> {
    Leaf { start: usize, end: usize },
    Split { axis: usize, left: usize, right: usize, split: T },
}

pub struct KdTree<'a, T> {
    points: &'a [Point3<T>],
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

struct HeapItem<T>(T, usize);

impl<T: PartialOrd> PartialEq for HeapItem<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<T: PartialOrd> Eq for HeapItem<T> {}
impl<T: PartialOrd> PartialOrd for HeapItem<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: PartialOrd> Ord for HeapItem<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .partial_cmp(&other.0)
            .unwrap_or(Ordering::Equal)
            .then(self.1.cmp(&other.1))
    }
}

impl<'a, T: Real> KdTree<'a, T> {
    pub fn new(points: &'a [Point3<T>]) -> Self {
        let mut tree = KdTree {
            points,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return self.nodes.len() - 1;
        }
        // Split on the axis of largest spread.
        let mut lo = [T::infinity(); 3];
        let mut hi = [T::neg_infinity(); 3];
        for &i in &self.order[start..end] {
            for k in 0..3 {
                lo[k] = lo[k].min(self.points[i][k]);
                hi[k] = hi[k].max(self.points[i][k]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
            .unwrap();
        let mid = (start + end) / 2;
        let pts = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].partial_cmp(&pts[b][axis]).unwrap()
        });
        let split = self.points[self.order[mid]][axis];
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[slot] = Node::Split {
            axis,
            left,
            right,
            split,
        };
        slot
    }

    /// Index and squared distance of the nearest point; `None` when empty.
    pub fn nearest(&self, q: &Point3<T>) -> Option<(usize, T)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, T::infinity());
        self.nearest_in(0, q, &mut best);
        Some(best)
    }

    fn nearest_in(&self, node: usize, q: &Point3<T>, best: &mut (usize, T)) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist_sq3(q, &self.points[i]);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, left, right, split } => {
                let diff = q[axis] - split;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.nearest_in(near, q, best);
                if diff * diff <= best.1 {
                    self.nearest_in(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points as `(index, squared distance)`, closest first.
    pub fn knn(&self, q: &Point3<T>, k: usize) -> Vec<(usize, T)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_in(0, q, k, &mut heap);
        let mut out: Vec<(usize, T)> = heap.into_iter().map(|HeapItem(d, i)| (i, d)).collect();
        out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        out
    }

    fn knn_in(&self, node: usize, q: &Point3<T>, k: usize, heap: &mut BinaryHeap<HeapItem<T>>) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = dist_sq3(q, &self.points[i]);
                    if heap.len() < k {
                        heap.push(HeapItem(d, i));
                    } else if HeapItem(d, i) < *heap.peek().unwrap() {
                        heap.pop();
                        heap.push(HeapItem(d, i));
                    }
                }
            }
            Node::Split { axis, left, right, split } => {
                let diff = q[axis] - split;
                let (near, far) = if diff < T::zero() { (left, right) } else { (right, left) };
                self.knn_in(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().unwrap().0 {
                    self.knn_in(far, q, k, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    #[test]
    fn matches_scan() {
        let mut r = rng::seeded(4);
        let pts: Vec<[f64; 3]> = (0..300)
            .map(|_| [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(0.0..1.0)])
            .collect();
        let tree = KdTree::new(&pts);
        for _ in 0..200 {
            let q = [r.random_range(-6.0..6.0), r.random_range(-6.0..6.0), r.random_range(-1.0..2.0)];
            let (bi, bd) = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (i, dist_sq3(&q, p)))
                .fold((usize::MAX, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            assert_eq!(tree.nearest(&q).unwrap(), (bi, bd));
            let mut all: Vec<(usize, f64)> =
                pts.iter().enumerate().map(|(i, p)| (i, dist_sq3(&q, p))).collect();
            all.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            assert_eq!(tree.knn(&q, 7), all[..7].to_vec());
        }
    }

    #[test]
    fn empty_tree() {
        let pts: Vec<[f64; 3]> = Vec::new();
        assert!(KdTree::new(&pts).nearest(&[0.0; 3]).is_none());
    }
}
