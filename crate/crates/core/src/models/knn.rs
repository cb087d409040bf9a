use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;
use crate::{Error, Result};

/// k-nearest-neighbour mean. Neighbours are ranked by squared
/// Euclidean distance, then by training row index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub train_x: Matrix,
    pub train_y: Vec<f64>,
}

pub fn fit_knn(x: &Matrix, y: &[f64], k: usize) -> Result<KnnModel> {
    if x.rows() == 0 {
        return Err(Error::Empty("knn needs at least one row"));
    }
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch { left: x.rows(), right: y.len() });
    }
    if k == 0 || k > x.rows() {
        return Err(Error::Model(alloc::format!("k = {k} must lie in 1..={}", x.rows())));
    }
    Ok(KnnModel { k, train_x: x.clone(), train_y: y.to_vec() })
}

/// Up to k candidates sorted ascending by (distance, index).
struct Nearest {
    k: usize,
    best: Vec<(f64, usize)>,
}

impl Nearest {
    fn new(k: usize) -> Self {
        Self { k, best: Vec::with_capacity(k + 1) }
    }

    /// Current k-th distance, or infinity while fewer than k are held.
    fn bound(&self) -> f64 {
        if self.best.len() == self.k {
            self.best[self.k - 1].0
        } else {
            f64::INFINITY
        }
    }

    fn offer(&mut self, d2: f64, i: usize) {
        if self.best.len() == self.k && (d2, i) >= self.best[self.k - 1] {
            return;
        }
        let at = self.best.partition_point(|&c| c < (d2, i));
        self.best.insert(at, (d2, i));
        self.best.truncate(self.k);
    }
}

impl KnnModel {
    fn distance2(&self, i: usize, row: &[f64]) -> f64 {
        self.train_x.row(i).iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    fn mean_of(&self, nearest: &Nearest) -> f64 {
        nearest.best.iter().map(|&(_, i)| self.train_y[i]).sum::<f64>() / nearest.best.len() as f64
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut nearest = Nearest::new(self.k);
        for i in 0..self.train_x.rows() {
            nearest.offer(self.distance2(i, row), i);
        }
        self.mean_of(&nearest)
    }

    /// Same neighbours as [`predict_row`](Self::predict_row), found through
    /// a k-d tree built for the call. Rows with NaN fall back to the scan.
    pub fn predict(&self, x: &Matrix) -> Vec<f64> {
        let tree = KdTree::build(&self.train_x);
        (0..x.rows())
            .map(|q| {
                let row = x.row(q);
                if row.iter().any(|v| v.is_nan()) {
                    return self.predict_row(row);
                }
                let mut nearest = Nearest::new(self.k);
                tree.search(0, row, &|i| self.distance2(i, row), &mut nearest);
                self.mean_of(&nearest)
            })
            .collect()
    }
}

const LEAF_SIZE: usize = 16;

enum KdNode {
    Leaf { start: usize, end: usize },
    /// Rows left of the split have `x[axis] <= value`, rows right of it
    /// `x[axis] >= value`.
    Split { axis: usize, value: f64, left: usize, right: usize },
}

struct KdTree<'a> {
    x: &'a Matrix,
    rows: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl<'a> KdTree<'a> {
    fn build(x: &'a Matrix) -> Self {
        let mut tree = Self { x, rows: (0..x.rows()).collect(), nodes: Vec::new() };
        tree.split(0, x.rows());
        tree
    }

    fn split(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(KdNode::Leaf { start, end });
        if end - start <= LEAF_SIZE || self.x.cols() == 0 {
            return id;
        }
        let x = self.x;
        let spread = |j: usize| {
            let (lo, hi) = self.rows[start..end]
                .iter()
                .map(|&i| x.get(i, j))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
            hi - lo
        };
        let axis = (0..x.cols()).map(|j| (spread(j), j)).fold((0.0, 0), |a, b| if b.0 > a.0 { b } else { a }).1;
        if !(spread(axis) > 0.0) {
            return id;
        }
        let mid = start + (end - start) / 2;
        self.rows[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| x.get(a, axis).total_cmp(&x.get(b, axis)).then(a.cmp(&b)));
        let value = x.get(self.rows[mid], axis);
        let left = self.split(start, mid);
        let right = self.split(mid, end);
        self.nodes[id] = KdNode::Split { axis, value, left, right };
        id
    }

    /// Offers every row of subtrees whose lower distance bound does not
    /// exceed the current k-th distance.
    fn search(&self, node: usize, q: &[f64], distance2: &dyn Fn(usize) -> f64, nearest: &mut Nearest) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => self.rows[start..end].iter().for_each(|&i| nearest.offer(distance2(i), i)),
            KdNode::Split { axis, value, left, right } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, distance2, nearest);
                if diff * diff <= nearest.bound() {
                    self.search(far, q, distance2, nearest);
                }
            }
        }
    }
}
